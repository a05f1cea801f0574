/** Deterministic clock + scheduler for driving timers in tests. */

interface Pending {
  at: number;
  seq: number;
  fn: () => void;
}

export class FakeClock {
  now = 0;
  private q: Pending[] = [];
  private seq = 0;

  schedule = (fn: () => void, ms: number): void => {
    this.q.push({ at: this.now + Math.max(0, ms), seq: this.seq++, fn });
  };

  /** Run everything due up to and including time t, in order. */
  advanceTo(t: number): void {
    for (;;) {
      this.q.sort((a, b) => a.at - b.at || a.seq - b.seq);
      const next = this.q[0];
      if (next === undefined || next.at > t) break;
      this.q.shift();
      this.now = Math.max(this.now, next.at);
      next.fn();
    }
    this.now = t;
  }

  advanceBy(ms: number): void {
    this.advanceTo(this.now + ms);
  }
}
