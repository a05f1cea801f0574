/**
 * Per-key rate limiter matching the gateway's 44 messages/s fade budget.
 *
 * The first value for an idle key goes out immediately; anything submitted
 * inside the 23 ms frame that follows is coalesced (last write wins) and
 * flushed on the trailing edge, so the newest value always reaches the wire.
 */

export const RATE_HZ = 44;
export const FRAME_MS = 23;

type Clock = () => number;
type Scheduler = (fn: () => void, ms: number) => void;

interface Slot<T> {
  nextFree: number;
  pending: T | null;
  timerSet: boolean;
}

export class FrameLimiter<T> {
  private slots = new Map<string, Slot<T>>();
  private readonly send: (key: string, value: T) => void;
  private readonly now: Clock;
  private readonly schedule: Scheduler;

  constructor(
    send: (key: string, value: T) => void,
    now: Clock = () => Date.now(),
    schedule: Scheduler = (fn, ms) => {
      setTimeout(fn, ms);
    },
  ) {
    this.send = send;
    this.now = now;
    this.schedule = schedule;
  }

  submit(key: string, value: T): void {
    let slot = this.slots.get(key);
    if (slot === undefined) {
      slot = { nextFree: 0, pending: null, timerSet: false };
      this.slots.set(key, slot);
    }
    const t = this.now();
    if (t >= slot.nextFree) {
      slot.pending = null; // superseded by this newer value
      slot.nextFree = t + FRAME_MS;
      this.send(key, value);
      return;
    }
    slot.pending = value;
    if (!slot.timerSet) {
      slot.timerSet = true;
      this.schedule(() => this.flush(key), slot.nextFree - t);
    }
  }

  private flush(key: string): void {
    const slot = this.slots.get(key);
    if (slot === undefined) return;
    slot.timerSet = false;
    if (slot.pending === null) return;
    const t = this.now();
    // A timer can fire late, after an immediate send reopened the frame;
    // hold the line rather than squeezing two sends into one frame.
    if (t < slot.nextFree) {
      slot.timerSet = true;
      this.schedule(() => this.flush(key), slot.nextFree - t);
      return;
    }
    const value = slot.pending;
    slot.pending = null;
    slot.nextFree = t + FRAME_MS;
    this.send(key, value);
  }

  /** Drop any queued values (used when the connection goes away). */
  reset(): void {
    this.slots.clear();
  }
}
