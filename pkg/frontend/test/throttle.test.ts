import { describe, expect, it } from "vitest";

import { FRAME_MS, FrameLimiter, RATE_HZ } from "../src/throttle";
import { FakeClock } from "./clock";

function rig() {
  const clock = new FakeClock();
  const sent: { at: number; key: string; value: number }[] = [];
  const limiter = new FrameLimiter<number>(
    (key, value) => sent.push({ at: clock.now, key, value }),
    () => clock.now,
    clock.schedule,
  );
  return { clock, sent, limiter };
}

describe("FrameLimiter", () => {
  it("passes an idle key through immediately", () => {
    const { sent, limiter } = rig();
    limiter.submit("a", 10);
    expect(sent).toEqual([{ at: 0, key: "a", value: 10 }]);
  });

  it("coalesces a burst onto the newest value and flushes it", () => {
    const { clock, sent, limiter } = rig();
    for (let v = 0; v <= 50; v++) limiter.submit("a", v);
    expect(sent).toHaveLength(1); // only the leading edge so far
    clock.advanceBy(FRAME_MS);
    expect(sent).toHaveLength(2);
    expect(sent[1]).toEqual({ at: FRAME_MS, key: "a", value: 50 });
  });

  it("keeps a 1 s drag within the rate budget and lands the final value", () => {
    const { clock, sent, limiter } = rig();
    // Slider positions every 10 ms for one second.
    for (let t = 0; t <= 1000; t += 10) {
      clock.advanceTo(t);
      limiter.submit("a", t);
    }
    clock.advanceBy(2 * FRAME_MS); // trailing flush
    const within = sent.filter((s) => s.at < 1000);
    expect(within.length).toBeLessThanOrEqual(RATE_HZ);
    expect(sent[sent.length - 1]?.value).toBe(1000);
  });

  it("spaces consecutive sends a full frame apart", () => {
    const { clock, sent, limiter } = rig();
    for (let t = 0; t <= 500; t += 7) {
      clock.advanceTo(t);
      limiter.submit("a", t);
    }
    clock.advanceBy(2 * FRAME_MS);
    for (let i = 1; i < sent.length; i++) {
      expect(sent[i]!.at - sent[i - 1]!.at).toBeGreaterThanOrEqual(FRAME_MS);
    }
  });

  it("gives each key its own budget", () => {
    const { clock, sent, limiter } = rig();
    limiter.submit("a", 1);
    limiter.submit("b", 2);
    expect(sent).toHaveLength(2);
    limiter.submit("a", 3);
    limiter.submit("b", 4);
    clock.advanceBy(FRAME_MS);
    expect(sent).toHaveLength(4);
    expect(sent.map((s) => s.key)).toEqual(["a", "b", "a", "b"]);
  });

  it("tolerates late timers without doubling up inside a frame", () => {
    let now = 0;
    const sent: { at: number; value: number }[] = [];
    const timers: { at: number; fn: () => void }[] = [];
    const limiter = new FrameLimiter<number>(
      (_k, value) => sent.push({ at: now, value }),
      () => now,
      (fn, ms) => timers.push({ at: now + ms, fn }),
    );
    limiter.submit("a", 1); // leading edge at t=0
    now = 5;
    limiter.submit("a", 2); // pends behind the frame
    now = 30;
    limiter.submit("a", 3); // frame expired: goes straight out
    timers.shift()!.fn(); // the t=23 flush finally fires, late
    expect(sent.map((s) => s.value)).toEqual([1, 3]); // stale 2 never sent
    now = 40;
    limiter.submit("a", 4); // inside the reopened frame
    now = 53;
    timers.shift()!.fn();
    expect(sent[sent.length - 1]).toEqual({ at: 53, value: 4 });
    for (let i = 1; i < sent.length; i++) {
      expect(sent[i]!.at - sent[i - 1]!.at).toBeGreaterThanOrEqual(FRAME_MS);
    }
  });

  it("drops pending work on reset", () => {
    const { clock, sent, limiter } = rig();
    limiter.submit("a", 1);
    limiter.submit("a", 2);
    limiter.reset();
    clock.advanceBy(5 * FRAME_MS);
    expect(sent).toHaveLength(1);
  });
});
