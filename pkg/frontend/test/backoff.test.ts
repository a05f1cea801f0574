import { describe, expect, it } from "vitest";

import { reconnectDelayMs } from "../src/backoff";

describe("reconnectDelayMs", () => {
  it("doubles per attempt from the base", () => {
    expect(reconnectDelayMs(0)).toBe(500);
    expect(reconnectDelayMs(1)).toBe(1000);
    expect(reconnectDelayMs(2)).toBe(2000);
    expect(reconnectDelayMs(3)).toBe(4000);
  });

  it("caps at the maximum", () => {
    expect(reconnectDelayMs(5)).toBe(15000);
    expect(reconnectDelayMs(50)).toBe(15000);
  });

  it("never goes below the base", () => {
    expect(reconnectDelayMs(-3)).toBe(500);
  });
});
