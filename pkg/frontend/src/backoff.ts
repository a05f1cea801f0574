/** Reconnect delay: doubles per attempt from base up to max. */
export function reconnectDelayMs(attempt: number, base = 500, max = 15000): number {
  return Math.min(base * Math.pow(2, Math.max(0, attempt)), max);
}
