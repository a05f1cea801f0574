/**
 * Newline-delimited JSON transport over a plain TCP socket.
 *
 * The gateway sniffs the first client bytes to pick framing, so the
 * transport writes a bare newline on connect: enough to trigger detection
 * (and the token-free auto snapshot) while the gateway skips blank lines.
 */

import * as net from "node:net";

import type { Transport } from "./transport";

function parseTarget(url: string): { host: string; port: number } {
  const bare = url.replace(/^ndjson:\/\//, "").replace(/^tcp:\/\//, "");
  const at = bare.lastIndexOf(":");
  if (at < 0) throw new Error(`bad ndjson target: ${url}`);
  const host = bare.slice(0, at);
  const port = Number(bare.slice(at + 1));
  if (!Number.isInteger(port) || port <= 0 || port > 65535) {
    throw new Error(`bad ndjson target: ${url}`);
  }
  return { host, port };
}

export class NdjsonTransport implements Transport {
  onopen: (() => void) | null = null;
  onmessage: ((raw: string) => void) | null = null;
  onclose: (() => void) | null = null;

  private sock: net.Socket;
  private buf = "";
  private closed = false;

  constructor(url: string) {
    const { host, port } = parseTarget(url);
    this.sock = net.connect({ host, port });
    this.sock.setNoDelay(true);
    this.sock.on("connect", () => {
      this.sock.write("\n");
      this.onopen?.();
    });
    this.sock.on("data", (chunk: Buffer) => {
      this.buf += chunk.toString("utf8");
      let nl: number;
      while ((nl = this.buf.indexOf("\n")) >= 0) {
        const line = this.buf.slice(0, nl).trim();
        this.buf = this.buf.slice(nl + 1);
        if (line.length > 0) this.onmessage?.(line);
      }
    });
    this.sock.on("close", () => {
      this.emitClose();
    });
    this.sock.on("error", () => {
      this.emitClose();
    });
  }

  send(raw: string): void {
    this.sock.write(raw + "\n");
  }

  close(): void {
    this.closed = true;
    this.sock.destroy();
  }

  private emitClose(): void {
    if (this.closed) return;
    this.closed = true;
    this.onclose?.();
  }
}
