/**
 * Transport abstraction between the panel client and the gateway.
 *
 * The client only needs ordered delivery of whole JSON text messages in
 * both directions; WebSocket gives that in a browser, a newline-delimited
 * TCP stream gives the same thing for headless tooling and tests.
 */

export interface Transport {
  send(raw: string): void;
  close(): void;
  onopen: (() => void) | null;
  onmessage: ((raw: string) => void) | null;
  onclose: (() => void) | null;
}

export type TransportFactory = (url: string) => Transport;

/** The subset of the WebSocket API the panel relies on. */
export interface WebSocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type WebSocketCtor = new (url: string) => WebSocketLike;

/** Browser-side transport over a WebSocket connection. */
export class WsTransport implements Transport {
  onopen: (() => void) | null = null;
  onmessage: ((raw: string) => void) | null = null;
  onclose: (() => void) | null = null;

  private ws: WebSocketLike;
  private closed = false;

  constructor(url: string, ctor?: WebSocketCtor) {
    const WS = ctor ?? (globalThis as { WebSocket?: WebSocketCtor }).WebSocket;
    if (WS === undefined) {
      throw new Error("no WebSocket implementation available");
    }
    this.ws = new WS(url);
    this.ws.onopen = () => {
      this.onopen?.();
    };
    this.ws.onmessage = (ev) => {
      if (typeof ev.data === "string") this.onmessage?.(ev.data);
    };
    this.ws.onclose = () => {
      this.emitClose();
    };
    // An error before open never produces a close event on some stacks;
    // fold both into a single close notification.
    this.ws.onerror = () => {
      this.emitClose();
    };
  }

  send(raw: string): void {
    this.ws.send(raw);
  }

  close(): void {
    this.closed = true;
    this.ws.close();
  }

  private emitClose(): void {
    if (this.closed) return;
    this.closed = true;
    this.onclose?.();
  }
}
