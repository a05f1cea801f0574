/**
 * Panel session: a pure view over gateway state.
 *
 * Everything rendered comes from `state` and `ack` messages; the client
 * never predicts what a command will do to a fixture.  Fader drags are
 * throttled to the gateway's 44/s fade budget, ack rows show the
 * gateway's status and latency fields untouched, and a lost connection
 * raises a banner while reconnect attempts back off.
 */

import { reconnectDelayMs } from "./backoff";
import { SCHEMA_V, parseServerMessage } from "./protocol";
import type { ClientMsg, CmdMsg, FixtureView, PanelOp } from "./protocol";
import { FrameLimiter } from "./throttle";
import { WsTransport } from "./transport";
import type { Transport, TransportFactory } from "./transport";
import { renderHistoryRow } from "./view";

export const HISTORY_CAP = 100;
export const OUTBOX_CAP = 32;

export type ConnectionStatus = "connecting" | "open" | "closed";

export interface HistoryRow {
  fixture: string;
  verb: string;
  status: string; // "ok" or the gateway's reason code, verbatim
  latency_ms: number; // gateway-reported; the panel never times locally
}

export interface PanelState {
  connection: ConnectionStatus;
  banner: string | null;
  fixtures: FixtureView[];
  history: HistoryRow[];
}

export interface PanelOptions {
  token?: string;
  transport?: TransportFactory;
  now?: () => number;
  schedule?: (fn: () => void, ms: number) => void;
  maxOutbox?: number;
  reconnect?: boolean;
}

export class PanelClient {
  readonly url: string;
  /** Fired after every state change; rendering hangs off this. */
  onupdate: (() => void) | null = null;

  readonly state: PanelState = {
    connection: "connecting",
    banner: null,
    fixtures: [],
    history: [],
  };

  private readonly token: string | undefined;
  private readonly makeTransport: TransportFactory;
  private readonly schedule: (fn: () => void, ms: number) => void;
  private readonly maxOutbox: number;
  private readonly wantReconnect: boolean;
  private readonly fades: FrameLimiter<number>;

  private transport: Transport | null = null;
  private stopped = false;
  private attempts = 0;
  private outbox: ClientMsg[] = [];
  private dropped = 0;

  constructor(url: string, opts: PanelOptions = {}) {
    this.url = url;
    this.token = opts.token;
    this.makeTransport = opts.transport ?? ((u) => new WsTransport(u));
    this.schedule =
      opts.schedule ??
      ((fn, ms) => {
        setTimeout(fn, ms);
      });
    this.maxOutbox = opts.maxOutbox ?? OUTBOX_CAP;
    this.wantReconnect = opts.reconnect ?? true;
    this.fades = new FrameLimiter<number>(
      (fixture, target) =>
        this.push({ v: SCHEMA_V, t: "fade", fixture, target, duration_ms: 0 }),
      opts.now,
      this.schedule,
    );
    this.dial();
  }

  // -- operations --

  /** Slider position in percent; emitted as a DMX fade, rate limited. */
  faderDrag(fixture: string, percent: number): void {
    const p = Math.min(100, Math.max(0, Math.round(percent)));
    this.fades.submit(fixture, Math.round((p * 255) / 100));
  }

  command(fixture: string, op: PanelOp, args?: (string | number)[]): void {
    const msg: CmdMsg = { v: SCHEMA_V, t: "cmd", fixture, op };
    if (args !== undefined) msg.args = args;
    this.push(msg);
  }

  sendColor(fixture: string, rgb: string | [number, number, number]): void {
    const hex =
      typeof rgb === "string"
        ? rgb.replace(/^#/, "").toLowerCase()
        : rgb
            .map((c) =>
              Math.min(255, Math.max(0, Math.round(c)))
                .toString(16)
                .padStart(2, "0"),
            )
            .join("");
    this.command(fixture, "color", [hex]);
  }

  showHistory(): string[] {
    return this.state.history.map(renderHistoryRow);
  }

  close(): void {
    this.stopped = true;
    this.fades.reset();
    this.state.connection = "closed";
    this.transport?.close();
    this.transport = null;
  }

  /** Sends waiting for a connection; capped, overflow is dropped. */
  get queued(): number {
    return this.outbox.length;
  }

  get droppedSends(): number {
    return this.dropped;
  }

  // -- connection lifecycle --

  private dial(): void {
    if (this.stopped) return;
    this.state.connection = "connecting";
    let t: Transport;
    try {
      t = this.makeTransport(this.url);
    } catch {
      this.onDown();
      return;
    }
    this.transport = t;
    // Guard every callback against a replaced transport: a zombie socket
    // from before a reconnect must not drive panel state.
    t.onopen = () => {
      if (t === this.transport) this.onUp();
    };
    t.onmessage = (raw) => {
      if (t === this.transport) this.onRaw(raw);
    };
    t.onclose = () => {
      if (t === this.transport) this.onDown();
    };
    this.bump();
  }

  private onUp(): void {
    this.attempts = 0;
    this.state.connection = "open";
    this.state.banner = null;
    if (this.token !== undefined) {
      this.transport?.send(
        JSON.stringify({ v: SCHEMA_V, t: "auth", token: this.token }),
      );
    }
    const backlog = this.outbox;
    this.outbox = [];
    for (const msg of backlog) this.transport?.send(JSON.stringify(msg));
    this.bump();
  }

  private onDown(): void {
    this.transport = null;
    this.fades.reset();
    this.state.connection = "closed";
    if (this.stopped) return;
    if (!this.wantReconnect) {
      this.state.banner = "disconnected";
      this.bump();
      return;
    }
    const delay = reconnectDelayMs(this.attempts);
    this.attempts += 1;
    this.state.banner = `disconnected; reconnecting in ${delay} ms`;
    this.schedule(() => this.dial(), delay);
    this.bump();
  }

  private onRaw(raw: string): void {
    const msg = parseServerMessage(raw);
    if (msg === null) return;
    if (msg.t === "state") {
      // Sole source of fixture truth: replace wholesale, no local edits.
      this.state.fixtures = msg.fixtures;
    } else if (msg.t === "ack") {
      const rows = this.state.history;
      rows.push({
        fixture: msg.fixture,
        verb: msg.verb,
        status: msg.status,
        latency_ms: msg.latency_ms,
      });
      if (rows.length > HISTORY_CAP) rows.splice(0, rows.length - HISTORY_CAP);
    } else {
      this.state.banner = msg.reason;
    }
    this.bump();
  }

  private push(msg: ClientMsg): void {
    if (this.transport !== null && this.state.connection === "open") {
      this.transport.send(JSON.stringify(msg));
    } else if (this.outbox.length < this.maxOutbox) {
      this.outbox.push(msg);
    } else {
      this.dropped += 1;
    }
  }

  private bump(): void {
    this.onupdate?.();
  }
}

export function connect(url: string, opts?: PanelOptions): PanelClient {
  return new PanelClient(url, opts);
}
