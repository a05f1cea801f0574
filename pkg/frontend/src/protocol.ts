/**
 * Gateway JSON schema v1.
 *
 * Every message is one JSON object carrying `v: 1` and a type tag `t`.
 * Unknown fields are ignored on both sides; unknown types are not.
 */

export const SCHEMA_V = 1;

// --- server -> client --------------------------------------------------------

export interface FixtureView {
  name: string;
  on: boolean;
  intensity: number; // 0..100
  rgb: string; // hex without '#'
  last_ack_ms: number | null;
}

export interface StateMsg {
  v: typeof SCHEMA_V;
  t: "state";
  fixtures: FixtureView[];
}

export interface AckMsg {
  v: typeof SCHEMA_V;
  t: "ack";
  fixture: string;
  status: string; // "ok" or the rejection reason, verbatim
  latency_ms: number;
  verb: string;
}

export interface ErrMsg {
  v: typeof SCHEMA_V;
  t: "err";
  reason: string;
}

export type ServerMsg = StateMsg | AckMsg | ErrMsg;

// --- client -> server --------------------------------------------------------

export type PanelOp = "on" | "off" | "status" | "intensity" | "color" | "calibrate";

export interface AuthMsg {
  v: typeof SCHEMA_V;
  t: "auth";
  token?: string;
}

export interface CmdMsg {
  v: typeof SCHEMA_V;
  t: "cmd";
  fixture: string;
  op: PanelOp;
  args?: (string | number)[];
}

export interface FadeMsg {
  v: typeof SCHEMA_V;
  t: "fade";
  fixture: string;
  target: number; // DMX 0..255
  duration_ms: number;
}

export type ClientMsg = AuthMsg | CmdMsg | FadeMsg;

// --- parsing -----------------------------------------------------------------

function isFixtureView(x: unknown): x is FixtureView {
  if (typeof x !== "object" || x === null) return false;
  const f = x as Record<string, unknown>;
  return (
    typeof f.name === "string" &&
    typeof f.on === "boolean" &&
    typeof f.intensity === "number" &&
    typeof f.rgb === "string" &&
    (f.last_ack_ms === null || typeof f.last_ack_ms === "number")
  );
}

/** Parse one line/frame from the gateway; null when it is not schema v1. */
export function parseServerMessage(raw: string): ServerMsg | null {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof doc !== "object" || doc === null) return null;
  const d = doc as Record<string, unknown>;
  if (d.v !== SCHEMA_V) return null;
  switch (d.t) {
    case "state":
      if (Array.isArray(d.fixtures) && d.fixtures.every(isFixtureView)) {
        return { v: SCHEMA_V, t: "state", fixtures: d.fixtures };
      }
      return null;
    case "ack":
      if (
        typeof d.fixture === "string" &&
        typeof d.status === "string" &&
        typeof d.latency_ms === "number" &&
        typeof d.verb === "string"
      ) {
        return {
          v: SCHEMA_V,
          t: "ack",
          fixture: d.fixture,
          status: d.status,
          latency_ms: d.latency_ms,
          verb: d.verb,
        };
      }
      return null;
    case "err":
      if (typeof d.reason === "string") return { v: SCHEMA_V, t: "err", reason: d.reason };
      return null;
    default:
      return null;
  }
}
