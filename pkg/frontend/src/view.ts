/**
 * Text renderers for the panel.  All pure: state in, strings out.
 */

import type { HistoryRow, PanelState } from "./client";
import type { FixtureView } from "./protocol";

const BAR_W = 20;

export function renderFixtureTile(f: FixtureView): string {
  const filled = Math.round((f.intensity / 100) * BAR_W);
  const bar = "#".repeat(filled) + ".".repeat(BAR_W - filled);
  const power = f.on ? "on " : "off";
  const ack = f.last_ack_ms === null ? "no acks yet" : `last ack @${f.last_ack_ms}ms`;
  return `${f.name}  ${power} [${bar}] ${String(f.intensity).padStart(3)}%  #${f.rgb}  ${ack}`;
}

/** Latency is the gateway's number, printed as received. */
export function renderHistoryRow(r: HistoryRow): string {
  return `${r.fixture}  ${r.verb}  ${r.status}  ${r.latency_ms}ms`;
}

export function renderBanner(state: PanelState): string {
  return state.banner === null ? "" : `!! ${state.banner}`;
}

export function renderPanel(state: PanelState): string {
  const lines: string[] = [];
  const banner = renderBanner(state);
  if (banner !== "") lines.push(banner);
  lines.push(`connection: ${state.connection}`);
  for (const f of state.fixtures) lines.push(renderFixtureTile(f));
  return lines.join("\n");
}
