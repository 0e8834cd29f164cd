import { Snapshot } from "../src/protocol.js";

export function makeSnapshot(overrides: Partial<Snapshot> = {}): Snapshot {
  const base: Snapshot = {
    everted_mm: 1000,
    total_length_mm: 1000,
    internal_kpa: 6.9,
    internal_abs_kpa: 108.225,
    exposed: 4,
    sections: [0, 1, 2, 3].map((i) => ({
      index: i,
      pouch_abs_kpa: 108.225,
      delta_p_kpa: 0,
      jammed: false,
    })),
    tendons: [0, 1, 2].map((i) => ({ index: i, mode: "slack", value: 0 })),
    joint_angles_deg: [[0, 0], [0, 0], [0, 0], [0, 0]],
    rest_angles_deg: [[0, 0], [0, 0], [0, 0], [0, 0]],
    segments: [0, 1, 2, 3].map((i) => ({
      origin_mm: [0, 0, 250 * i],
      end_mm: [0, 0, 250 * (i + 1)],
    })),
    tip_mm: [0, 0, 1000],
    wrinkled: [false, false, false, false],
    log_index: 1,
    state_hash: "0".repeat(64),
  };
  return { ...base, ...overrides };
}

export function welcomeFrame(
  role: "operator" | "spectator",
  snapshot: Snapshot,
  version = 1,
): string {
  return JSON.stringify({ type: "welcome", version, role, state: snapshot });
}

export function stateFrame(snapshot: Snapshot, id?: unknown): string {
  const msg: Record<string, unknown> = { type: "state", state: snapshot };
  if (id !== undefined) msg.id = id;
  return JSON.stringify(msg);
}

export function errorFrame(
  reason: string,
  id?: unknown,
  detail?: unknown,
): string {
  const msg: Record<string, unknown> = { type: "error", reason };
  if (id !== undefined) msg.id = id;
  if (detail !== undefined) msg.detail = detail;
  return JSON.stringify(msg);
}
