/**
 * Wire protocol for the session websocket.
 *
 * The server speaks JSON: a `welcome` on connect carrying the role and the
 * current state snapshot, then `state` or `error` replies to `command`
 * messages. Spectators additionally receive id-less `state` broadcasts.
 * Everything here is validated with zod so a malformed frame never reaches
 * the view model as a half-parsed object.
 */

import { z } from "zod";

export const PROTOCOL_VERSION = 1;

const vec3 = z.array(z.number()).length(3);
const pair = z.array(z.number()).length(2);

export const SectionSchema = z.object({
  index: z.number().int(),
  pouch_abs_kpa: z.number(),
  delta_p_kpa: z.number(),
  jammed: z.boolean(),
});

export const TendonSchema = z.object({
  index: z.number().int(),
  mode: z.string(),
  value: z.number(),
});

export const SegmentSchema = z.object({
  origin_mm: vec3,
  end_mm: vec3,
});

export const SnapshotSchema = z.object({
  everted_mm: z.number(),
  total_length_mm: z.number(),
  internal_kpa: z.number(),
  internal_abs_kpa: z.number(),
  exposed: z.number().int(),
  sections: z.array(SectionSchema),
  tendons: z.array(TendonSchema),
  joint_angles_deg: z.array(pair),
  rest_angles_deg: z.array(pair),
  segments: z.array(SegmentSchema),
  tip_mm: vec3,
  wrinkled: z.array(z.boolean()),
  log_index: z.number().int(),
  state_hash: z.string().regex(/^[0-9a-f]{64}$/),
});

export type Snapshot = z.infer<typeof SnapshotSchema>;
export type Section = z.infer<typeof SectionSchema>;

const WelcomeSchema = z.object({
  type: z.literal("welcome"),
  version: z.number().int(),
  role: z.enum(["operator", "spectator"]),
  state: SnapshotSchema,
});

const StateSchema = z.object({
  type: z.literal("state"),
  id: z.unknown().optional(),
  state: SnapshotSchema,
});

const ErrorSchema = z.object({
  type: z.literal("error"),
  id: z.unknown().optional(),
  reason: z.string(),
  detail: z.unknown().optional(),
});

export const ServerMessageSchema = z.discriminatedUnion("type", [
  WelcomeSchema,
  StateSchema,
  ErrorSchema,
]);

export type ServerMessage = z.infer<typeof ServerMessageSchema>;
export type WelcomeMessage = z.infer<typeof WelcomeSchema>;
export type StateMessage = z.infer<typeof StateSchema>;
export type ErrorMessage = z.infer<typeof ErrorSchema>;

export type ParseResult =
  | { ok: true; message: ServerMessage }
  | { ok: false; error: string };

export function parseServerMessage(raw: string): ParseResult {
  let data: unknown;
  try {
    data = JSON.parse(raw);
  } catch (e) {
    return { ok: false, error: `not JSON: ${(e as Error).message}` };
  }
  const parsed = ServerMessageSchema.safeParse(data);
  if (!parsed.success) {
    const issue = parsed.error.issues[0];
    const where = issue && issue.path.length ? ` at ${issue.path.join(".")}` : "";
    return {
      ok: false,
      error: `malformed message${where}: ${issue ? issue.message : "unknown"}`,
    };
  }
  return { ok: true, message: parsed.data };
}

/**
 * Command dictionaries, in the same human-unit encoding the script files
 * use. Scripts written by the planner carry `_si` sidecars with the exact
 * hex-float values; the console never fabricates them but passes them
 * through untouched, because the server prefers the sidecar over the
 * human-unit field and that is what makes a scripted replay land on the
 * identical state hash. Commands typed in the console have no sidecar and
 * the server converts the human units itself.
 */
type SiMap = Record<string, string>;

export type CommandDict =
  | { op: "grow"; length_mm: number; _si?: SiMap }
  | { op: "retract"; length_mm: number; _si?: SiMap }
  | { op: "set_pouch"; section: number; pressure_kpa: number; _si?: SiMap }
  | { op: "pull_tendon"; tendon: number; tension_n: number; _si?: SiMap }
  | {
      op: "pull_tendon";
      tendon: number;
      target_length_mm: number;
      _si?: SiMap;
    }
  | { op: "release_tendon"; tendon: number; _si?: SiMap }
  | { op: "wait_equilibrium"; _si?: SiMap };

const si = z.record(z.string()).optional();

export const CommandDictSchema: z.ZodType<CommandDict> = z.union([
  z.object({ op: z.literal("grow"), length_mm: z.number(), _si: si }),
  z.object({ op: z.literal("retract"), length_mm: z.number(), _si: si }),
  z.object({
    op: z.literal("set_pouch"),
    section: z.number().int(),
    pressure_kpa: z.number(),
    _si: si,
  }),
  z.object({
    op: z.literal("pull_tendon"),
    tendon: z.number().int(),
    tension_n: z.number(),
    _si: si,
  }),
  z.object({
    op: z.literal("pull_tendon"),
    tendon: z.number().int(),
    target_length_mm: z.number(),
    _si: si,
  }),
  z.object({ op: z.literal("release_tendon"), tendon: z.number().int(), _si: si }),
  z.object({ op: z.literal("wait_equilibrium"), _si: si }),
]);

export function grow(lengthMm: number): CommandDict {
  return { op: "grow", length_mm: lengthMm };
}

export function retract(lengthMm: number): CommandDict {
  return { op: "retract", length_mm: lengthMm };
}

export function setPouch(section: number, pressureKpa: number): CommandDict {
  return { op: "set_pouch", section, pressure_kpa: pressureKpa };
}

export function pullTendon(tendon: number, tensionN: number): CommandDict {
  return { op: "pull_tendon", tendon, tension_n: tensionN };
}

export function releaseTendon(tendon: number): CommandDict {
  return { op: "release_tendon", tendon };
}

export function waitEquilibrium(): CommandDict {
  return { op: "wait_equilibrium" };
}

export function commandLabel(cmd: CommandDict): string {
  switch (cmd.op) {
    case "grow":
      return `grow ${cmd.length_mm} mm`;
    case "retract":
      return `retract ${cmd.length_mm} mm`;
    case "set_pouch":
      return `set pouch ${cmd.section} to ${cmd.pressure_kpa} kPa`;
    case "pull_tendon":
      return "tension_n" in cmd
        ? `pull tendon ${cmd.tendon} at ${cmd.tension_n} N`
        : `pull tendon ${cmd.tendon} to ${cmd.target_length_mm} mm`;
    case "release_tendon":
      return `release tendon ${cmd.tendon}`;
    case "wait_equilibrium":
      return "wait for equilibrium";
  }
}
