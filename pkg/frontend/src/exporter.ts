/**
 * Command-history export in the CLI's script file format.
 *
 * The output is a CommandScript JSON document (schema_version 1) holding
 * the command dictionaries exactly as they were sent, `_si` sidecars and
 * all, so running it through `vinesim simulate` re-executes the same
 * session: accepted commands are accepted again, rejected ones rejected
 * again, and the final state hash matches the console's.
 */

import { CommandDict } from "./protocol.js";
import { HistoryEntry } from "./viewmodel.js";

export function historyToScript(
  history: HistoryEntry[],
  include: "all" | "accepted" = "all",
): string {
  const commands: CommandDict[] = history
    .filter((h) => include === "all" || h.outcome === "accepted")
    .map((h) => h.command);
  return JSON.stringify({ schema_version: 1, commands }, null, 2) + "\n";
}
