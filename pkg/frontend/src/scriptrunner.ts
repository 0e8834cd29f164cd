/**
 * Stepper for a saved CommandScript: load a script file, then send one
 * command per step through the view model's request-response gate.
 */

import { CommandDict, CommandDictSchema } from "./protocol.js";
import { z } from "zod";

const ScriptSchema = z.object({
  schema_version: z.number().int(),
  // entries may carry _si unit sidecars with the exact values; they ride
  // along unchanged so the server re-executes precisely what the planner
  // solved, not a unit-converted approximation
  commands: z.array(z.record(z.unknown())),
});

export class ScriptRunner {
  readonly commands: CommandDict[];
  cursor = 0;

  constructor(commands: CommandDict[]) {
    this.commands = commands;
  }

  static parse(text: string): ScriptRunner {
    const data = ScriptSchema.parse(JSON.parse(text));
    if (data.schema_version !== 1) {
      throw new Error(`unknown script schema version ${data.schema_version}`);
    }
    const commands = data.commands.map((entry) => CommandDictSchema.parse(entry));
    return new ScriptRunner(commands);
  }

  done(): boolean {
    return this.cursor >= this.commands.length;
  }

  peek(): CommandDict | null {
    return this.done() ? null : this.commands[this.cursor] ?? null;
  }

  /** Advance past the current command after the server acknowledged it. */
  advance(): void {
    if (!this.done()) this.cursor += 1;
  }
}
