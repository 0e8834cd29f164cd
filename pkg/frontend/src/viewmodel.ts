/**
 * Console view model.
 *
 * Everything on screen derives from server `state` messages; there is no
 * client-side physics. The model enforces strict request-response: one
 * in-flight command at a time, controls gated by canSend() until the
 * matching reply arrives. A malformed frame freezes the view at the last
 * good snapshot behind an error banner, and stale snapshots (older log
 * index than the one displayed) are ignored rather than applied.
 */

import {
  CommandDict,
  PROTOCOL_VERSION,
  Snapshot,
  parseServerMessage,
} from "./protocol.js";

export type Role = "operator" | "spectator";

export interface HistoryEntry {
  command: CommandDict;
  outcome: "accepted" | "rejected";
  reason?: string;
  /** server log index after the command (accepted) or unchanged (rejected) */
  logIndex: number;
}

export interface Rejection {
  command: CommandDict;
  reason: string;
  detail?: unknown;
}

export class ConsoleViewModel {
  role: Role | null = null;
  snapshot: Snapshot | null = null;
  /** protocol or parse failure; when set the view is frozen */
  banner: string | null = null;
  /** last server rejection, reason verbatim */
  rejection: Rejection | null = null;
  history: HistoryEntry[] = [];
  /** log index at connect; > 0 means earlier commands are not in history */
  firstLogIndex: number | null = null;
  pending: { id: number; command: CommandDict } | null = null;

  private nextId = 1;
  private listeners: (() => void)[] = [];

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  connected(): boolean {
    return this.role !== null && this.banner === null;
  }

  canSend(): boolean {
    return this.role === "operator" && this.banner === null
      && this.pending === null;
  }

  /** Build the wire frame for one command. Throws unless canSend(). */
  send(command: CommandDict): { id: number; payload: string } {
    if (!this.canSend()) {
      throw new Error(
        this.role === "spectator"
          ? "spectator connection is read-only"
          : "a command is already in flight",
      );
    }
    const id = this.nextId++;
    this.pending = { id, command };
    this.emit();
    return { id, payload: JSON.stringify({ type: "command", id, command }) };
  }

  handleMessage(raw: string): void {
    if (this.banner !== null) return; // frozen
    const parsed = parseServerMessage(raw);
    if (!parsed.ok) {
      this.banner = parsed.error;
      this.emit();
      return;
    }
    const msg = parsed.message;
    if (msg.type === "welcome") {
      if (msg.version !== PROTOCOL_VERSION) {
        this.banner = `unsupported protocol version ${msg.version}`;
        this.emit();
        return;
      }
      this.role = msg.role;
      this.snapshot = msg.state;
      this.firstLogIndex = msg.state.log_index;
      this.emit();
      return;
    }
    if (msg.type === "state") {
      if (this.pending !== null && msg.id === this.pending.id) {
        this.history.push({
          command: this.pending.command,
          outcome: "accepted",
          logIndex: msg.state.log_index,
        });
        this.pending = null;
        this.rejection = null;
      }
      this.applySnapshot(msg.state);
      this.emit();
      return;
    }
    // error
    if (this.pending !== null && msg.id === this.pending.id) {
      const entry: HistoryEntry = {
        command: this.pending.command,
        outcome: "rejected",
        reason: msg.reason,
        logIndex: this.snapshot ? this.snapshot.log_index : -1,
      };
      this.history.push(entry);
      this.rejection = {
        command: this.pending.command,
        reason: msg.reason,
        detail: msg.detail,
      };
      this.pending = null;
    } else {
      // unsolicited error (e.g. sent while not the operator)
      this.rejection = {
        command: { op: "wait_equilibrium" },
        reason: msg.reason,
        detail: msg.detail,
      };
    }
    this.emit();
  }

  private applySnapshot(next: Snapshot): void {
    // a snapshot older than the displayed one is stale delivery; keep the
    // newer view and let the status bar show the retained log index
    if (this.snapshot !== null && next.log_index < this.snapshot.log_index) {
      return;
    }
    this.snapshot = next;
  }

  /** True when the displayed state lags the given server log index. */
  isStaleAgainst(serverLogIndex: number): boolean {
    return this.snapshot === null
      || this.snapshot.log_index < serverLogIndex;
  }

  /** Sections named by the last rejection's detail, for highlighting. */
  highlightedSections(): number[] {
    const detail = this.rejection?.detail;
    if (detail === null || typeof detail !== "object") return [];
    const d = detail as Record<string, unknown>;
    if (typeof d.section === "number") return [d.section];
    if (Array.isArray(d.sections)) {
      return d.sections.filter((v): v is number => typeof v === "number");
    }
    return [];
  }

  clearRejection(): void {
    this.rejection = null;
    this.emit();
  }
}
