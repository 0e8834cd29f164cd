/**
 * Browser wiring: websocket, DOM controls, canvas painting. All decisions
 * live in the view model and the pure render/export modules; this file only
 * moves data between them and the page.
 */

import { commandLabel, CommandDict, setPouch } from "./protocol.js";
import { ConsoleViewModel } from "./viewmodel.js";
import { renderModel, fitTransform, toCanvas, View } from "./render.js";
import { historyToScript } from "./exporter.js";
import { ScriptRunner } from "./scriptrunner.js";
import { JAMMED_RGB, UNJAMMED_RGB } from "./colormap.js";

const vm = new ConsoleViewModel();
let runner: ScriptRunner | null = null;
let ghostAngles: number[] | null = null;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

const socket = new WebSocket(`ws://${location.host}/ws`);
socket.addEventListener("message", (ev) => vm.handleMessage(String(ev.data)));
socket.addEventListener("close", () => {
  $("connection").textContent = "disconnected";
  redraw();
});
socket.addEventListener("open", () => {
  $("connection").textContent = "connected";
});

function trySend(cmd: CommandDict): void {
  if (!vm.canSend()) return;
  const { payload } = vm.send(cmd);
  socket.send(payload);
}

// ---------------------------------------------------------------------------
// controls

function numberValue(id: string, fallback: number): number {
  const v = parseFloat(($(id) as unknown as HTMLInputElement).value);
  return Number.isFinite(v) ? v : fallback;
}

$("grow").addEventListener("click", () =>
  trySend({ op: "grow", length_mm: numberValue("grow-mm", 250) }),
);
$("retract").addEventListener("click", () =>
  trySend({ op: "retract", length_mm: numberValue("retract-mm", 250) }),
);
$("wait").addEventListener("click", () =>
  trySend({ op: "wait_equilibrium" }),
);
$("pull").addEventListener("click", () =>
  trySend({
    op: "pull_tendon",
    tendon: numberValue("tendon-index", 0),
    tension_n: numberValue("tension-n", 50),
  }),
);
$("release").addEventListener("click", () =>
  trySend({ op: "release_tendon", tendon: numberValue("tendon-index", 0) }),
);

$("export").addEventListener("click", () => {
  const text = historyToScript(vm.history);
  const blob = new Blob([text], { type: "application/json" });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "console_history.json";
  a.click();
  URL.revokeObjectURL(a.href);
});

$("script-file").addEventListener("change", async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files && input.files[0];
  if (!file) return;
  try {
    runner = ScriptRunner.parse(await file.text());
    $("script-status").textContent =
      `loaded ${runner.commands.length} commands`;
  } catch (e) {
    runner = null;
    $("script-status").textContent = `script rejected: ${(e as Error).message}`;
  }
  redraw();
});

$("step").addEventListener("click", () => {
  if (!runner || runner.done()) return;
  const cmd = runner.peek();
  if (cmd && vm.canSend()) {
    runner.advance();
    trySend(cmd);
  }
});

$("ghost-input").addEventListener("change", (ev) => {
  const text = (ev.target as HTMLInputElement).value.trim();
  if (!text) {
    ghostAngles = null;
  } else {
    const parts = text.split(",").map((s) => parseFloat(s.trim()));
    ghostAngles = parts.every(Number.isFinite) ? parts : null;
  }
  redraw();
});

$("dismiss-rejection").addEventListener("click", () => vm.clearRejection());

// ---------------------------------------------------------------------------
// section rows (built once the snapshot arrives, refreshed on change)

function sectionCommandsRow(index: number, internalAbsKpa: number): string {
  return (
    `<button data-cmd="vent" data-section="${index}">jam (vacuum)</button>` +
    `<button data-cmd="atm" data-section="${index}">jam (atmosphere)</button>` +
    `<button data-cmd="unjam" data-section="${index}" ` +
    `data-internal="${internalAbsKpa}">unjam</button>`
  );
}

$("sections").addEventListener("click", (ev) => {
  const target = ev.target as HTMLElement;
  const cmd = target.dataset.cmd;
  if (!cmd) return;
  const section = parseInt(target.dataset.section ?? "", 10);
  if (!Number.isFinite(section)) return;
  if (cmd === "vent") trySend(setPouch(section, 0));
  else if (cmd === "atm") trySend(setPouch(section, 101.325));
  else if (cmd === "unjam") {
    trySend(setPouch(section, parseFloat(target.dataset.internal ?? "0")));
  }
});

// ---------------------------------------------------------------------------
// painting

function paint(canvasId: string, view: View): void {
  const canvas = $(canvasId) as unknown as HTMLCanvasElement;
  const ctx = canvas.getContext("2d");
  if (!ctx || !vm.snapshot) return;
  const model = renderModel(
    vm.snapshot,
    view,
    vm.highlightedSections(),
    ghostAngles,
  );
  const pts: [number, number][] = [];
  for (const s of model.segments) pts.push(s.from, s.to);
  if (model.ghost) pts.push(...model.ghost);
  pts.push([0, 0], model.tip);
  const t = fitTransform(pts, canvas.width, canvas.height);

  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (model.ghost) {
    ctx.strokeStyle = "rgba(120, 120, 120, 0.5)";
    ctx.setLineDash([6, 4]);
    ctx.lineWidth = 4;
    ctx.beginPath();
    model.ghost.forEach((p, i) => {
      const [x, y] = toCanvas(p, t);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    ctx.setLineDash([]);
  }
  for (const seg of model.segments) {
    ctx.strokeStyle = seg.color;
    ctx.lineWidth = seg.highlighted ? 14 : 10;
    ctx.lineCap = "round";
    ctx.beginPath();
    ctx.moveTo(...toCanvas(seg.from, t));
    ctx.lineTo(...toCanvas(seg.to, t));
    ctx.stroke();
    if (seg.highlighted) {
      ctx.strokeStyle = "rgb(220, 38, 38)";
      ctx.lineWidth = 2;
      ctx.stroke();
    }
  }
  ctx.fillStyle = "rgb(220, 38, 38)";
  for (const w of model.wrinkles) {
    const [x, y] = toCanvas(w.at, t);
    ctx.beginPath();
    ctx.arc(x, y, 6, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillText(`w${w.joint}`, x + 8, y - 8);
  }
  const [tx, ty] = toCanvas(model.tip, t);
  ctx.fillStyle = "rgb(17, 17, 17)";
  ctx.beginPath();
  ctx.arc(tx, ty, 4, 0, 2 * Math.PI);
  ctx.fill();
}

function redraw(): void {
  const snap = vm.snapshot;
  $("role").textContent = vm.role ?? "connecting";
  $("banner").textContent = vm.banner ?? "";
  $("banner").style.display = vm.banner ? "block" : "none";

  const rej = vm.rejection;
  $("rejection").style.display = rej ? "block" : "none";
  if (rej) {
    $("rejection-text").textContent =
      `${commandLabel(rej.command)} rejected: ${rej.reason}` +
      (rej.detail !== undefined ? ` ${JSON.stringify(rej.detail)}` : "");
  }

  const busy = !vm.canSend();
  document.querySelectorAll("button[data-cmd], #grow, #retract, #wait, #pull, #release, #step")
    .forEach((el) => ((el as HTMLButtonElement).disabled = busy));

  if (!snap) return;
  $("log-index").textContent = String(snap.log_index);
  $("state-hash").textContent = snap.state_hash;
  $("everted").textContent =
    `${snap.everted_mm.toFixed(0)} / ${snap.total_length_mm.toFixed(0)} mm`;
  $("pending").textContent = vm.pending
    ? `waiting: ${commandLabel(vm.pending.command)}`
    : "";

  const highlighted = new Set(vm.highlightedSections());
  $("sections").innerHTML = snap.sections
    .map((s) => {
      const exposedMark = s.index < snap.exposed ? "" : " (not exposed)";
      const cls = highlighted.has(s.index) ? ' class="violating"' : "";
      return (
        `<tr${cls}><td>section ${s.index}${exposedMark}</td>` +
        `<td>${s.pouch_abs_kpa.toFixed(3)} kPa</td>` +
        `<td>${s.delta_p_kpa.toFixed(3)} kPa</td>` +
        `<td>${s.jammed ? "jammed" : "soft"}</td>` +
        `<td>${sectionCommandsRow(s.index, snap.internal_abs_kpa)}</td></tr>`
      );
    })
    .join("");

  $("history").innerHTML = vm.history
    .slice(-12)
    .map(
      (h) =>
        `<li class="${h.outcome}">${commandLabel(h.command)} — ` +
        `${h.outcome}${h.reason ? `: ${h.reason}` : ""}</li>`,
    )
    .join("");

  if (runner) {
    $("script-status").textContent = runner.done()
      ? `script finished (${runner.commands.length} commands)`
      : `script at ${runner.cursor}/${runner.commands.length}`;
  }

  paint("elevation", "elevation");
  paint("plan", "plan");
}

// colormap legend endpoints, documented in colormap.ts
($("legend-jammed") as HTMLElement).style.background =
  `rgb(${JAMMED_RGB.join(",")})`;
($("legend-unjammed") as HTMLElement).style.background =
  `rgb(${UNJAMMED_RGB.join(",")})`;

vm.onChange(redraw);
redraw();
