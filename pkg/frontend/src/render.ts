/**
 * Snapshot to draw primitives.
 *
 * The server's snapshot already carries world-space segment endpoints from
 * its own kinematics, so rendering is projection and styling only. Two
 * orthographic views: elevation (x across, z up, the bend plane of tendon
 * 0) and plan (x across, y up). Output is plain data so tests never need a
 * canvas.
 */

import { pouchColor } from "./colormap.js";
import { Snapshot } from "./protocol.js";

export type View = "elevation" | "plan";

export interface DrawSegment {
  from: [number, number]; // mm, view coordinates
  to: [number, number];
  color: string;
  jammed: boolean;
  index: number;
  highlighted: boolean;
}

export interface WrinkleMarker {
  at: [number, number]; // mm, view coordinates
  joint: number;
}

export interface RenderModel {
  segments: DrawSegment[];
  wrinkles: WrinkleMarker[];
  tip: [number, number];
  ghost: [number, number][] | null;
}

function project(p: number[], view: View): [number, number] {
  const x = p[0] ?? 0;
  const y = p[1] ?? 0;
  const z = p[2] ?? 0;
  return view === "elevation" ? [x, z] : [x, y];
}

/**
 * Optional target-pose ghost: a polyline folded from per-joint bend angles
 * (deg, elevation plane) over the drawn segment lengths. Display geometry
 * only; it never feeds back into state.
 */
export function ghostPolyline(
  snapshot: Snapshot,
  targetAnglesDeg: number[],
): [number, number][] {
  const pts: [number, number][] = [[0, 0]];
  let heading = 0; // rad from the z axis, in the x-z plane
  let x = 0;
  let z = 0;
  snapshot.segments.forEach((seg, j) => {
    const dx = (seg.end_mm[0] ?? 0) - (seg.origin_mm[0] ?? 0);
    const dy = (seg.end_mm[1] ?? 0) - (seg.origin_mm[1] ?? 0);
    const dz = (seg.end_mm[2] ?? 0) - (seg.origin_mm[2] ?? 0);
    const length = Math.hypot(dx, dy, dz);
    heading += ((targetAnglesDeg[j] ?? 0) * Math.PI) / 180;
    x += length * Math.sin(heading);
    z += length * Math.cos(heading);
    pts.push([x, z]);
  });
  return pts;
}

export function renderModel(
  snapshot: Snapshot,
  view: View = "elevation",
  highlight: number[] = [],
  ghostAnglesDeg: number[] | null = null,
): RenderModel {
  const marked = new Set(highlight);
  const segments: DrawSegment[] = snapshot.segments.map((seg, j) => {
    const section = snapshot.sections[j];
    return {
      from: project(seg.origin_mm, view),
      to: project(seg.end_mm, view),
      color: section
        ? pouchColor(section.pouch_abs_kpa, snapshot.internal_abs_kpa)
        : "rgb(128, 128, 128)",
      jammed: section ? section.jammed : false,
      index: j,
      highlighted: marked.has(j),
    };
  });
  const wrinkles: WrinkleMarker[] = [];
  snapshot.wrinkled.forEach((flag, j) => {
    const seg = snapshot.segments[j];
    if (flag && seg) wrinkles.push({ at: project(seg.origin_mm, view), joint: j });
  });
  return {
    segments,
    wrinkles,
    tip: project(snapshot.tip_mm, view),
    ghost:
      ghostAnglesDeg && view === "elevation"
        ? ghostPolyline(snapshot, ghostAnglesDeg)
        : null,
  };
}

export interface FitTransform {
  scale: number; // px per mm
  offsetX: number; // px
  offsetY: number;
}

/**
 * Map view coordinates (mm, y up) into a canvas (px, y down), preserving
 * aspect ratio, with the given margin. Always includes the origin so the
 * mount stays on screen.
 */
export function fitTransform(
  points: [number, number][],
  width: number,
  height: number,
  margin = 20,
): FitTransform {
  let minX = 0;
  let maxX = 0;
  let minY = 0;
  let maxY = 0;
  for (const [x, y] of points) {
    minX = Math.min(minX, x);
    maxX = Math.max(maxX, x);
    minY = Math.min(minY, y);
    maxY = Math.max(maxY, y);
  }
  const spanX = Math.max(maxX - minX, 1e-6);
  const spanY = Math.max(maxY - minY, 1e-6);
  const scale = Math.min(
    (width - 2 * margin) / spanX,
    (height - 2 * margin) / spanY,
  );
  return {
    scale,
    offsetX: margin - minX * scale,
    offsetY: height - margin + minY * scale,
  };
}

export function toCanvas(
  p: [number, number],
  t: FitTransform,
): [number, number] {
  return [p[0] * t.scale + t.offsetX, t.offsetY - p[1] * t.scale];
}
