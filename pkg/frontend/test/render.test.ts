import { describe, expect, it } from "vitest";
import { pouchColor } from "../src/colormap.js";
import {
  fitTransform,
  ghostPolyline,
  renderModel,
  toCanvas,
} from "../src/render.js";
import { makeSnapshot } from "./helpers.js";

describe("renderModel", () => {
  it("draws one segment per server segment, positioned by the server", () => {
    const model = renderModel(makeSnapshot());
    expect(model.segments).toHaveLength(4);
    expect(model.segments[0]?.from).toEqual([0, 0]);
    expect(model.segments[0]?.to).toEqual([0, 250]);
    expect(model.segments[3]?.to).toEqual([0, 1000]);
    expect(model.tip).toEqual([0, 1000]);
  });

  it("colors every unjammed section at the unjammed endpoint", () => {
    const snap = makeSnapshot();
    const model = renderModel(snap);
    const want = pouchColor(snap.internal_abs_kpa, snap.internal_abs_kpa);
    for (const seg of model.segments) {
      expect(seg.color).toBe(want);
      expect(seg.jammed).toBe(false);
    }
  });

  it("colors a vented section differently and carries the jam flag", () => {
    const snap = makeSnapshot();
    snap.sections[1] = {
      index: 1,
      pouch_abs_kpa: 0,
      delta_p_kpa: 108.225,
      jammed: true,
    };
    const model = renderModel(snap);
    expect(model.segments[1]?.color).toBe(pouchColor(0, snap.internal_abs_kpa));
    expect(model.segments[1]?.color).not.toBe(model.segments[0]?.color);
    expect(model.segments[1]?.jammed).toBe(true);
    expect(model.segments[0]?.jammed).toBe(false);
  });

  it("marks wrinkled joints at their segment origin and nowhere else", () => {
    const snap = makeSnapshot({ wrinkled: [false, false, true, false] });
    const model = renderModel(snap);
    expect(model.wrinkles).toEqual([{ at: [0, 500], joint: 2 }]);
  });

  it("skips wrinkle flags for joints that are not everted yet", () => {
    const snap = makeSnapshot({ wrinkled: [true, true] });
    snap.segments = [snap.segments[0]!];
    const model = renderModel(snap);
    expect(model.wrinkles).toEqual([{ at: [0, 0], joint: 0 }]);
  });

  it("flags highlighted sections", () => {
    const model = renderModel(makeSnapshot(), "elevation", [0, 2]);
    expect(model.segments.map((s) => s.highlighted)).toEqual([
      true,
      false,
      true,
      false,
    ]);
  });

  it("projects elevation as x-z and plan as x-y", () => {
    const snap = makeSnapshot();
    snap.segments[0] = { origin_mm: [0, 0, 0], end_mm: [10, 20, 30] };
    expect(renderModel(snap, "elevation").segments[0]?.to).toEqual([10, 30]);
    expect(renderModel(snap, "plan").segments[0]?.to).toEqual([10, 20]);
  });

  it("only the elevation view carries a ghost", () => {
    const snap = makeSnapshot();
    expect(renderModel(snap, "elevation", [], [0, 0, 0, 0]).ghost).not.toBeNull();
    expect(renderModel(snap, "plan", [], [0, 0, 0, 0]).ghost).toBeNull();
    expect(renderModel(snap, "elevation").ghost).toBeNull();
  });
});

describe("ghostPolyline", () => {
  it("with zero angles reproduces a straight beam of the drawn length", () => {
    const pts = ghostPolyline(makeSnapshot(), [0, 0, 0, 0]);
    expect(pts).toHaveLength(5);
    expect(pts[0]).toEqual([0, 0]);
    expect(pts[4]?.[0]).toBeCloseTo(0, 9);
    expect(pts[4]?.[1]).toBeCloseTo(1000, 9);
  });

  it("folds 90 degrees at the first joint into a horizontal run", () => {
    const pts = ghostPolyline(makeSnapshot(), [90, 0, 0, 0]);
    expect(pts[1]?.[0]).toBeCloseTo(250, 9);
    expect(pts[1]?.[1]).toBeCloseTo(0, 9);
    expect(pts[4]?.[0]).toBeCloseTo(1000, 9);
  });

  it("accumulates bend angles along the chain", () => {
    const pts = ghostPolyline(makeSnapshot(), [45, 45, 0, 0]);
    // after two 45 deg folds the third segment continues horizontally
    expect(pts[2]?.[0]).toBeCloseTo(250 * Math.sin(Math.PI / 4) + 250, 9);
    const dx = (pts[3]?.[0] ?? 0) - (pts[2]?.[0] ?? 0);
    const dz = (pts[3]?.[1] ?? 0) - (pts[2]?.[1] ?? 0);
    expect(dx).toBeCloseTo(250, 9);
    expect(dz).toBeCloseTo(0, 9);
  });
});

describe("fitTransform / toCanvas", () => {
  it("keeps the origin inside the margin even for far-away geometry", () => {
    const t = fitTransform([[400, 400]], 220, 220, 20);
    const [ox, oy] = toCanvas([0, 0], t);
    expect(ox).toBeGreaterThanOrEqual(20);
    expect(ox).toBeLessThanOrEqual(200);
    expect(oy).toBeGreaterThanOrEqual(20);
    expect(oy).toBeLessThanOrEqual(200);
  });

  it("maps mm y-up to px y-down", () => {
    const t = fitTransform([[0, 100]], 220, 220, 20);
    const [, yLow] = toCanvas([0, 0], t);
    const [, yHigh] = toCanvas([0, 100], t);
    expect(yHigh).toBeLessThan(yLow); // up on screen is smaller y
    expect(yLow).toBeCloseTo(200, 9);
    expect(yHigh).toBeCloseTo(20, 9);
  });

  it("preserves aspect ratio with a single scale factor", () => {
    const t = fitTransform(
      [
        [100, 0],
        [0, 50],
      ],
      220,
      120,
      10,
    );
    // limited by both spans: x allows 2 px/mm, y allows 2 px/mm
    expect(t.scale).toBeCloseTo(2, 9);
    const [x1] = toCanvas([100, 0], t);
    expect(x1).toBeCloseTo(210, 9);
  });

  it("stays finite for a single point", () => {
    const t = fitTransform([[0, 0]], 220, 220);
    expect(Number.isFinite(t.scale)).toBe(true);
    const [x, y] = toCanvas([0, 0], t);
    expect(Number.isFinite(x)).toBe(true);
    expect(Number.isFinite(y)).toBe(true);
  });
});
