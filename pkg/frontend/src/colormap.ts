/**
 * Section fill color from pouch pressure.
 *
 * Fixed, documented endpoints: 0 kPa absolute (hard vacuum in the pouch,
 * maximum jamming pressure difference) maps to the jammed color, and the
 * robot's internal absolute pressure (no pressure difference, unjammed)
 * maps to the unjammed color. Pressures in between interpolate linearly;
 * anything above internal clamps to the unjammed end.
 */

export const JAMMED_RGB: readonly [number, number, number] = [37, 99, 235];
export const UNJAMMED_RGB: readonly [number, number, number] = [245, 158, 11];

export function jammingFraction(
  pouchAbsKpa: number,
  internalAbsKpa: number,
): number {
  if (!(internalAbsKpa > 0)) return 0;
  const t = 1 - pouchAbsKpa / internalAbsKpa;
  return Math.min(1, Math.max(0, t));
}

export function pouchColor(pouchAbsKpa: number, internalAbsKpa: number): string {
  const t = jammingFraction(pouchAbsKpa, internalAbsKpa);
  const mix = (a: number, b: number) => Math.round(a + (b - a) * t);
  const r = mix(UNJAMMED_RGB[0], JAMMED_RGB[0]);
  const g = mix(UNJAMMED_RGB[1], JAMMED_RGB[1]);
  const b = mix(UNJAMMED_RGB[2], JAMMED_RGB[2]);
  return `rgb(${r}, ${g}, ${b})`;
}
