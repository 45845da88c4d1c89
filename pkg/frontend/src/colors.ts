/** Color helpers: item palettes and scent-to-RGB mapping. */

import type { WorldDoc } from "./worlds.js";

export type Rgb = [number, number, number];

export function clamp01(v: number): number {
  return v < 0 ? 0 : v > 1 ? 1 : v;
}

/**
 * Map a scent vector to RGB: the first three channels scaled by `gain`
 * and clamped to [0, 1]. Missing channels read as zero.
 */
export function scentToRgb(scent: ArrayLike<number>, gain: number): Rgb {
  const out: Rgb = [0, 0, 0];
  for (let i = 0; i < 3; i++) {
    const v = i < scent.length ? scent[i] : 0;
    out[i] = clamp01(v * gain);
  }
  return out;
}

/** CSS color string from a unit-range RGB triple. */
export function rgbCss(rgb: Rgb): string {
  const r = Math.round(clamp01(rgb[0]) * 255);
  const g = Math.round(clamp01(rgb[1]) * 255);
  const b = Math.round(clamp01(rgb[2]) * 255);
  return `rgb(${r},${g},${b})`;
}

function hslToRgb(h: number, s: number, l: number): Rgb {
  const c = (1 - Math.abs(2 * l - 1)) * s;
  const hp = (((h % 360) + 360) % 360) / 60;
  const x = c * (1 - Math.abs((hp % 2) - 1));
  let rgb: Rgb;
  if (hp < 1) rgb = [c, x, 0];
  else if (hp < 2) rgb = [x, c, 0];
  else if (hp < 3) rgb = [0, c, x];
  else if (hp < 4) rgb = [0, x, c];
  else if (hp < 5) rgb = [x, 0, c];
  else rgb = [c, 0, x];
  const m = l - c / 2;
  return [rgb[0] + m, rgb[1] + m, rgb[2] + m];
}

/**
 * Deterministic color for an item type id, used when the world's real
 * palette is unknown. Golden-angle hue spacing keeps neighbours apart.
 */
export function fallbackColor(typeId: number): Rgb {
  return hslToRgb(typeId * 137.50776405, 0.62, 0.55);
}

/** Palette function for a world: real item colors, or the fallback. */
export function paletteFor(doc: WorldDoc | null): (typeId: number) => Rgb {
  if (doc === null) return fallbackColor;
  const colors = doc.items.map(
    (it) => [clamp01(it.color[0] ?? 0), clamp01(it.color[1] ?? 0), clamp01(it.color[2] ?? 0)] as Rgb,
  );
  return (typeId) => colors[typeId] ?? fallbackColor(typeId);
}
