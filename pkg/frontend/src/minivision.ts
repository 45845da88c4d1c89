/**
 * Egocentric mini-view: the agent's own vision tensor and scent readout.
 */

import type { ObservationBody } from "./protocol.js";
import type { Ctx2D } from "./render.js";
import { rgbCss, clamp01 } from "./colors.js";

/**
 * Draw the observation's vision grid. Row 0 of the tensor is the row
 * farthest ahead of the agent, so it lands at the top of the view; the
 * agent sits at the center cell, marked with an outline.
 */
export function renderVision(
  ctx: Ctx2D,
  obs: ObservationBody,
  cellPx: number,
): number {
  const [rows, cols] = obs.vision.shape;
  const data = obs.vision.data;
  let drawn = 0;
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const base = (r * cols + c) * 3;
      ctx.fillStyle = rgbCss([
        clamp01(data[base] ?? 0),
        clamp01(data[base + 1] ?? 0),
        clamp01(data[base + 2] ?? 0),
      ]);
      ctx.fillRect(c * cellPx, r * cellPx, cellPx, cellPx);
      drawn += 1;
    }
  }
  const mid = Math.floor(rows / 2);
  ctx.strokeStyle = "#ffd24d";
  ctx.lineWidth = 1;
  ctx.strokeRect(mid * cellPx, mid * cellPx, cellPx, cellPx);
  return drawn;
}

/** Compact text form of a scent vector, e.g. "scent [0.0021, 0, 0.013]". */
export function scentReadout(scent: ArrayLike<number>): string {
  const parts: string[] = [];
  for (let i = 0; i < scent.length; i++) {
    const v = scent[i];
    parts.push(v === 0 ? "0" : String(Number(v.toPrecision(2))));
  }
  return `scent [${parts.join(", ")}]`;
}
