/**
 * Canvas renderer.
 *
 * Pure drawing against a minimal 2D-context interface so tests can pass a
 * recording fake. Everything drawn comes from the PatchCache and the view
 * state: cells of fixed patches are filled from item colors (or from
 * scent channels when the overlay is on), speculative patches are
 * hatched, patches never received stay background.
 */

import type { PatchCache } from "./patches.js";
import { cellScent } from "./patches.js";
import type { ViewState } from "./viewstate.js";
import { rgbCss, scentToRgb, type Rgb } from "./colors.js";

export interface Ctx2D {
  fillStyle: string;
  strokeStyle: string;
  lineWidth: number;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  rect(x: number, y: number, w: number, h: number): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  closePath(): void;
  fill(): void;
  stroke(): void;
  save(): void;
  restore(): void;
  clip(): void;
}

export interface RenderInput {
  state: ViewState;
  cache: PatchCache;
  palette: (typeId: number) => Rgb;
  width: number;
  height: number;
}

export interface RenderStats {
  patchesDrawn: number;
  hatchedPatches: number;
  itemsDrawn: number;
  agentsDrawn: number;
  scentCells: number;
}

export const BACKGROUND = "#10141a";
const HATCH = "#3a4254";
const AGENT_FILL = "#f2f2f2";
const SELF_RING = "#ffd24d";

/** Screen position of the top-left corner of world cell (wx, wy). */
export function cellOrigin(
  s: ViewState,
  width: number,
  height: number,
  wx: number,
  wy: number,
): [number, number] {
  const sx = (wx - s.camera.x) * s.zoom + width / 2;
  const sy = height / 2 - (wy + 1 - s.camera.y) * s.zoom;
  return [sx, sy];
}

/** Inclusive world-cell rectangle covered by the canvas. */
export function visibleCellRect(
  s: ViewState,
  width: number,
  height: number,
): { x0: number; y0: number; x1: number; y1: number } {
  const halfW = width / (2 * s.zoom);
  const halfH = height / (2 * s.zoom);
  return {
    x0: Math.floor(s.camera.x - halfW),
    x1: Math.floor(s.camera.x + halfW),
    y0: Math.floor(s.camera.y - halfH),
    y1: Math.floor(s.camera.y + halfH),
  };
}

function hatchPatch(
  ctx: Ctx2D,
  sx: number,
  sy: number,
  sizePx: number,
): void {
  ctx.save();
  ctx.beginPath();
  ctx.rect(sx, sy, sizePx, sizePx);
  ctx.clip();
  ctx.strokeStyle = HATCH;
  ctx.lineWidth = 1;
  ctx.beginPath();
  const step = 10;
  for (let d = -sizePx; d < sizePx; d += step) {
    ctx.moveTo(sx + d, sy);
    ctx.lineTo(sx + d + sizePx, sy + sizePx);
  }
  ctx.stroke();
  ctx.restore();
}

function drawAgent(
  ctx: Ctx2D,
  sx: number,
  sy: number,
  z: number,
  direction: string,
): void {
  const pad = z * 0.18;
  ctx.fillStyle = AGENT_FILL;
  ctx.beginPath();
  switch (direction) {
    case "N":
      ctx.moveTo(sx + z / 2, sy + pad);
      ctx.lineTo(sx + z - pad, sy + z - pad);
      ctx.lineTo(sx + pad, sy + z - pad);
      break;
    case "S":
      ctx.moveTo(sx + z / 2, sy + z - pad);
      ctx.lineTo(sx + pad, sy + pad);
      ctx.lineTo(sx + z - pad, sy + pad);
      break;
    case "E":
      ctx.moveTo(sx + z - pad, sy + z / 2);
      ctx.lineTo(sx + pad, sy + pad);
      ctx.lineTo(sx + pad, sy + z - pad);
      break;
    default: // W
      ctx.moveTo(sx + pad, sy + z / 2);
      ctx.lineTo(sx + z - pad, sy + pad);
      ctx.lineTo(sx + z - pad, sy + z - pad);
      break;
  }
  ctx.closePath();
  ctx.fill();
}

export function render(ctx: Ctx2D, input: RenderInput): RenderStats {
  const { state, cache, palette, width, height } = input;
  const stats: RenderStats = {
    patchesDrawn: 0,
    hatchedPatches: 0,
    itemsDrawn: 0,
    agentsDrawn: 0,
    scentCells: 0,
  };

  ctx.fillStyle = BACKGROUND;
  ctx.fillRect(0, 0, width, height);

  const P = cache.patchSize;
  if (P <= 0) return stats;

  const cells = visibleCellRect(state, width, height);
  const px0 = Math.floor(cells.x0 / P);
  const px1 = Math.floor(cells.x1 / P);
  const py0 = Math.floor(cells.y0 / P);
  const py1 = Math.floor(cells.y1 / P);
  const z = state.zoom;
  const inset = z >= 6 ? Math.max(0.5, z * 0.08) : 0;

  for (const patch of cache.inRange(px0, py0, px1, py1)) {
    if (patch.status === "none") continue;
    stats.patchesDrawn += 1;

    if (patch.status === "speculative") {
      // top-left screen corner of the patch = its top row's origin
      const [sx, sy] = cellOrigin(state, width, height, patch.x * P, (patch.y + 1) * P - 1);
      hatchPatch(ctx, sx, sy, P * z);
      stats.hatchedPatches += 1;
      continue;
    }

    if (state.scentOverlay && patch.scent !== null) {
      const wx0 = Math.max(cells.x0, patch.x * P);
      const wx1 = Math.min(cells.x1, (patch.x + 1) * P - 1);
      const wy0 = Math.max(cells.y0, patch.y * P);
      const wy1 = Math.min(cells.y1, (patch.y + 1) * P - 1);
      for (let wy = wy0; wy <= wy1; wy++) {
        for (let wx = wx0; wx <= wx1; wx++) {
          const vec = cellScent(patch, P, state.scentDims, wx, wy);
          if (vec === null) continue;
          const rgb = scentToRgb(vec, state.scentGain);
          if (rgb[0] + rgb[1] + rgb[2] < 1 / 255) continue;
          const [sx, sy] = cellOrigin(state, width, height, wx, wy);
          ctx.fillStyle = rgbCss(rgb);
          ctx.fillRect(sx, sy, z, z);
          stats.scentCells += 1;
        }
      }
    } else {
      for (const [wx, wy, typeId] of patch.items) {
        if (wx < cells.x0 || wx > cells.x1 || wy < cells.y0 || wy > cells.y1) continue;
        const [sx, sy] = cellOrigin(state, width, height, wx, wy);
        ctx.fillStyle = rgbCss(palette(typeId));
        ctx.fillRect(sx + inset, sy + inset, z - 2 * inset, z - 2 * inset);
        stats.itemsDrawn += 1;
      }
    }

    for (const [wx, wy, direction] of patch.agents) {
      if (wx < cells.x0 || wx > cells.x1 || wy < cells.y0 || wy > cells.y1) continue;
      const [sx, sy] = cellOrigin(state, width, height, wx, wy);
      drawAgent(ctx, sx, sy, z, direction);
      stats.agentsDrawn += 1;
    }
  }

  const own = state.lastObservation;
  if (own !== null) {
    const [sx, sy] = cellOrigin(state, width, height, own.position[0], own.position[1]);
    ctx.strokeStyle = SELF_RING;
    ctx.lineWidth = Math.max(1, z * 0.1);
    ctx.strokeRect(sx - 1, sy - 1, z + 2, z + 2);
  }

  return stats;
}
