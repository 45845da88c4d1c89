/**
 * Client-side map cache.
 *
 * Holds exactly what `map_patches` messages delivered, keyed by patch
 * coordinate. The renderer reads only this cache, so nothing ever appears
 * on screen that the server did not send.
 */

import type { MapPatchesBody, PatchStatus } from "./protocol.js";

export interface CachedPatch {
  x: number;
  y: number;
  status: PatchStatus;
  items: [number, number, number][];
  agents: [number, number, string][];
  scent: Float64Array | null;
  /* world time of the message that delivered this patch */
  time: number;
}

export class PatchCache {
  patchSize = 0;
  time = 0;
  private patches = new Map<string, CachedPatch>();

  /** Fold one map_patches body in; stale deliveries are dropped. */
  apply(body: MapPatchesBody): void {
    this.patchSize = body.patch_size;
    if (body.time > this.time) this.time = body.time;
    for (const wire of body.patches) {
      const key = `${wire.x},${wire.y}`;
      const existing = this.patches.get(key);
      if (existing !== undefined && existing.time > body.time) continue;
      this.patches.set(key, {
        x: wire.x,
        y: wire.y,
        status: wire.status,
        items: wire.items ?? [],
        agents: wire.agents ?? [],
        scent: wire.scent ? Float64Array.from(wire.scent) : null,
        time: body.time,
      });
    }
  }

  get(px: number, py: number): CachedPatch | undefined {
    return this.patches.get(`${px},${py}`);
  }

  count(): number {
    return this.patches.size;
  }

  clear(): void {
    this.patches.clear();
    this.time = 0;
  }

  /** All cached patches with coordinates inside the inclusive rectangle. */
  *inRange(px0: number, py0: number, px1: number, py1: number): Iterable<CachedPatch> {
    for (let py = py0; py <= py1; py++) {
      for (let px = px0; px <= px1; px++) {
        const p = this.patches.get(`${px},${py}`);
        if (p !== undefined) yield p;
      }
    }
  }
}

/** Scent vector of a world cell from its patch's row-major scent block. */
export function cellScent(
  patch: CachedPatch,
  patchSize: number,
  scentDims: number,
  wx: number,
  wy: number,
): Float64Array | null {
  if (patch.scent === null) return null;
  const cx = wx - patch.x * patchSize;
  const cy = wy - patch.y * patchSize;
  const idx = (cy * patchSize + cx) * scentDims;
  return patch.scent.subarray(idx, idx + scentDims);
}
