/**
 * View state and its reducer.
 *
 * The client is a pure function of received messages and user input:
 * `reduce` maps (state, event) to a new state plus a list of effects for
 * the connection layer to execute (sending a request, refreshing the map
 * subscription). Nothing here touches the network or the DOM, so every
 * interaction rule is unit-testable.
 */

import type { Envelope, ObservationBody } from "./protocol.js";
import { keyToAction } from "./steer.js";

export type ConnectionStatus =
  | "idle"
  | "connecting"
  | "connected"
  | "retrying"
  | "closed";

export interface ViewState {
  /* camera center in fractional world cells */
  camera: { x: number; y: number };
  /* pixels per world cell */
  zoom: number;
  followAgent: boolean;
  scentOverlay: boolean;
  scentGain: number;
  connection: ConnectionStatus;
  ownedAgent: number | null;
  /* an act was sent and its observation has not come back yet */
  pendingAction: boolean;
  lastObservation: ObservationBody | null;
  worldTime: number;
  configDigest: string | null;
  worldName: string | null;
  actionSpace: readonly string[];
  scentDims: number;
  dropped: number;
  toast: string | null;
  toastAt: number;
}

export type Effect =
  | { kind: "send"; type: string; body: Record<string, unknown> }
  | { kind: "resubscribe" };

export type ViewEvent =
  | { kind: "status"; value: ConnectionStatus }
  | { kind: "hello"; time: number; digest: string }
  | { kind: "world-matched"; name: string; actionSpace: string[]; scentDims: number }
  | { kind: "message"; env: Envelope }
  | { kind: "key"; key: string; now: number }
  | { kind: "act-rejected"; code: string; message: string; now: number }
  | { kind: "agent-added"; agentId: number; position: [number, number] }
  | { kind: "agent-lost" }
  | { kind: "pan"; dx: number; dy: number }
  | { kind: "zoom"; factor: number }
  | { kind: "toggle-follow" }
  | { kind: "toggle-scent" }
  | { kind: "gain"; value: number }
  | { kind: "toast-clear" };

export const MIN_ZOOM = 2;
export const MAX_ZOOM = 64;

export function initialState(init?: { x?: number; y?: number; zoom?: number }): ViewState {
  return {
    camera: { x: init?.x ?? 0.5, y: init?.y ?? 0.5 },
    zoom: clampZoom(init?.zoom ?? 16),
    followAgent: false,
    scentOverlay: false,
    scentGain: 20,
    connection: "idle",
    ownedAgent: null,
    pendingAction: false,
    lastObservation: null,
    worldTime: 0,
    configDigest: null,
    worldName: null,
    actionSpace: ["MoveForward", "TurnLeft", "TurnRight", "Collect", "Drop", "NoOp"],
    scentDims: 3,
    dropped: 0,
    toast: null,
    toastAt: 0,
  };
}

function clampZoom(z: number): number {
  return Math.min(MAX_ZOOM, Math.max(MIN_ZOOM, z));
}

interface Step {
  state: ViewState;
  effects: Effect[];
}

function just(state: ViewState): Step {
  return { state, effects: [] };
}

function toast(s: ViewState, text: string, now: number): ViewState {
  return { ...s, toast: text, toastAt: now };
}

function onMessage(s: ViewState, env: Envelope): Step {
  switch (env.type) {
    case "observation": {
      const body = env.body as unknown as ObservationBody;
      if (s.ownedAgent === null || body.agent_id !== s.ownedAgent) return just(s);
      const next: ViewState = {
        ...s,
        lastObservation: body,
        pendingAction: false,
        worldTime: Math.max(s.worldTime, body.time),
      };
      if (s.followAgent) {
        next.camera = { x: body.position[0] + 0.5, y: body.position[1] + 0.5 };
        return { state: next, effects: [{ kind: "resubscribe" }] };
      }
      return just(next);
    }
    case "step_done": {
      const time = env.body.time as number;
      const dropped = env.body.dropped as number;
      return just({ ...s, worldTime: Math.max(s.worldTime, time), dropped });
    }
    case "map_patches": {
      const time = env.body.time as number;
      return just({ ...s, worldTime: Math.max(s.worldTime, time) });
    }
    default:
      return just(s);
  }
}

function onKey(s: ViewState, key: string, now: number): Step {
  const kind = keyToAction(key, s.actionSpace);
  if (kind === null) return just(s);
  if (s.connection !== "connected") {
    return just(toast(s, "not connected", now));
  }
  if (s.ownedAgent === null) {
    return just(toast(s, "no agent to steer (use Add agent)", now));
  }
  if (s.pendingAction) return just(s); // one action per turn
  return {
    state: { ...s, pendingAction: true },
    effects: [
      {
        kind: "send",
        type: "act",
        body: { agent_id: s.ownedAgent, action: { kind } },
      },
    ],
  };
}

export function reduce(s: ViewState, ev: ViewEvent): Step {
  switch (ev.kind) {
    case "status": {
      const next: ViewState = { ...s, connection: ev.value };
      if (ev.value !== "connected") {
        // an in-flight act dies with the socket; a reconnect needs a new
        // session, which no longer owns the old agent
        next.pendingAction = false;
        if (ev.value === "retrying" || ev.value === "closed") next.ownedAgent = null;
      }
      return ev.value === "connected"
        ? { state: next, effects: [{ kind: "resubscribe" }] }
        : just(next);
    }
    case "hello":
      return just({
        ...s,
        configDigest: ev.digest,
        worldTime: Math.max(s.worldTime, ev.time),
      });
    case "world-matched":
      return just({
        ...s,
        worldName: ev.name,
        actionSpace: ev.actionSpace,
        scentDims: ev.scentDims,
      });
    case "message":
      return onMessage(s, ev.env);
    case "key":
      return onKey(s, ev.key, ev.now);
    case "act-rejected":
      return just(
        toast({ ...s, pendingAction: false }, `action rejected: ${ev.code} (${ev.message})`, ev.now),
      );
    case "agent-added":
      return {
        state: {
          ...s,
          ownedAgent: ev.agentId,
          followAgent: true,
          camera: { x: ev.position[0] + 0.5, y: ev.position[1] + 0.5 },
        },
        effects: [{ kind: "resubscribe" }],
      };
    case "agent-lost":
      return just({ ...s, ownedAgent: null, pendingAction: false });
    case "pan":
      return {
        state: {
          ...s,
          followAgent: false,
          camera: { x: s.camera.x + ev.dx, y: s.camera.y + ev.dy },
        },
        effects: [{ kind: "resubscribe" }],
      };
    case "zoom":
      return {
        state: { ...s, zoom: clampZoom(s.zoom * ev.factor) },
        effects: [{ kind: "resubscribe" }],
      };
    case "toggle-follow": {
      const on = !s.followAgent;
      const next: ViewState = { ...s, followAgent: on };
      if (on && s.lastObservation !== null) {
        next.camera = {
          x: s.lastObservation.position[0] + 0.5,
          y: s.lastObservation.position[1] + 0.5,
        };
      }
      return { state: next, effects: on ? [{ kind: "resubscribe" }] : [] };
    }
    case "toggle-scent":
      return {
        state: { ...s, scentOverlay: !s.scentOverlay },
        effects: [{ kind: "resubscribe" }],
      };
    case "gain":
      return just({ ...s, scentGain: Math.max(0, ev.value) });
    case "toast-clear":
      return just({ ...s, toast: null });
  }
}

/**
 * Patch rectangle covering the visible cells, for map subscriptions.
 *
 * Clamped to the server's per-query patch limit by trimming the edges
 * farthest from the camera, so extreme zoom-out never produces an
 * oversized rectangle.
 */
export function viewportPatchRect(
  s: ViewState,
  width: number,
  height: number,
  patchSize: number,
): { x0: number; y0: number; x1: number; y1: number } {
  const halfW = width / (2 * s.zoom);
  const halfH = height / (2 * s.zoom);
  let x0 = Math.floor((s.camera.x - halfW) / patchSize);
  let x1 = Math.floor((s.camera.x + halfW) / patchSize);
  let y0 = Math.floor((s.camera.y - halfH) / patchSize);
  let y1 = Math.floor((s.camera.y + halfH) / patchSize);
  const cx = Math.floor(s.camera.x / patchSize);
  const cy = Math.floor(s.camera.y / patchSize);
  // 8x8 = 64 patches, the query limit
  x0 = Math.max(x0, cx - 3);
  x1 = Math.min(x1, cx + 4);
  y0 = Math.max(y0, cy - 3);
  y1 = Math.min(y1, cy + 4);
  return { x0, y0, x1, y1 };
}
