/**
 * Browser entry point: wires the connection, reducer, cache, and renderer
 * to the DOM. All simulation-facing logic lives in the imported modules;
 * this file only translates DOM events to view events and view state to
 * screen.
 */

import { Connection } from "./connection.js";
import type { Envelope, MapPatchesBody, ObservationBody } from "./protocol.js";
import { RequestError } from "./protocol.js";
import { PatchCache } from "./patches.js";
import {
  initialState,
  reduce,
  viewportPatchRect,
  type Effect,
  type ViewEvent,
  type ViewState,
} from "./viewstate.js";
import { matchWorldByDigest, type WorldDoc } from "./worlds.js";
import { fallbackColor, paletteFor, type Rgb } from "./colors.js";
import { render, type Ctx2D } from "./render.js";
import { renderVision, scentReadout } from "./minivision.js";
import { KEY_ACTIONS } from "./steer.js";

const params = new URLSearchParams(location.search);
const serverUrl =
  params.get("server") ?? `ws://${location.hostname || "localhost"}:9467`;

const canvas = document.getElementById("world") as HTMLCanvasElement;
const mini = document.getElementById("mini") as HTMLCanvasElement;
const banner = document.getElementById("banner")!;
const toastEl = document.getElementById("toast")!;
const timeEl = document.getElementById("time")!;
const droppedEl = document.getElementById("dropped")!;
const worldEl = document.getElementById("world-name")!;
const scentEl = document.getElementById("scent-readout")!;
const followBox = document.getElementById("follow") as HTMLInputElement;
const overlayBox = document.getElementById("overlay") as HTMLInputElement;
const gainSlider = document.getElementById("gain") as HTMLInputElement;
const addButton = document.getElementById("add-agent") as HTMLButtonElement;

const cache = new PatchCache();
let state: ViewState = initialState({
  x: Number(params.get("x") ?? "0.5"),
  y: Number(params.get("y") ?? "0.5"),
  zoom: Number(params.get("zoom") ?? "16"),
});
let worldDocMatched: WorldDoc | null = null;
let palette: (t: number) => Rgb = fallbackColor;
let dirty = true;

function patchSize(): number {
  return worldDocMatched?.patchSize ?? (cache.patchSize > 0 ? cache.patchSize : 0);
}

let resubscribeTimer: number | undefined;

function runEffect(eff: Effect): void {
  if (eff.kind === "send") {
    conn.request(eff.type, eff.body).catch((err) => {
      const code = err instanceof RequestError ? err.code : "offline";
      dispatch({
        kind: "act-rejected",
        code,
        message: err instanceof Error ? err.message : String(err),
        now: performance.now(),
      });
    });
    return;
  }
  // resubscribe, debounced: pan and zoom arrive in bursts
  clearTimeout(resubscribeTimer);
  resubscribeTimer = setTimeout(refreshSubscription, 150) as unknown as number;
}

async function refreshSubscription(): Promise<void> {
  if (!conn.isOpen) return;
  let size = patchSize();
  try {
    if (size === 0) {
      // patch size is unknown until some map data arrives; probe one patch
      const probe = await conn.request("get_map", { x0: 0, y0: 0, x1: 0, y1: 0 });
      cache.apply(probe.body as unknown as MapPatchesBody);
      size = cache.patchSize;
      dirty = true;
    }
    const rect = viewportPatchRect(state, canvas.width, canvas.height, size);
    const resp = await conn.request("subscribe", {
      ...rect,
      scent: state.scentOverlay,
    });
    void resp;
    const seed = await conn.request("get_map", { ...rect, scent: state.scentOverlay });
    cache.apply(seed.body as unknown as MapPatchesBody);
    dirty = true;
  } catch {
    /* disconnected mid-refresh; the reconnect path resubscribes */
  }
}

function dispatch(ev: ViewEvent): void {
  const out = reduce(state, ev);
  state = out.state;
  dirty = true;
  for (const eff of out.effects) runEffect(eff);
}

const conn = new Connection(serverUrl, {
  onStatus(status) {
    dispatch({ kind: "status", value: status });
    if (status === "connected") void handshake();
  },
  onPush(env: Envelope) {
    if (env.type === "map_patches") {
      cache.apply(env.body as unknown as MapPatchesBody);
    }
    dispatch({ kind: "message", env });
  },
});

async function handshake(): Promise<void> {
  try {
    const hello = await conn.request("hello");
    const digest = hello.body.config as string;
    dispatch({ kind: "hello", time: hello.body.time as number, digest });
    const doc = await matchWorldByDigest(digest);
    if (doc !== null) {
      worldDocMatched = doc;
      palette = paletteFor(doc);
      dispatch({
        kind: "world-matched",
        name: doc.name,
        actionSpace: doc.actionSpace,
        scentDims: doc.scentDims,
      });
    }
  } catch {
    /* connection dropped during handshake; retry path handles it */
  }
}

addButton.addEventListener("click", () => {
  conn
    .request("add_agent", {})
    .then((resp) => {
      dispatch({
        kind: "agent-added",
        agentId: resp.body.agent_id as number,
        position: resp.body.position as [number, number],
      });
    })
    .catch((err) => {
      const code = err instanceof RequestError ? err.code : "offline";
      dispatch({
        kind: "act-rejected",
        code,
        message: err instanceof Error ? err.message : String(err),
        now: performance.now(),
      });
    });
});

window.addEventListener("keydown", (ev) => {
  if (!(ev.key in KEY_ACTIONS)) return;
  ev.preventDefault();
  dispatch({ kind: "key", key: ev.key, now: performance.now() });
});

let dragging = false;
let lastX = 0;
let lastY = 0;
canvas.addEventListener("mousedown", (ev) => {
  dragging = true;
  lastX = ev.clientX;
  lastY = ev.clientY;
});
window.addEventListener("mouseup", () => {
  dragging = false;
});
window.addEventListener("mousemove", (ev) => {
  if (!dragging) return;
  const dx = -(ev.clientX - lastX) / state.zoom;
  const dy = (ev.clientY - lastY) / state.zoom;
  lastX = ev.clientX;
  lastY = ev.clientY;
  dispatch({ kind: "pan", dx, dy });
});
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  dispatch({ kind: "zoom", factor: ev.deltaY < 0 ? 1.2 : 1 / 1.2 });
});

followBox.addEventListener("change", () => {
  if (followBox.checked !== state.followAgent) dispatch({ kind: "toggle-follow" });
});
overlayBox.addEventListener("change", () => {
  if (overlayBox.checked !== state.scentOverlay) dispatch({ kind: "toggle-scent" });
});
gainSlider.addEventListener("input", () => {
  dispatch({ kind: "gain", value: Number(gainSlider.value) });
});

function resize(): void {
  canvas.width = canvas.clientWidth;
  canvas.height = canvas.clientHeight;
  dirty = true;
}
window.addEventListener("resize", resize);

const STATUS_TEXT: Record<string, string> = {
  idle: "idle",
  connecting: `connecting to ${serverUrl}…`,
  connected: `connected to ${serverUrl}`,
  retrying: `connection lost, retrying ${serverUrl}…`,
  closed: "closed",
};

function frame(): void {
  if (state.toast !== null && performance.now() - state.toastAt > 4000) {
    dispatch({ kind: "toast-clear" });
  }
  if (dirty) {
    dirty = false;
    const ctx = canvas.getContext("2d") as unknown as Ctx2D;
    render(ctx, { state, cache, palette, width: canvas.width, height: canvas.height });

    banner.textContent = STATUS_TEXT[state.connection] ?? state.connection;
    banner.className = `banner ${state.connection}`;
    timeEl.textContent = `t=${state.worldTime}`;
    droppedEl.textContent = state.dropped > 0 ? `dropped ${state.dropped}` : "";
    worldEl.textContent = state.worldName ?? "unknown world";
    followBox.checked = state.followAgent;
    overlayBox.checked = state.scentOverlay;
    toastEl.textContent = state.toast ?? "";
    toastEl.style.display = state.toast === null ? "none" : "block";

    const obs = state.lastObservation;
    if (obs !== null) {
      const cells = obs.vision.shape[0];
      const px = Math.max(2, Math.floor(mini.width / cells));
      const mctx = mini.getContext("2d") as unknown as Ctx2D;
      mctx.fillStyle = "#000";
      mctx.fillRect(0, 0, mini.width, mini.height);
      renderVision(mctx, obs, px);
      scentEl.textContent =
        scentReadout(obs.scent) +
        (state.pendingAction ? "  |  action pending…" : "") +
        (obs.reward !== undefined ? `  |  reward ${obs.reward}` : "");
    }
  }
  requestAnimationFrame(frame);
}

resize();
conn.connect();
requestAnimationFrame(frame);
