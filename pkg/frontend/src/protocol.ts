/**
 * Wire protocol v1: newline- or frame-delimited JSON envelopes.
 *
 * Every frame is {v, id, type, body}. Client requests use ids 1 and up and
 * are answered with the same id; server pushes carry id 0. Unknown fields
 * are ignored on both sides.
 */

export const PROTOCOL_VERSION = 1;

export type Direction = "N" | "E" | "S" | "W";
export const DIRECTIONS: readonly Direction[] = ["N", "E", "S", "W"];

export const ACTION_KINDS = [
  "MoveForward",
  "TurnLeft",
  "TurnRight",
  "Collect",
  "Drop",
  "NoOp",
] as const;
export type ActionKind = (typeof ACTION_KINDS)[number];

export const REQUEST_TYPES = new Set([
  "hello",
  "add_agent",
  "remove_agent",
  "act",
  "subscribe",
  "unsubscribe",
  "get_map",
  "save",
  "load",
]);

/* The server rejects map rectangles that cover more patches than this. */
export const MAX_PATCHES_PER_QUERY = 64;

export interface Envelope {
  v: number;
  id: number;
  type: string;
  body: Record<string, unknown>;
}

export interface Action {
  kind: ActionKind;
  item_type?: number;
}

export type PatchStatus = "fixed" | "speculative" | "none";

/* items: [x, y, item_type_id]; agents: [x, y, direction]. */
export interface MapPatchWire {
  x: number;
  y: number;
  status: PatchStatus;
  items?: [number, number, number][];
  agents?: [number, number, string][];
  scent?: number[];
}

export interface MapPatchesBody {
  time: number;
  patch_size: number;
  patches: MapPatchWire[];
}

export interface ObservationBody {
  agent_id: number;
  time: number;
  position: [number, number];
  direction: Direction;
  moved: boolean;
  collected: [number, number][];
  vision: { shape: [number, number, number]; data: number[] };
  scent: number[];
  reward?: number;
}

export interface StepDoneBody {
  time: number;
  dropped: number;
}

export interface HelloBody {
  version: number;
  time: number;
  config: string;
}

export interface ErrorBody {
  code: string;
  message: string;
}

export class ProtocolError extends Error {
  constructor(message: string, public code: string = "bad-frame") {
    super(message);
    this.name = "ProtocolError";
  }
}

/** Error response to a request, carrying the server's error code. */
export class RequestError extends Error {
  constructor(public code: string, message: string) {
    super(`${code}: ${message}`);
    this.name = "RequestError";
  }
}

function isPlainObject(v: unknown): v is Record<string, unknown> {
  return typeof v === "object" && v !== null && !Array.isArray(v);
}

function isInt(v: unknown): v is number {
  return typeof v === "number" && Number.isInteger(v);
}

function checkRectangle(body: Record<string, unknown>): string | null {
  for (const k of ["x0", "y0", "x1", "y1"]) {
    if (!isInt(body[k])) return `${k} must be an integer`;
  }
  const x0 = body.x0 as number, y0 = body.y0 as number;
  const x1 = body.x1 as number, y1 = body.y1 as number;
  if (x1 < x0 || y1 < y0) return "rectangle corners must be ordered";
  const patches = (x1 - x0 + 1) * (y1 - y0 + 1);
  if (patches > MAX_PATCHES_PER_QUERY) {
    return `rectangle covers ${patches} patches (limit ${MAX_PATCHES_PER_QUERY})`;
  }
  if ("scent" in body && typeof body.scent !== "boolean") {
    return "scent must be a boolean";
  }
  return null;
}

function checkAction(body: Record<string, unknown>): string | null {
  if (!isInt(body.agent_id) || (body.agent_id as number) < 0) {
    return "agent_id must be a non-negative integer";
  }
  if (!isPlainObject(body.action)) return "action must be an object";
  const action = body.action;
  const kind = action.kind;
  if (typeof kind !== "string" || !(ACTION_KINDS as readonly string[]).includes(kind)) {
    return `unknown action kind ${JSON.stringify(kind)}`;
  }
  if (kind === "Drop" && (!isInt(action.item_type) || (action.item_type as number) < 0)) {
    return "Drop needs a non-negative integer item_type";
  }
  return null;
}

/**
 * Validate a request envelope before it leaves the client.
 *
 * Returns null when the frame is a well-formed protocol v1 request, or a
 * human-readable reason. Only violations are reported; unknown extra
 * fields are legal.
 */
export function validateOutgoing(env: Envelope): string | null {
  if (env.v !== PROTOCOL_VERSION) return `v must be ${PROTOCOL_VERSION}`;
  if (!isInt(env.id) || env.id < 1) return "id must be a positive integer";
  if (!REQUEST_TYPES.has(env.type)) return `${env.type} is not a request type`;
  if (!isPlainObject(env.body)) return "body must be an object";
  const body = env.body;
  switch (env.type) {
    case "act":
      return checkAction(body);
    case "get_map":
      return checkRectangle(body);
    case "subscribe":
      if ("x0" in body || "y0" in body || "x1" in body || "y1" in body) {
        return checkRectangle(body);
      }
      return null;
    case "remove_agent":
      if (!isInt(body.agent_id) || (body.agent_id as number) < 0) {
        return "agent_id must be a non-negative integer";
      }
      return null;
    case "add_agent":
      if ("position" in body) {
        const p = body.position;
        if (!Array.isArray(p) || p.length !== 2 || !isInt(p[0]) || !isInt(p[1])) {
          return "position must be [x, y] integers";
        }
      }
      return null;
    case "save":
      if ("path" in body && typeof body.path !== "string") {
        return "path must be a string";
      }
      return null;
    case "load": {
      const hasData = typeof body.data === "string";
      const hasPath = typeof body.path === "string";
      if (hasData === hasPath) return "load needs exactly one of data or path";
      return null;
    }
    default:
      return null; // hello, unsubscribe: empty bodies
  }
}

/** Parse one incoming frame; throws ProtocolError on malformed input. */
export function parseIncoming(text: string): Envelope {
  let raw: unknown;
  try {
    raw = JSON.parse(text);
  } catch {
    throw new ProtocolError("frame is not JSON");
  }
  if (!isPlainObject(raw)) throw new ProtocolError("frame is not an object");
  if (raw.v !== PROTOCOL_VERSION) {
    throw new ProtocolError(`unsupported protocol version ${raw.v}`, "bad-version");
  }
  if (!isInt(raw.id) || (raw.id as number) < 0) {
    throw new ProtocolError("id must be a non-negative integer");
  }
  if (typeof raw.type !== "string") throw new ProtocolError("type must be a string");
  const body = isPlainObject(raw.body) ? raw.body : {};
  return { v: 1, id: raw.id as number, type: raw.type, body };
}
