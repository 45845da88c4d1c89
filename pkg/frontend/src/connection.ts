/**
 * WebSocket client: request/response correlation, push dispatch, and
 * reconnection with exponential backoff.
 *
 * The socket construction is injectable so tests can supply the `ws`
 * package or a scripted fake; the browser default is the global
 * WebSocket.
 */

import {
  Envelope,
  PROTOCOL_VERSION,
  ProtocolError,
  RequestError,
  parseIncoming,
  validateOutgoing,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ConnectionCallbacks {
  onStatus(status: "connecting" | "connected" | "retrying" | "closed"): void;
  onPush(env: Envelope): void;
}

export interface ConnectionOptions {
  factory?: SocketFactory;
  backoffBaseMs?: number;
  backoffCapMs?: number;
  /* injectable timer for deterministic tests */
  schedule?: (fn: () => void, ms: number) => unknown;
}

function defaultFactory(url: string): SocketLike {
  const ws = globalThis.WebSocket;
  if (ws === undefined) throw new Error("no WebSocket implementation available");
  return new ws(url) as unknown as SocketLike;
}

interface Pending {
  resolve(env: Envelope): void;
  reject(err: Error): void;
}

export class Connection {
  private socket: SocketLike | null = null;
  private nextId = 1;
  private pending = new Map<number, Pending>();
  private attempts = 0;
  private closedByUser = false;
  private open = false;
  private readonly factory: SocketFactory;
  private readonly backoffBaseMs: number;
  private readonly backoffCapMs: number;
  private readonly schedule: (fn: () => void, ms: number) => unknown;

  constructor(
    public readonly url: string,
    private readonly cb: ConnectionCallbacks,
    opts: ConnectionOptions = {},
  ) {
    this.factory = opts.factory ?? defaultFactory;
    this.backoffBaseMs = opts.backoffBaseMs ?? 500;
    this.backoffCapMs = opts.backoffCapMs ?? 10_000;
    this.schedule = opts.schedule ?? ((fn, ms) => setTimeout(fn, ms));
  }

  get isOpen(): boolean {
    return this.open;
  }

  connect(): void {
    if (this.closedByUser) return;
    this.cb.onStatus(this.attempts === 0 ? "connecting" : "retrying");
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch (err) {
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.open = true;
      this.attempts = 0;
      this.cb.onStatus("connected");
    };
    socket.onmessage = (ev) => {
      const text = typeof ev.data === "string" ? ev.data : String(ev.data);
      let env: Envelope;
      try {
        env = parseIncoming(text);
      } catch {
        return; // unparseable frame: ignore, the server is authoritative
      }
      this.dispatch(env);
    };
    socket.onerror = () => {
      /* the close handler does the bookkeeping */
    };
    socket.onclose = () => {
      const wasOpen = this.open;
      this.open = false;
      this.socket = null;
      this.failAllPending(new Error("connection closed"));
      if (this.closedByUser) {
        this.cb.onStatus("closed");
        return;
      }
      if (wasOpen) this.attempts = 0;
      this.scheduleReconnect();
    };
  }

  private dispatch(env: Envelope): void {
    if (env.id === 0) {
      this.cb.onPush(env);
      return;
    }
    const waiter = this.pending.get(env.id);
    if (waiter === undefined) return;
    this.pending.delete(env.id);
    if (env.type === "error") {
      const code = (env.body.code as string) ?? "internal";
      const message = (env.body.message as string) ?? "";
      waiter.reject(new RequestError(code, message));
    } else {
      waiter.resolve(env);
    }
  }

  private failAllPending(err: Error): void {
    const waiting = Array.from(this.pending.values());
    this.pending.clear();
    for (const w of waiting) w.reject(err);
  }

  private scheduleReconnect(): void {
    this.cb.onStatus("retrying");
    const delay = Math.min(this.backoffCapMs, this.backoffBaseMs * 2 ** this.attempts);
    this.attempts += 1;
    this.schedule(() => this.connect(), delay);
  }

  /**
   * Send one request and resolve with its response envelope.
   *
   * The frame is validated against protocol v1 before anything is sent;
   * invalid frames throw ProtocolError locally. Error responses reject
   * with RequestError carrying the server's error code.
   */
  request(type: string, body: Record<string, unknown> = {}): Promise<Envelope> {
    const env: Envelope = { v: PROTOCOL_VERSION, id: this.nextId++, type, body };
    const problem = validateOutgoing(env);
    if (problem !== null) {
      return Promise.reject(new ProtocolError(`invalid ${type} request: ${problem}`));
    }
    if (!this.open || this.socket === null) {
      return Promise.reject(new Error("not connected"));
    }
    const socket = this.socket;
    return new Promise((resolve, reject) => {
      this.pending.set(env.id, { resolve, reject });
      try {
        socket.send(JSON.stringify(env));
      } catch (err) {
        this.pending.delete(env.id);
        reject(err instanceof Error ? err : new Error(String(err)));
      }
    });
  }

  close(): void {
    this.closedByUser = true;
    this.failAllPending(new Error("connection closed"));
    if (this.socket !== null) {
      this.socket.close();
    } else {
      this.cb.onStatus("closed");
    }
  }
}
