"""Network server: many sessions, one simulator, one writer thread.

Sessions connect over newline-delimited JSON on TCP or the same JSON as
web-socket text frames.  Every simulator access — mutation or map read —
runs on a single command thread, so handlers never race and map queries
see committed turns only.  Outbound traffic goes through a bounded
per-session queue: responses and owned-agent observations always queue,
subscriber pushes are dropped oldest-first when the peer cannot keep up,
and the turn barrier is therefore never delayed by a slow reader.

Sessions own the agents they add.  When a session disconnects, its
agents keep blocking the turn for a grace period, then are removed
automatically.
"""

from __future__ import annotations

import base64
import binascii
import hashlib
import itertools
import queue as queue_mod
import socket
import threading
import time as time_mod
from collections import deque
from pathlib import Path
from typing import Any, Callable, Optional

from .persistence import PersistenceError, load_state, save_state
from .protocol import (Message, PROTOCOL_VERSION, ProtocolError, decode,
                       encode, error_message)
from .rewards import RewardSchedule, eval_reward, schedule_at
from .simulation import Action, ActionError, Simulator, SpawnError
from .websocket import (HandshakeError, ProtocolViolation,
                        WebSocketConnection, server_handshake)

MAX_LINE = 16 * 1024 * 1024
MAX_PATCHES_PER_QUERY = 64


class _RequestError(Exception):
    """Handler failure that maps onto one protocol error response."""

    def __init__(self, code: str, detail: str):
        super().__init__(detail)
        self.code = code
        self.detail = detail


class _SendQueue:
    """Bounded outbound queue; droppable entries yield to new ones.

    Responses and observations are enqueued as not droppable and always
    survive; subscriber pushes beyond the limit displace the oldest
    droppable entry (or are counted straight away when nothing can be
    displaced).  push never blocks.
    """

    def __init__(self, limit: int):
        self._items: deque[tuple[bool, str]] = deque()
        self._cond = threading.Condition()
        self._limit = limit
        self._closed = False
        self.dropped = 0

    def push(self, text: str, droppable: bool = True) -> None:
        with self._cond:
            if self._closed:
                return
            if droppable and len(self._items) >= self._limit:
                for k, (can_drop, _) in enumerate(self._items):
                    if can_drop:
                        del self._items[k]
                        self.dropped += 1
                        break
                else:
                    self.dropped += 1
                    return
            self._items.append((droppable, text))
            self._cond.notify()

    def pop(self) -> Optional[str]:
        """Next entry; None once closed and drained."""
        with self._cond:
            while not self._items and not self._closed:
                self._cond.wait()
            if self._items:
                return self._items.popleft()[1]
            return None

    def close(self) -> None:
        with self._cond:
            self._closed = True
            self._cond.notify_all()


class StreamTransport:
    """Newline-delimited UTF-8 JSON over a stream socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buffer = b""

    def recv_text(self) -> Optional[str]:
        while b"\n" not in self._buffer:
            if len(self._buffer) > MAX_LINE:
                raise ProtocolViolation("line too long")
            try:
                chunk = self._sock.recv(65536)
            except OSError:
                return None
            if not chunk:
                return None
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line.decode("utf-8")

    def send_text(self, text: str) -> None:
        self._sock.sendall(text.encode("utf-8") + b"\n")

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass


_session_ids = itertools.count(1)


class Session:
    """One connected peer: transport, owned agents, subscription."""

    def __init__(self, transport, queue_limit: int):
        self.name = f"s{next(_session_ids)}"
        self.transport = transport
        self.owned: set[int] = set()
        self.subscription: Optional[dict[str, Any]] = None
        self.queue = _SendQueue(queue_limit)
        self.closed = False

    def send(self, message: Message, droppable: bool = False) -> None:
        self.queue.push(encode(message), droppable)


class SimServer:
    """Serve one simulator over TCP and (optionally) web sockets.

    Construction binds both listeners (port 0 picks a free port; the
    bound ports are exposed as .port and .ws_port) but accepting starts
    with start().  A reward schedule, when given, adds a "reward" field
    to every observation.
    """

    def __init__(self, simulator: Simulator, host: str = "127.0.0.1",
                 port: int = 0, ws_port: Optional[int] = None,
                 schedule: Optional[RewardSchedule] = None,
                 grace_period: float = 30.0, queue_limit: int = 256):
        self.simulator = simulator
        self.schedule = schedule
        self.grace_period = grace_period
        self._queue_limit = queue_limit
        self._host = host
        self._commands: queue_mod.Queue = queue_mod.Queue()
        self._sessions: dict[str, Session] = {}
        self._owner: dict[int, Session] = {}
        self._disowned: dict[int, float] = {}
        self._shutdown = threading.Event()
        self._threads: list[threading.Thread] = []
        self._started = False

        # The accept timeout makes the accept loops poll the shutdown
        # flag; closing a listener from another thread does not wake a
        # blocked accept() on Linux.
        self._tcp_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._tcp_sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._tcp_sock.bind((host, port))
        self._tcp_sock.listen(16)
        self._tcp_sock.settimeout(0.25)
        self.port = self._tcp_sock.getsockname()[1]

        self._ws_sock = None
        self.ws_port = None
        if ws_port is not None:
            self._ws_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self._ws_sock.setsockopt(socket.SOL_SOCKET,
                                     socket.SO_REUSEADDR, 1)
            self._ws_sock.bind((host, ws_port))
            self._ws_sock.listen(16)
            self._ws_sock.settimeout(0.25)
            self.ws_port = self._ws_sock.getsockname()[1]

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> "SimServer":
        if self._started:
            return self
        self._started = True
        self._spawn(self._command_loop, "commands")
        self._spawn(self._accept_loop, "accept-tcp", self._tcp_sock, False)
        if self._ws_sock is not None:
            self._spawn(self._accept_loop, "accept-ws", self._ws_sock, True)
        self._spawn(self._reap_timer, "reaper")
        return self

    def close(self) -> None:
        if self._shutdown.is_set():
            return
        self._shutdown.set()
        self._commands.put(self._close_sessions)
        self._commands.put(None)
        for thread in self._threads:
            if thread is not threading.current_thread():
                thread.join(timeout=5.0)
        # after the accept loops have exited, so no thread can block on
        # (or race a reuse of) a closed listener descriptor
        for sock in (self._tcp_sock, self._ws_sock):
            if sock is not None:
                try:
                    sock.close()
                except OSError:
                    pass

    def __enter__(self) -> "SimServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.close()

    def run_sync(self, fn: Callable[[Simulator], Any]) -> Any:
        """Run fn(simulator) on the command thread and return its result."""
        box: dict[str, Any] = {}
        done = threading.Event()

        def command():
            try:
                box["value"] = fn(self.simulator)
            except Exception as exc:  # propagate to the caller
                box["error"] = exc
            done.set()

        self._commands.put(command)
        done.wait()
        if "error" in box:
            raise box["error"]
        return box["value"]

    def _spawn(self, fn, name, *args) -> None:
        thread = threading.Thread(target=fn, args=args,
                                  name=f"forageworld-{name}", daemon=True)
        thread.start()
        self._threads.append(thread)

    def _close_sessions(self) -> None:
        for session in list(self._sessions.values()):
            session.closed = True
            session.queue.close()
        self._sessions.clear()
        self._owner.clear()

    # -- socket plumbing ----------------------------------------------------

    def _accept_loop(self, listener: socket.socket, websocket: bool) -> None:
        while not self._shutdown.is_set():
            try:
                sock, _ = listener.accept()
            except TimeoutError:
                continue
            except OSError:
                return
            sock.settimeout(None)  # sessions block; the timeout was ours
            threading.Thread(target=self._open_session,
                             args=(sock, websocket),
                             name="forageworld-handshake",
                             daemon=True).start()

    def _open_session(self, sock: socket.socket, websocket: bool) -> None:
        try:
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            if websocket:
                server_handshake(sock)
                transport = WebSocketConnection(sock, masked=False)
            else:
                transport = StreamTransport(sock)
        except (HandshakeError, OSError):
            try:
                sock.close()
            except OSError:
                pass
            return
        session = Session(transport, self._queue_limit)
        self._commands.put(lambda: self._register(session))
        writer = threading.Thread(target=self._write_loop, args=(session,),
                                  name="forageworld-writer", daemon=True)
        writer.start()
        self._read_loop(session)

    def _register(self, session: Session) -> None:
        if self._shutdown.is_set():
            session.queue.close()
            return
        self._sessions[session.name] = session

    def _write_loop(self, session: Session) -> None:
        while True:
            text = session.queue.pop()
            if text is None:
                break
            try:
                session.transport.send_text(text)
            except OSError:
                break
        session.transport.close()

    def _read_loop(self, session: Session) -> None:
        while True:
            try:
                text = session.transport.recv_text()
            except (ProtocolViolation, UnicodeDecodeError):
                session.send(error_message(0, "bad-frame",
                                           "unreadable frame"))
                break
            if text is None:
                break
            try:
                message = decode(text)
            except ProtocolError as exc:
                session.send(error_message(0, "bad-frame", str(exc)))
                break
            self._commands.put(lambda m=message: self._dispatch(session, m))
        self._commands.put(lambda: self._disconnect(session))
        session.queue.close()

    # -- command thread -----------------------------------------------------

    def _command_loop(self) -> None:
        while True:
            command = self._commands.get()
            if command is None:
                return
            try:
                command()
            except Exception:  # a broken handler must not kill the server
                import traceback
                traceback.print_exc()

    def _disconnect(self, session: Session) -> None:
        self._sessions.pop(session.name, None)
        session.closed = True
        session.subscription = None
        if session.owned:
            deadline = time_mod.monotonic() + self.grace_period
            for agent_id in session.owned:
                if self._owner.get(agent_id) is session:
                    del self._owner[agent_id]
                    self._disowned[agent_id] = deadline
            session.owned.clear()
            if self.grace_period <= 0:
                self._reap()
        session.queue.close()

    def _reap_timer(self) -> None:
        interval = max(0.05, min(1.0, self.grace_period / 4))
        while not self._shutdown.wait(interval):
            if self._disowned:
                self._commands.put(self._reap)

    def _reap(self) -> None:
        now = time_mod.monotonic()
        due = [agent_id for agent_id, deadline in self._disowned.items()
               if deadline <= now]
        for agent_id in due:
            del self._disowned[agent_id]
            if agent_id not in self.simulator.agents:
                continue
            before = self.simulator.time
            self.simulator.remove_agent(agent_id)
            self._broadcast_after(before)

    # -- dispatch -----------------------------------------------------------

    _HANDLERS = {}  # type: dict[str, Callable]

    def _dispatch(self, session: Session, message: Message) -> None:
        if session.closed:
            return
        if message.v != PROTOCOL_VERSION:
            session.send(error_message(
                message.id, "bad-version",
                f"protocol version {message.v} is not supported"))
            return
        handler = self._HANDLERS.get(message.type)
        if handler is None:
            detail = (f"{message.type!r} is not a request type"
                      if message.type in ("observation", "step_done",
                                          "map_patches", "error")
                      else f"unknown message type {message.type!r}")
            code = ("bad-request"
                    if message.type in ("observation", "step_done",
                                        "map_patches", "error")
                    else "unknown-type")
            session.send(error_message(message.id, code, detail))
            return
        try:
            response = handler(self, session, message.id, message.body)
        except _RequestError as exc:
            session.send(error_message(message.id, exc.code, exc.detail))
            return
        if response is not _ALREADY_SENT:
            session.send(response)

    # -- request handlers ---------------------------------------------------

    def _handle_hello(self, session, request_id, body) -> Message:
        return Message("hello", {
            "version": PROTOCOL_VERSION,
            "time": self.simulator.time,
            "config": self.simulator.config.digest(),
        }, id=request_id)

    def _handle_add_agent(self, session, request_id, body) -> Message:
        position = None
        if "position" in body:
            position = tuple(_int_pair(body["position"], "position"))
        try:
            agent_id = self.simulator.add_agent(position=position)
        except SpawnError as exc:
            raise _RequestError("spawn-failed", str(exc))
        session.owned.add(agent_id)
        self._owner[agent_id] = session
        agent = self.simulator.agents[agent_id]
        return Message("add_agent", {
            "agent_id": agent_id,
            "position": list(agent.position),
            "direction": agent.direction,
            "time": self.simulator.time,
        }, id=request_id)

    def _handle_remove_agent(self, session, request_id, body) -> Message:
        agent_id = _int_field(body, "agent_id")
        if agent_id not in session.owned:
            raise _RequestError("not-owner",
                                f"agent {agent_id} is not owned by "
                                "this session")
        if agent_id not in self.simulator.agents:
            session.owned.discard(agent_id)
            raise _RequestError("unknown-agent", f"no agent {agent_id}")
        before = self.simulator.time
        self.simulator.remove_agent(agent_id)
        session.owned.discard(agent_id)
        self._owner.pop(agent_id, None)
        response = Message("remove_agent", {"agent_id": agent_id},
                           id=request_id)
        session.send(response)
        self._broadcast_after(before)
        return _ALREADY_SENT

    def _handle_act(self, session, request_id, body) -> Message:
        agent_id = _int_field(body, "agent_id")
        if agent_id not in session.owned:
            raise _RequestError("not-owner",
                                f"agent {agent_id} is not owned by "
                                "this session")
        action_body = body.get("action")
        if not isinstance(action_body, dict) \
                or not isinstance(action_body.get("kind"), str):
            raise _RequestError("bad-request",
                                "action must be {kind, item_type?}")
        item_type = action_body.get("item_type")
        if item_type is not None and not _is_int(item_type):
            raise _RequestError("bad-request", "item_type must be an integer")
        try:
            action = Action(action_body["kind"], item_type)
        except ActionError as exc:
            raise _RequestError("invalid-action", str(exc))
        agent = self.simulator.agents.get(agent_id)
        if agent is not None and agent.pending_action is not None:
            raise _RequestError("duplicate-action",
                                f"agent {agent_id} already acted this turn")
        before = self.simulator.time
        try:
            self.simulator.request_action(agent_id, action)
        except KeyError:
            raise _RequestError("unknown-agent", f"no agent {agent_id}")
        except ActionError as exc:
            raise _RequestError("invalid-action", str(exc))
        session.send(Message("act", {"queued": True, "time": before},
                             id=request_id))
        self._broadcast_after(before)
        return _ALREADY_SENT

    def _handle_get_map(self, session, request_id, body) -> Message:
        rect = _rectangle(body)
        want_scent = bool(body.get("scent", False))
        return Message("map_patches",
                       self._patches_body(rect, want_scent), id=request_id)

    def _handle_subscribe(self, session, request_id, body) -> Message:
        rect = None
        if any(k in body for k in ("x0", "y0", "x1", "y1")):
            rect = _rectangle(body)
        session.subscription = {"rect": rect,
                                "scent": bool(body.get("scent", False))}
        return Message("subscribe", {"subscribed": True}, id=request_id)

    def _handle_unsubscribe(self, session, request_id, body) -> Message:
        session.subscription = None
        return Message("unsubscribe", {"subscribed": False,
                                       "dropped": session.queue.dropped},
                       id=request_id)

    def _handle_save(self, session, request_id, body) -> Message:
        try:
            data = save_state(self.simulator)
        except ValueError as exc:
            raise _RequestError("mid-turn", str(exc))
        digest = hashlib.sha256(data).hexdigest()
        path = body.get("path")
        if path is not None:
            if not isinstance(path, str):
                raise _RequestError("bad-request", "path must be a string")
            try:
                Path(path).write_bytes(data)
            except OSError as exc:
                raise _RequestError("internal", f"cannot write save: {exc}")
            return Message("save", {"digest": digest, "bytes": len(data),
                                    "path": path}, id=request_id)
        encoded = base64.b64encode(data).decode("ascii")
        return Message("save", {"digest": digest, "data": encoded},
                       id=request_id)

    def _handle_load(self, session, request_id, body) -> Message:
        if any(a.pending_action is not None
               for a in self.simulator.agents.values()):
            raise _RequestError("mid-turn",
                                "cannot load while a turn is in progress")
        if "data" in body:
            if not isinstance(body["data"], str):
                raise _RequestError("bad-request", "data must be base64 text")
            try:
                raw = base64.b64decode(body["data"], validate=True)
            except binascii.Error as exc:
                raise _RequestError("bad-request", f"bad base64: {exc}")
        elif "path" in body:
            if not isinstance(body["path"], str):
                raise _RequestError("bad-request", "path must be a string")
            try:
                raw = Path(body["path"]).read_bytes()
            except OSError as exc:
                raise _RequestError("load-failed", str(exc))
        else:
            raise _RequestError("bad-request", "load needs data or path")
        try:
            self.simulator = load_state(raw)
        except PersistenceError as exc:
            raise _RequestError("load-failed", str(exc))
        self._disowned.clear()
        surviving = set(self.simulator.agents)
        self._owner = {}
        for other in self._sessions.values():
            other.owned &= surviving
            for agent_id in other.owned:
                self._owner[agent_id] = other
        orphans = surviving - set(self._owner)
        if orphans:
            deadline = time_mod.monotonic() + self.grace_period
            for agent_id in orphans:
                self._disowned[agent_id] = deadline
        return Message("load", {
            "time": self.simulator.time,
            "agents": sorted(self.simulator.agents),
        }, id=request_id)

    _HANDLERS = {
        "hello": _handle_hello,
        "add_agent": _handle_add_agent,
        "remove_agent": _handle_remove_agent,
        "act": _handle_act,
        "get_map": _handle_get_map,
        "subscribe": _handle_subscribe,
        "unsubscribe": _handle_unsubscribe,
        "save": _handle_save,
        "load": _handle_load,
    }

    # -- broadcasting -------------------------------------------------------

    def _broadcast_after(self, time_before: int) -> None:
        """Fan out observations and subscriber pushes if a turn committed."""
        sim = self.simulator
        if sim.time == time_before:
            return
        for transition in sim.last_transitions:
            owner = self._owner.get(transition.agent_id)
            if owner is None or owner.closed:
                continue
            observation = sim.observe(transition.agent_id)
            vision = observation.vision
            body = {
                "agent_id": transition.agent_id,
                "time": sim.time,
                "position": list(observation.position),
                "direction": observation.direction,
                "moved": transition.moved,
                "collected": [[t, n] for t, n
                              in sorted(transition.items_collected.items())],
                "vision": {"shape": list(vision.shape),
                           "data": [float(v) for v in vision.ravel()]},
                "scent": [float(v) for v in observation.scent],
            }
            if self.schedule is not None:
                expr = schedule_at(self.schedule, transition.time - 1)
                body["reward"] = eval_reward(expr, transition)
            owner.send(Message("observation", body), droppable=False)
        for session in self._sessions.values():
            sub = session.subscription
            if sub is None or session.closed:
                continue
            if sub["rect"] is not None:
                session.send(Message(
                    "map_patches",
                    self._patches_body(sub["rect"], sub["scent"])),
                    droppable=True)
            session.send(Message("step_done", {
                "time": sim.time,
                "dropped": session.queue.dropped,
            }), droppable=True)

    def _patches_body(self, rect, want_scent: bool) -> dict:
        x0, y0, x1, y1 = rect
        sim = self.simulator
        size = sim.config.patch_size
        patches = []
        for px in range(x0, x1 + 1):
            for py in range(y0, y1 + 1):
                patch = sim.world_map.patches.get((px, py))
                if patch is None:
                    patches.append({"x": px, "y": py, "status": "none"})
                    continue
                entry: dict[str, Any] = {"x": px, "y": py,
                                         "status": patch.status}
                if patch.status != "fixed":
                    patches.append(entry)
                    continue
                entry["items"] = [[item.position[0], item.position[1],
                                   item.type_id] for item in patch.items]
                entry["agents"] = [
                    [agent.position[0], agent.position[1], agent.direction]
                    for _, agent in sorted(sim.agents.items())
                    if px * size <= agent.position[0] < (px + 1) * size
                    and py * size <= agent.position[1] < (py + 1) * size]
                if want_scent:
                    cells = []
                    for cy in range(size):
                        for cx in range(size):
                            vec = sim.scent_field.query(
                                (px * size + cx, py * size + cy), sim.time)
                            cells.extend(float(v) for v in vec)
                    entry["scent"] = cells
                patches.append(entry)
        return {"time": sim.time, "patch_size": size, "patches": patches}


# Sentinel: the handler already queued its own response (used where the
# reply must precede broadcasts triggered by the same command).
_ALREADY_SENT = None


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _int_field(body, name: str) -> int:
    value = body.get(name)
    if not _is_int(value):
        raise _RequestError("bad-request", f"{name} must be an integer")
    return value


def _int_pair(value, name: str) -> tuple[int, int]:
    if not (isinstance(value, list) and len(value) == 2
            and all(_is_int(v) for v in value)):
        raise _RequestError("bad-request", f"{name} must be [x, y]")
    return value[0], value[1]


def _rectangle(body) -> tuple[int, int, int, int]:
    x0 = _int_field(body, "x0")
    y0 = _int_field(body, "y0")
    x1 = _int_field(body, "x1")
    y1 = _int_field(body, "y1")
    if x1 < x0 or y1 < y0:
        raise _RequestError("bad-request", "rectangle corners are reversed")
    count = (x1 - x0 + 1) * (y1 - y0 + 1)
    if count > MAX_PATCHES_PER_QUERY:
        raise _RequestError(
            "oversized-rectangle",
            f"{count} patches requested, limit {MAX_PATCHES_PER_QUERY}")
    return x0, y0, x1, y1
