"""Blocking protocol client for tests, tooling, and remote agents.

One socket, synchronous request/response: request() sends a message with
a fresh correlation id and reads frames until the matching response
arrives, buffering any server-initiated broadcasts (id 0) it passes on
the way.  Broadcasts are consumed with next_broadcast(), which can wait
with a timeout; returning None on timeout is how tests assert that no
step has committed yet.
"""

from __future__ import annotations

import base64
import itertools
import socket
from collections import deque
from typing import Any, Optional

from .protocol import Message, decode, encode
from .websocket import WebSocketConnection, client_handshake


class ServerError(RuntimeError):
    """An error response from the server."""

    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail


class Client:
    def __init__(self, host: str, port: int, websocket: bool = False,
                 timeout: float = 10.0):
        self._sock = socket.create_connection((host, port), timeout=timeout)
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self._timeout = timeout
        self._ws: Optional[WebSocketConnection] = None
        if websocket:
            client_handshake(self._sock, host, port)
            self._ws = WebSocketConnection(self._sock, masked=True)
        self._buffer = b""
        self._ids = itertools.count(1)
        self._broadcasts: deque[Message] = deque()

    # -- framing ------------------------------------------------------------

    def _send_text(self, text: str) -> None:
        if self._ws is not None:
            self._ws.send_text(text)
        else:
            self._sock.sendall(text.encode("utf-8") + b"\n")

    def _recv_text(self) -> str:
        if self._ws is not None:
            text = self._ws.recv_text()
            if text is None:
                raise ConnectionError("server closed the connection")
            return text
        while b"\n" not in self._buffer:
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout:
                raise TimeoutError("no frame within the socket timeout")
            if not chunk:
                raise ConnectionError("server closed the connection")
            self._buffer += chunk
        line, _, self._buffer = self._buffer.partition(b"\n")
        return line.decode("utf-8")

    def _recv_message(self) -> Message:
        return decode(self._recv_text())

    # -- core ----------------------------------------------------------------

    def request(self, kind: str, body: Optional[dict[str, Any]] = None
                ) -> Message:
        """Send one request and return its response; buffers broadcasts."""
        request_id = next(self._ids)
        self._send_text(encode(Message(kind, body or {}, id=request_id)))
        while True:
            message = self._recv_message()
            if message.id == request_id:
                if message.type == "error":
                    raise ServerError(message.body.get("code", "internal"),
                                      message.body.get("message", ""))
                return message
            if message.id == 0:
                self._broadcasts.append(message)
            # responses to other ids cannot occur on a serial connection

    def send_raw(self, text: str) -> None:
        """Ship an arbitrary frame (protocol robustness tests)."""
        self._send_text(text)

    def next_broadcast(self, kind: Optional[str] = None,
                       timeout: Optional[float] = None) -> Optional[Message]:
        """Next broadcast (optionally of one type); None when time runs out.

        With timeout None the client's connect timeout applies and running
        out raises instead, since that path means a lost message.
        """
        for k, message in enumerate(self._broadcasts):
            if kind is None or message.type == kind:
                del self._broadcasts[k]
                return message
        if timeout is not None:
            self._sock.settimeout(timeout)
        try:
            while True:
                try:
                    message = self._recv_message()
                except TimeoutError:
                    if timeout is None:
                        raise
                    return None
                if message.id != 0:
                    continue  # stray late response; drop
                if kind is None or message.type == kind:
                    return message
                self._broadcasts.append(message)
        finally:
            if timeout is not None:
                self._sock.settimeout(self._timeout)

    def close(self) -> None:
        if self._ws is not None:
            self._ws.close()
            return
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()

    def __enter__(self) -> "Client":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    # -- convenience wrappers -------------------------------------------------

    def hello(self) -> dict:
        return dict(self.request("hello").body)

    def add_agent(self, position: Optional[tuple[int, int]] = None) -> dict:
        body = {} if position is None else {"position": list(position)}
        return dict(self.request("add_agent", body).body)

    def remove_agent(self, agent_id: int) -> dict:
        return dict(self.request("remove_agent",
                                 {"agent_id": agent_id}).body)

    def act(self, agent_id: int, kind: str,
            item_type: Optional[int] = None) -> dict:
        action: dict[str, Any] = {"kind": kind}
        if item_type is not None:
            action["item_type"] = item_type
        return dict(self.request("act", {"agent_id": agent_id,
                                         "action": action}).body)

    def observation_for(self, agent_id: int,
                        timeout: Optional[float] = None) -> Optional[dict]:
        while True:
            message = self.next_broadcast("observation", timeout)
            if message is None:
                return None
            if message.body.get("agent_id") == agent_id:
                return dict(message.body)
            # other agents' observations are simply skipped

    def get_map(self, x0: int, y0: int, x1: int, y1: int,
                scent: bool = False) -> dict:
        return dict(self.request("get_map", {
            "x0": x0, "y0": y0, "x1": x1, "y1": y1, "scent": scent}).body)

    def subscribe(self, rect: Optional[tuple[int, int, int, int]] = None,
                  scent: bool = False) -> dict:
        body: dict[str, Any] = {"scent": scent}
        if rect is not None:
            body.update(x0=rect[0], y0=rect[1], x1=rect[2], y1=rect[3])
        return dict(self.request("subscribe", body).body)

    def unsubscribe(self) -> dict:
        return dict(self.request("unsubscribe").body)

    def save(self, path: Optional[str] = None) -> dict:
        body = {} if path is None else {"path": path}
        return dict(self.request("save", body).body)

    def load(self, data: Optional[bytes] = None,
             path: Optional[str] = None) -> dict:
        if data is not None:
            body: dict[str, Any] = {
                "data": base64.b64encode(data).decode("ascii")}
        elif path is not None:
            body = {"path": path}
        else:
            raise ValueError("load needs data or path")
        return dict(self.request("load", body).body)
