"""Minimal web-socket transport (RFC 6455), text frames only.

Implements just what the JSON protocol needs: the HTTP upgrade
handshake, text/ping/pong/close frames, and fragmented text reassembly.
Binary frames and extensions are rejected.  Incoming payloads are capped
at 16 MiB.  One connection object may be read by one thread while
another sends; sends are serialized with a lock so control replies
(pong, close) never interleave mid-frame.
"""

from __future__ import annotations

import base64
import hashlib
import os
import socket
import struct
import threading
from typing import Optional

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
MAX_PAYLOAD = 16 * 1024 * 1024

OP_CONT = 0x0
OP_TEXT = 0x1
OP_BINARY = 0x2
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


class HandshakeError(ValueError):
    """The peer did not complete a valid upgrade handshake."""


class ProtocolViolation(RuntimeError):
    """The peer sent a frame this minimal implementation cannot accept."""


def accept_key(key: str) -> str:
    digest = hashlib.sha1((key + _GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _read_until(sock: socket.socket, marker: bytes, limit: int = 16384
                ) -> bytes:
    data = b""
    while marker not in data:
        if len(data) > limit:
            raise HandshakeError("handshake header too large")
        chunk = sock.recv(4096)
        if not chunk:
            raise HandshakeError("connection closed during handshake")
        data += chunk
    return data


def _read_exact(sock: socket.socket, n: int) -> bytes:
    parts = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        parts.append(chunk)
        remaining -= len(chunk)
    return b"".join(parts)


def server_handshake(sock: socket.socket) -> None:
    """Answer one upgrade request on a fresh connection."""
    request = _read_until(sock, b"\r\n\r\n").decode("latin-1")
    lines = request.split("\r\n")
    if not lines[0].startswith("GET "):
        raise HandshakeError("expected a GET upgrade request")
    headers = {}
    for line in lines[1:]:
        if ":" in line:
            name, _, value = line.partition(":")
            headers[name.strip().lower()] = value.strip()
    if headers.get("upgrade", "").lower() != "websocket":
        raise HandshakeError("missing Upgrade: websocket")
    key = headers.get("sec-websocket-key")
    if not key:
        raise HandshakeError("missing Sec-WebSocket-Key")
    response = ("HTTP/1.1 101 Switching Protocols\r\n"
                "Upgrade: websocket\r\n"
                "Connection: Upgrade\r\n"
                f"Sec-WebSocket-Accept: {accept_key(key)}\r\n\r\n")
    sock.sendall(response.encode("ascii"))


def client_handshake(sock: socket.socket, host: str, port: int,
                     path: str = "/") -> None:
    key = base64.b64encode(os.urandom(16)).decode("ascii")
    request = (f"GET {path} HTTP/1.1\r\n"
               f"Host: {host}:{port}\r\n"
               "Upgrade: websocket\r\n"
               "Connection: Upgrade\r\n"
               f"Sec-WebSocket-Key: {key}\r\n"
               "Sec-WebSocket-Version: 13\r\n\r\n")
    sock.sendall(request.encode("ascii"))
    response = _read_until(sock, b"\r\n\r\n").decode("latin-1")
    status = response.split("\r\n", 1)[0]
    if " 101 " not in f"{status} ":
        raise HandshakeError(f"upgrade refused: {status}")
    for line in response.split("\r\n")[1:]:
        name, _, value = line.partition(":")
        if name.strip().lower() == "sec-websocket-accept":
            if value.strip() != accept_key(key):
                raise HandshakeError("bad Sec-WebSocket-Accept")
            return
    raise HandshakeError("missing Sec-WebSocket-Accept")


def _encode_frame(opcode: int, payload: bytes, mask: bool) -> bytes:
    head = bytes([0x80 | opcode])
    n = len(payload)
    mask_bit = 0x80 if mask else 0
    if n < 126:
        head += bytes([mask_bit | n])
    elif n < 65536:
        head += bytes([mask_bit | 126]) + struct.pack(">H", n)
    else:
        head += bytes([mask_bit | 127]) + struct.pack(">Q", n)
    if mask:
        key = os.urandom(4)
        masked = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return head + key + masked
    return head + payload


class WebSocketConnection:
    """A connected, upgraded socket speaking text frames.

    `masked` selects the client role (clients must mask what they send).
    """

    def __init__(self, sock: socket.socket, masked: bool):
        self._sock = sock
        self._masked = masked
        self._send_lock = threading.Lock()
        self._sent_close = False

    def _send_frame(self, opcode: int, payload: bytes) -> None:
        frame = _encode_frame(opcode, payload, self._masked)
        with self._send_lock:
            if opcode == OP_CLOSE:
                if self._sent_close:
                    return
                self._sent_close = True
            self._sock.sendall(frame)

    def send_text(self, text: str) -> None:
        self._send_frame(OP_TEXT, text.encode("utf-8"))

    def _recv_frame(self) -> tuple[int, bytes, bool]:
        b0, b1 = _read_exact(self._sock, 2)
        fin = bool(b0 & 0x80)
        if b0 & 0x70:
            raise ProtocolViolation("reserved bits set (extensions not "
                                    "supported)")
        opcode = b0 & 0x0F
        masked = bool(b1 & 0x80)
        length = b1 & 0x7F
        if length == 126:
            length = struct.unpack(">H", _read_exact(self._sock, 2))[0]
        elif length == 127:
            length = struct.unpack(">Q", _read_exact(self._sock, 8))[0]
        if length > MAX_PAYLOAD:
            raise ProtocolViolation("frame too large")
        key = _read_exact(self._sock, 4) if masked else None
        payload = _read_exact(self._sock, length) if length else b""
        if key:
            payload = bytes(b ^ key[i % 4] for i, b in enumerate(payload))
        return opcode, payload, fin

    def recv_text(self) -> Optional[str]:
        """Next complete text message, or None once the peer closes."""
        fragments: list[bytes] = []
        while True:
            try:
                opcode, payload, fin = self._recv_frame()
            except (ConnectionError, OSError):
                return None
            if opcode == OP_PING:
                try:
                    self._send_frame(OP_PONG, payload)
                except OSError:
                    return None
                continue
            if opcode == OP_PONG:
                continue
            if opcode == OP_CLOSE:
                try:
                    self._send_frame(OP_CLOSE, b"")
                except OSError:
                    pass
                return None
            if opcode == OP_TEXT and not fragments:
                fragments.append(payload)
            elif opcode == OP_CONT and fragments:
                fragments.append(payload)
            else:
                raise ProtocolViolation(f"unexpected opcode {opcode:#x}")
            if sum(len(f) for f in fragments) > MAX_PAYLOAD:
                raise ProtocolViolation("message too large")
            if fin:
                return b"".join(fragments).decode("utf-8")
            # else keep collecting continuation frames

    def close(self) -> None:
        try:
            self._send_frame(OP_CLOSE, b"")
        except OSError:
            pass
        try:
            self._sock.close()
        except OSError:
            pass
