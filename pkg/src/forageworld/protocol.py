"""Wire protocol: versioned JSON message envelopes.

Every frame is one JSON object {"v": 1, "id": n, "type": t, "body": {...}}.
Requests carry a client-chosen correlation id (use 1 and up); the server
answers each request with exactly one message bearing the same id, and
pushes server-initiated broadcasts with id 0.  Responses reuse the request
type, except get_map which is answered by map_patches, and failures, which
are answered by type "error" with body {"code", "message"}.  Unknown
envelope fields are ignored so newer peers stay compatible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Mapping

PROTOCOL_VERSION = 1

MESSAGE_TYPES = frozenset((
    "hello", "add_agent", "remove_agent", "act",
    "observation", "step_done", "get_map", "map_patches",
    "subscribe", "unsubscribe", "save", "load", "error",
))

# error body codes used by the server
ERROR_CODES = frozenset((
    "bad-frame", "bad-version", "unknown-type", "bad-request",
    "not-owner", "unknown-agent", "duplicate-action", "invalid-action",
    "spawn-failed", "oversized-rectangle", "mid-turn", "load-failed",
    "internal",
))


class ProtocolError(ValueError):
    """A frame that does not parse into a valid message envelope."""


@dataclass(frozen=True)
class Message:
    type: str
    body: Mapping[str, Any] = field(default_factory=dict)
    id: int = 0
    v: int = PROTOCOL_VERSION


def encode(message: Message) -> str:
    """Render a message as one compact, key-sorted JSON line (no newline)."""
    payload = {"v": message.v, "id": message.id,
               "type": message.type, "body": message.body}
    return json.dumps(payload, sort_keys=True, separators=(",", ":"),
                      allow_nan=False)


def decode(text: str) -> Message:
    """Parse one frame; extra object fields are dropped, never fatal."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"frame is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ProtocolError("frame must be a JSON object")
    kind = raw.get("type")
    if not isinstance(kind, str):
        raise ProtocolError("frame has no type string")
    version = raw.get("v", PROTOCOL_VERSION)
    if not isinstance(version, int) or isinstance(version, bool):
        raise ProtocolError("frame version must be an integer")
    message_id = raw.get("id", 0)
    if not isinstance(message_id, int) or isinstance(message_id, bool):
        raise ProtocolError("frame id must be an integer")
    body = raw.get("body", {})
    if not isinstance(body, dict):
        raise ProtocolError("frame body must be an object")
    return Message(type=kind, body=body, id=message_id, v=version)


def error_message(request_id: int, code: str, detail: str) -> Message:
    return Message("error", {"code": code, "message": detail}, id=request_id)
