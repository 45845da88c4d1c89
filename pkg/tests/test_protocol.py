"""Message codec and web-socket framing units."""

import json
import socket
import threading

import pytest
from hypothesis import given, strategies as st

from forageworld.protocol import (Message, ProtocolError, decode, encode,
                                  error_message)
from forageworld import websocket as ws


# -- JSON envelope --------------------------------------------------------------

json_scalars = st.one_of(
    st.none(), st.booleans(),
    st.integers(min_value=-2**53, max_value=2**53),
    st.floats(allow_nan=False, allow_infinity=False),
    st.text(max_size=20))

json_values = st.recursive(
    json_scalars,
    lambda inner: st.one_of(
        st.lists(inner, max_size=4),
        st.dictionaries(st.text(max_size=8), inner, max_size=4)),
    max_leaves=20)

messages = st.builds(
    Message,
    type=st.sampled_from(["hello", "act", "observation", "map_patches"]),
    body=st.dictionaries(st.text(max_size=8), json_values, max_size=5),
    id=st.integers(min_value=0, max_value=2**31),
)


@given(messages)
def test_encode_decode_round_trip(message):
    assert decode(encode(message)) == message


@given(messages)
def test_encode_is_stable(message):
    assert encode(message) == encode(decode(encode(message)))


def test_unknown_envelope_fields_are_ignored():
    frame = json.dumps({"v": 1, "id": 7, "type": "hello", "body": {},
                        "trace": "abc", "hop_count": 3})
    assert decode(frame) == Message("hello", {}, id=7)


def test_missing_id_and_body_default():
    assert decode('{"v":1,"type":"step_done"}') == Message("step_done")


@pytest.mark.parametrize("frame", [
    "not json at all",
    "[1,2,3]",
    '"quoted"',
    '{"v":1,"id":1,"body":{}}',          # no type
    '{"v":1,"id":1,"type":5,"body":{}}',  # type not a string
    '{"v":"x","id":1,"type":"hello"}',   # version not an int
    '{"v":1,"id":"a","type":"hello"}',   # id not an int
    '{"v":1,"id":1,"type":"hello","body":[]}',
])
def test_malformed_frames_raise(frame):
    with pytest.raises(ProtocolError):
        decode(frame)


def test_error_message_shape():
    message = error_message(9, "not-owner", "agent 3 is someone else's")
    assert message.type == "error" and message.id == 9
    assert message.body["code"] == "not-owner"


def test_encode_orders_keys_deterministically():
    a = encode(Message("hello", {"b": 1, "a": 2}, id=1))
    b = encode(Message("hello", {"a": 2, "b": 1}, id=1))
    assert a == b
    assert a.startswith('{"body":')


# -- web-socket framing ----------------------------------------------------------


def test_accept_key_reference_vector():
    # worked example from the protocol RFC
    assert ws.accept_key("dGhlIHNhbXBsZSBub25jZQ==") == \
        "s3pPLMBiTxaQ9kYGzzhZRbK+xOo="


def ws_pair():
    a, b = socket.socketpair()
    client = ws.WebSocketConnection(a, masked=True)
    server = ws.WebSocketConnection(b, masked=False)
    return client, server


@pytest.mark.parametrize("size", [0, 5, 300, 70_000])
def test_text_frames_round_trip_every_length_class(size):
    client, server = ws_pair()
    text = "x" * size
    client.send_text(text)
    assert server.recv_text() == text
    server.send_text(text + "!")
    assert client.recv_text() == text + "!"
    client.close()


def test_unicode_payload_survives():
    client, server = ws_pair()
    client.send_text('{"k": "víz ünnep 水"}')
    assert server.recv_text() == '{"k": "víz ünnep 水"}'


def test_fragmented_text_is_reassembled():
    client, server = ws_pair()
    raw = client._sock  # craft fragments by hand
    first = bytearray(ws._encode_frame(ws.OP_TEXT, b"hel", False))
    first[0] &= 0x7F  # clear FIN
    raw.sendall(bytes(first))
    raw.sendall(ws._encode_frame(ws.OP_CONT, b"lo", False))
    assert server.recv_text() == "hello"


def test_ping_is_answered_with_pong():
    client, server = ws_pair()

    done = []

    def serve():
        done.append(server.recv_text())

    thread = threading.Thread(target=serve)
    thread.start()
    client._send_frame(ws.OP_PING, b"tick")
    client.send_text("after")
    thread.join(timeout=5)
    assert done == ["after"]
    # the pong must come back before the connection does anything else
    opcode, payload, fin = client._recv_frame()
    assert (opcode, payload, fin) == (ws.OP_PONG, b"tick", True)


def test_close_handshake_returns_none():
    client, server = ws_pair()
    client.close()
    assert server.recv_text() is None


def test_handshake_over_real_sockets():
    listener = socket.socket()
    listener.bind(("127.0.0.1", 0))
    listener.listen(1)
    port = listener.getsockname()[1]

    result = {}

    def accept():
        sock, _ = listener.accept()
        ws.server_handshake(sock)
        server = ws.WebSocketConnection(sock, masked=False)
        result["got"] = server.recv_text()
        server.send_text("pong!")

    thread = threading.Thread(target=accept)
    thread.start()
    sock = socket.create_connection(("127.0.0.1", port), timeout=5)
    ws.client_handshake(sock, "127.0.0.1", port)
    client = ws.WebSocketConnection(sock, masked=True)
    client.send_text("ping?")
    assert client.recv_text() == "pong!"
    thread.join(timeout=5)
    assert result["got"] == "ping?"
    client.close()
    listener.close()


def test_non_upgrade_request_is_rejected():
    a, b = socket.socketpair()
    a.sendall(b"GET / HTTP/1.1\r\nHost: x\r\n\r\n")
    with pytest.raises(ws.HandshakeError):
        ws.server_handshake(b)
    a.close()
    b.close()
