"""Canonical binary save files for complete simulator state.

Layout: magic, format version, then tagged sections (4-byte tag, u64
payload length, payload), then a trailing CRC-32 of everything before
it.  All integers are little-endian; all reals are IEEE-754 binary64.
Sections appear in a fixed order:

    CONF  canonical JSON of the world configuration
    TIME  simulation time and the next agent id
    MAPP  patches sorted by coordinate; items in their list order
    AGNT  agents in id order
    EVNT  live scent events in log order, then steady aggregates sorted
    RNGS  generator state

The encoding is a pure function of simulator state, so saving, loading,
and saving again yields byte-identical output, and a loaded simulator
continues exactly as the original would have.
"""

from __future__ import annotations

import hashlib
import json
import struct
import zlib
from pathlib import Path
from typing import Union

from .config import config_from_dict, config_to_dict
from .mapgen import FIXED, SPECULATIVE, Item, Patch
from .rng import Pcg32
from .simulation import ACTION_KINDS, AgentState, Simulator
from .vision import DIRECTIONS

MAGIC = b"FWSV"
FORMAT_VERSION = 1
_SECTION_ORDER = (b"CONF", b"TIME", b"MAPP", b"AGNT", b"EVNT", b"RNGS")


class PersistenceError(ValueError):
    """Raised for unreadable, corrupt, or incompatible save data."""


def _pack_section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, fmt: str):
        try:
            values = struct.unpack_from(fmt, self.data, self.pos)
        except struct.error as exc:
            raise PersistenceError(f"truncated save data: {exc}") from None
        self.pos += struct.calcsize(fmt)
        return values

    def take_bytes(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise PersistenceError("truncated save data")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out


def save_state(sim: Simulator) -> bytes:
    if any(a.pending_action is not None for a in sim.agents.values()):
        raise ValueError("cannot save while a turn is in progress")
    dims = sim.config.scent_dims
    out = [MAGIC, struct.pack("<I", FORMAT_VERSION)]

    config_json = json.dumps(config_to_dict(sim.config), sort_keys=True,
                             separators=(",", ":")).encode()
    out.append(_pack_section(b"CONF", config_json))
    out.append(_pack_section(b"TIME", struct.pack(
        "<QQ", sim.time, sim._next_agent_id)))

    parts = [struct.pack("<I", len(sim.world_map.patches))]
    for coord in sorted(sim.world_map.patches):
        patch = sim.world_map.patches[coord]
        parts.append(struct.pack("<qqBI", coord[0], coord[1],
                                 1 if patch.status == FIXED else 0,
                                 len(patch.items)))
        for item in patch.items:
            parts.append(struct.pack("<qqIQ", item.position[0],
                                     item.position[1], item.type_id,
                                     item.created_at))
    out.append(_pack_section(b"MAPP", b"".join(parts)))

    parts = [struct.pack("<I", len(sim.agents))]
    for agent_id in sorted(sim.agents):
        a = sim.agents[agent_id]
        parts.append(struct.pack("<QqqBId", agent_id, a.position[0],
                                 a.position[1], DIRECTIONS.index(a.direction),
                                 a.visual_range, a.field_of_view))
        parts.append(struct.pack(f"<{len(a.color)}d", *a.color))
        parts.append(struct.pack(f"<{dims}d", *a.scent))
        parts.append(struct.pack("<I", len(a.action_space)))
        parts.append(bytes(ACTION_KINDS.index(k) for k in a.action_space))
        inventory = sorted((t, n) for t, n in a.inventory.items() if n > 0)
        parts.append(struct.pack("<I", len(inventory)))
        for type_id, count in inventory:
            parts.append(struct.pack("<IQ", type_id, count))
        parts.append(struct.pack("<qqdB", a.spawn[0], a.spawn[1],
                                 a.distance_max, int(a.last_moved)))
    out.append(_pack_section(b"AGNT", b"".join(parts)))

    events = sim.scent_field.events()
    steady = sim.scent_field.steady_entries()
    parts = [struct.pack("<I", len(events))]
    for ev in events:
        parts.append(struct.pack("<Qqqb", ev.time, ev.position[0],
                                 ev.position[1], ev.sign))
        parts.append(struct.pack(f"<{dims}d", *ev.scent))
    parts.append(struct.pack("<I", len(steady)))
    for pos, vec in steady:
        parts.append(struct.pack("<qq", pos[0], pos[1]))
        parts.append(struct.pack(f"<{dims}d", *vec))
    out.append(_pack_section(b"EVNT", b"".join(parts)))

    state, inc = sim.rng.getstate()
    out.append(_pack_section(b"RNGS", struct.pack("<QQ", state, inc)))

    body = b"".join(out)
    return body + struct.pack("<I", zlib.crc32(body))


def load_state(data: bytes) -> Simulator:
    if len(data) < len(MAGIC) + 8:
        raise PersistenceError("truncated save data")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise PersistenceError("checksum mismatch")
    if body[:4] != MAGIC:
        raise PersistenceError("not a save file")
    reader = _Reader(body)
    reader.take_bytes(4)
    (version,) = reader.take("<I")
    if version != FORMAT_VERSION:
        raise PersistenceError(f"unsupported save format version {version}")

    sections = {}
    for tag in _SECTION_ORDER:
        found = reader.take_bytes(4)
        if found != tag:
            raise PersistenceError(f"expected section {tag!r}, found "
                                   f"{found!r}")
        (length,) = reader.take("<Q")
        sections[tag] = _Reader(reader.take_bytes(length))

    config = config_from_dict(json.loads(sections[b"CONF"].data.decode()))
    dims = config.scent_dims
    time, next_agent_id = sections[b"TIME"].take("<QQ")

    sim = Simulator(config, rng=Pcg32())
    sim.time = time
    sim._next_agent_id = next_agent_id

    r = sections[b"MAPP"]
    (n_patches,) = r.take("<I")
    for _ in range(n_patches):
        px, py, fixed, n_items = r.take("<qqBI")
        items = []
        for _ in range(n_items):
            x, y, type_id, created_at = r.take("<qqIQ")
            items.append(Item((x, y), type_id, created_at))
        patch = Patch((px, py), FIXED if fixed else SPECULATIVE, items)
        sim.world_map.patches[(px, py)] = patch
        if fixed:
            for item in items:
                sim.world_map.occupancy[item.position] = item

    r = sections[b"AGNT"]
    (n_agents,) = r.take("<I")
    for _ in range(n_agents):
        agent_id, x, y, dir_code, visual_range, fov = r.take("<QqqBId")
        color = r.take(f"<{config.color_dims}d")
        scent = r.take(f"<{dims}d")
        (n_actions,) = r.take("<I")
        action_space = tuple(ACTION_KINDS[c]
                             for c in r.take_bytes(n_actions))
        (n_inv,) = r.take("<I")
        inventory = {}
        for _ in range(n_inv):
            type_id, count = r.take("<IQ")
            inventory[type_id] = count
        sx, sy, distance_max, last_moved = r.take("<qqdB")
        agent = AgentState(
            agent_id=agent_id, position=(x, y),
            direction=DIRECTIONS[dir_code], visual_range=visual_range,
            field_of_view=fov, color=color, scent=scent,
            action_space=action_space, spawn=(sx, sy), inventory=inventory,
            distance_max=distance_max, last_moved=bool(last_moved))
        sim.agents[agent_id] = agent
        sim._agents_at.setdefault((x, y), set()).add(agent_id)

    r = sections[b"EVNT"]
    (n_events,) = r.take("<I")
    for _ in range(n_events):
        ev_time, x, y, sign = r.take("<Qqqb")
        scent = r.take(f"<{dims}d")
        sim.scent_field.add_event(ev_time, (x, y), sign, scent)
    (n_steady,) = r.take("<I")
    steady = []
    for _ in range(n_steady):
        x, y = r.take("<qq")
        steady.append(((x, y), r.take(f"<{dims}d")))
    sim.scent_field.restore_steady(steady)

    state, inc = sections[b"RNGS"].take("<QQ")
    sim.rng.setstate((state, inc))
    return sim


def save_file(sim: Simulator, path: Union[str, Path]) -> None:
    Path(path).write_bytes(save_state(sim))


def load_file(path: Union[str, Path]) -> Simulator:
    return load_state(Path(path).read_bytes())


def state_digest(sim: Simulator) -> str:
    """Hex digest identifying the complete simulator state."""
    return hashlib.sha256(save_state(sim)).hexdigest()
