"""Wire protocol: one canonical-JSON frame per newline-terminated UTF-8 line.

The same frame format runs over every transport (agent stream sockets, the
operator websocket, and the in-process deterministic bus).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict

from .model import canonical_serialize, canonical_deserialize

PROTOCOL_VERSION = 1

FRAME_TYPES = (
    "HELLO", "WELCOME", "TELEMETRY", "ALERT", "MISSION_TRIGGER",
    "MISSION_STATUS", "COMMAND", "DETECTION", "CORR_REQUEST", "CORR_VERDICT",
    "EVENT", "ERROR", "BYE",
)


class FrameError(ValueError):
    pass


@dataclass
class Frame:
    type: str
    seq: int
    tick: int
    src: str
    dst: str
    payload: Dict[str, Any] = field(default_factory=dict)
    v: int = PROTOCOL_VERSION

    def __post_init__(self):
        if self.type not in FRAME_TYPES:
            raise FrameError("unknown frame type %r" % (self.type,))
        if self.v != PROTOCOL_VERSION:
            raise FrameError("unsupported protocol version %r" % (self.v,))
        if self.seq < 1:
            raise FrameError("seq starts at 1")

    def to_plain(self) -> dict:
        from .model import to_plain
        return {"v": self.v, "type": self.type, "seq": self.seq,
                "tick": self.tick, "src": self.src, "dst": self.dst,
                "payload": to_plain(self.payload)}


def encode_frame(frame: Frame) -> bytes:
    """Canonical JSON line, newline terminated."""
    return canonical_serialize(frame.to_plain()) + b"\n"


def decode_frame(line: bytes) -> Frame:
    data = canonical_deserialize(line.rstrip(b"\n"))
    if not isinstance(data, dict):
        raise FrameError("frame is not an object")
    extra = set(data) - {"v", "type", "seq", "tick", "src", "dst", "payload"}
    if extra:
        raise FrameError("unexpected frame fields %s" % sorted(extra))
    try:
        return Frame(type=data["type"], seq=data["seq"], tick=data["tick"],
                     src=data["src"], dst=data["dst"],
                     payload=data.get("payload", {}), v=data.get("v", 0))
    except KeyError as e:
        raise FrameError("missing frame field %s" % e) from None
