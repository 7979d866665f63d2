"""Bit-exact 49-byte frame codec with fragmentation.

Layout (big-endian integers)::

    preamble  src(2) dst(2) length(1) packet_id(1) crc(1) control(1)
    header    msg_type(1) session_id(2) seq(2) frag_index(1) frag_total(1) dims_hint(2)
    payload   32 bytes, zero-padded

``length`` is the number of meaningful payload bytes. ``crc`` is the XOR of
the other 48 bytes. Bit 0 of ``control`` marks the last fragment.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from functools import reduce
from operator import xor

from ..errors import FrameError

PREAMBLE_BYTES = 8
HEADER_BYTES = 9
PAYLOAD_BYTES = 32
FRAME_BYTES = PREAMBLE_BYTES + HEADER_BYTES + PAYLOAD_BYTES
MAX_FRAGMENTS = 255
MAX_MESSAGE_BYTES = MAX_FRAGMENTS * PAYLOAD_BYTES
CRC_OFFSET = 6
CTRL_LAST = 0x01

_PREAMBLE = struct.Struct(">HHBBBB")
_HEADER = struct.Struct(">BHHBBBB")


class MsgType(enum.IntEnum):
    HS_MSG1 = 1
    HS_MSG2 = 2
    HS_MSG3 = 3
    DATA = 4
    KD_REQUEST = 5
    KD_RESPONSE = 6


@dataclass(frozen=True)
class Frame:
    src: int
    dst: int
    length: int
    packet_id: int
    control: int
    msg_type: int
    session_id: int
    seq: int
    frag_index: int
    frag_total: int
    dims_hint: tuple[int, int]
    payload: bytes
    crc: int = 0

    def __post_init__(self):
        if len(self.payload) != PAYLOAD_BYTES:
            raise FrameError(f"payload must be {PAYLOAD_BYTES} bytes")
        if not 0 <= self.length <= PAYLOAD_BYTES:
            raise FrameError(f"length {self.length} out of range")
        if not 0 <= self.frag_index < self.frag_total:
            raise FrameError(f"fragment {self.frag_index} of {self.frag_total}")

    def _body(self, crc: int) -> bytes:
        return (
            _PREAMBLE.pack(self.src, self.dst, self.length, self.packet_id, crc, self.control)
            + _HEADER.pack(self.msg_type, self.session_id, self.seq, self.frag_index,
                           self.frag_total, *self.dims_hint)
            + self.payload
        )

    def encode(self) -> bytes:
        raw = self._body(0)
        return self._body(reduce(xor, raw, 0))

    @property
    def data(self) -> bytes:
        return self.payload[:self.length]


def checksum_ok(raw: bytes) -> bool:
    # XOR over all 49 bytes is zero exactly when the stored crc matches
    return len(raw) == FRAME_BYTES and reduce(xor, raw, 0) == 0


def decode(raw: bytes) -> Frame:
    if len(raw) != FRAME_BYTES:
        raise FrameError(f"frame is {len(raw)} bytes, expected {FRAME_BYTES}")
    if not checksum_ok(raw):
        raise FrameError("CRC mismatch")
    src, dst, length, packet_id, crc, control = _PREAMBLE.unpack_from(raw, 0)
    msg_type, session_id, seq, idx, total, d0, d1 = _HEADER.unpack_from(raw, PREAMBLE_BYTES)
    payload = raw[PREAMBLE_BYTES + HEADER_BYTES:]
    if any(payload[length:]):
        raise FrameError("nonzero padding")
    return Frame(src, dst, length, packet_id, control, msg_type, session_id, seq,
                 idx, total, (d0, d1), payload, crc)


def frame_count(nbytes: int) -> int:
    """Frames needed for a message; an empty message still takes one frame."""
    return max(1, -(-nbytes // PAYLOAD_BYTES))


def fragment(
    message: bytes,
    *,
    src: int = 0,
    dst: int = 0,
    msg_type: int = 0,
    session_id: int = 0,
    seq: int = 0,
    dims_hint: tuple[int, int] = (0, 0),
    packet_id: int = 0,
) -> list[Frame]:
    """Split ``message`` into frames; packet ids count up from ``packet_id`` mod 256."""
    if len(message) > MAX_MESSAGE_BYTES:
        raise FrameError(f"{len(message)}-byte message exceeds {MAX_MESSAGE_BYTES}")
    total = frame_count(len(message))
    frames = []
    for i in range(total):
        chunk = message[i * PAYLOAD_BYTES:(i + 1) * PAYLOAD_BYTES]
        frames.append(Frame(
            src=src, dst=dst, length=len(chunk), packet_id=(packet_id + i) % 256,
            control=CTRL_LAST if i == total - 1 else 0,
            msg_type=msg_type, session_id=session_id, seq=seq,
            frag_index=i, frag_total=total, dims_hint=dims_hint,
            payload=chunk.ljust(PAYLOAD_BYTES, b"\x00"),
        ))
    return [decode(f.encode()) for f in frames]


def reassemble(frames: list[Frame] | list[bytes]) -> bytes:
    """Inverse of ``fragment``; accepts decoded frames or raw 49-byte frames."""
    decoded = [decode(f) if isinstance(f, (bytes, bytearray)) else f for f in frames]
    if not decoded:
        raise FrameError("no frames")
    for f in decoded:
        if f.encode()[CRC_OFFSET] != f.crc:
            raise FrameError("CRC mismatch")
    total = decoded[0].frag_total
    key = (decoded[0].src, decoded[0].session_id, decoded[0].seq, decoded[0].msg_type)
    by_index = {}
    for f in decoded:
        if (f.src, f.session_id, f.seq, f.msg_type) != key or f.frag_total != total:
            raise FrameError("frames belong to different messages")
        if f.frag_index in by_index:
            raise FrameError(f"duplicate fragment {f.frag_index}")
        by_index[f.frag_index] = f
    missing = [i for i in range(total) if i not in by_index]
    if missing:
        raise FrameError(f"missing fragments {missing}")
    return b"".join(by_index[i].data for i in range(total))
