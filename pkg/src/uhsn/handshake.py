"""Six-step pairwise key handshake between a sensor node and the base station.

    node                                   SBS
    X (m x n), X_g  secret
    Msg1 = X_g X          ------------->
                                           Y (n x k), Y_g  secret
                          <-------------   Msg2 = (X_g X Y, X_g X Y Y_g)
    Msg3 = X (X_g X Y Y_g) ------------>
    key  = X (X_g X Y)                     key = Msg3 Y

Both sides end with the m x k matrix XY. There is no identity binding; the
exchange is exactly as above and is open to a man in the middle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .crypto import SymmetricKey, derive_sym_key
from .errors import DimensionError, ProtocolStateError
from .gfmatrix import (
    FieldMatrix,
    FieldSpec,
    generalized_inverse,
    mat_deserialize,
    mat_random,
    mat_serialize,
    serialized_length,
)

NODE_STREAM = 1
SBS_STREAM = 2


@dataclass(frozen=True)
class HandshakeParams:
    m: int
    n: int
    k: int
    field: FieldSpec

    def __post_init__(self):
        for name in ("m", "n", "k"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise DimensionError(f"{name} must be a positive integer, got {v!r}")
            if v > 255:
                raise DimensionError(f"{name} must be at most 255, got {v}")


def _expect_shape(what: str, a: FieldMatrix, rows: int, cols: int, fld: FieldSpec) -> None:
    if a.field != fld:
        raise DimensionError(f"{what} is over GF({a.field.q}), expected GF({fld.q})")
    if a.shape != (rows, cols):
        raise DimensionError(f"{what} is {a.rows}x{a.cols}, expected {rows}x{cols}")


@dataclass(frozen=True)
class Msg1:
    t1: FieldMatrix  # X_g X

    def to_bytes(self) -> bytes:
        return mat_serialize(self.t1)

    @classmethod
    def from_bytes(cls, data: bytes, p: HandshakeParams) -> Msg1:
        return cls(mat_deserialize(data, p.field, p.n, p.n))

    @property
    def matrices(self) -> tuple[FieldMatrix, ...]:
        return (self.t1,)


@dataclass(frozen=True)
class Msg2:
    p1: FieldMatrix  # X_g X Y
    p2: FieldMatrix  # X_g X Y Y_g

    def to_bytes(self) -> bytes:
        return mat_serialize(self.p1) + mat_serialize(self.p2)

    @classmethod
    def from_bytes(cls, data: bytes, p: HandshakeParams) -> Msg2:
        cut = serialized_length(p.field, p.n, p.k)
        return cls(
            mat_deserialize(data[:cut], p.field, p.n, p.k),
            mat_deserialize(data[cut:], p.field, p.n, p.n),
        )

    @property
    def matrices(self) -> tuple[FieldMatrix, ...]:
        return (self.p1, self.p2)


@dataclass(frozen=True)
class Msg3:
    t4: FieldMatrix  # X Y Y_g

    def to_bytes(self) -> bytes:
        return mat_serialize(self.t4)

    @classmethod
    def from_bytes(cls, data: bytes, p: HandshakeParams) -> Msg3:
        return cls(mat_deserialize(data, p.field, p.m, p.n))

    @property
    def matrices(self) -> tuple[FieldMatrix, ...]:
        return (self.t4,)


@dataclass(frozen=True)
class SharedKey:
    matrix: FieldMatrix
    sym_key: SymmetricKey
    epoch: int
    weak: bool = False

    @classmethod
    def from_matrix(cls, matrix: FieldMatrix, epoch: int) -> SharedKey:
        return cls(matrix, derive_sym_key(matrix, epoch), epoch, weak=matrix.is_zero())

    def __repr__(self) -> str:
        return f"SharedKey({self.matrix.rows}x{self.matrix.cols}, epoch={self.epoch}, weak={self.weak})"


class NodeState(enum.Enum):
    INIT = "init"
    AWAITING_SBS_REPLY = "awaiting_sbs_reply"
    COMPLETE = "complete"


class SbsState(enum.Enum):
    AWAITING_MSG1 = "awaiting_msg1"
    AWAITING_MSG3 = "awaiting_msg3"
    COMPLETE = "complete"


@dataclass(repr=False)
class NodeSession:
    params: HandshakeParams
    X: FieldMatrix
    X_g: FieldMatrix
    epoch: int = 1
    state: NodeState = NodeState.INIT
    key: SharedKey | None = None

    def __repr__(self) -> str:
        return f"NodeSession(state={self.state.value}, epoch={self.epoch})"


@dataclass(repr=False)
class SbsSession:
    params: HandshakeParams
    Y: FieldMatrix
    Y_g: FieldMatrix
    XgX: FieldMatrix | None = None
    epoch: int = 1
    state: SbsState = SbsState.AWAITING_MSG1
    key: SharedKey | None = field(default=None)

    def __repr__(self) -> str:
        return f"SbsSession(state={self.state.value}, epoch={self.epoch})"


def node_init(
    params: HandshakeParams, seed: int, *, epoch: int = 1, X: FieldMatrix | None = None
) -> tuple[NodeSession, Msg1]:
    """Steps 1-2. ``X`` overrides the seeded draw (for fixed test vectors)."""
    if X is None:
        X = mat_random(seed, params.m, params.n, params.field, stream=NODE_STREAM)
    _expect_shape("X", X, params.m, params.n, params.field)
    X_g = generalized_inverse(X)
    session = NodeSession(params, X, X_g, epoch, NodeState.AWAITING_SBS_REPLY)
    return session, Msg1(X_g @ X)


def sbs_new_session(
    params: HandshakeParams, seed: int, *, epoch: int = 1, Y: FieldMatrix | None = None
) -> SbsSession:
    if Y is None:
        Y = mat_random(seed, params.n, params.k, params.field, stream=SBS_STREAM)
    _expect_shape("Y", Y, params.n, params.k, params.field)
    return SbsSession(params, Y, generalized_inverse(Y), epoch=epoch)


def sbs_accept(session: SbsSession, msg1: Msg1) -> Msg2:
    """Steps 3-4 on an existing session."""
    if session.state is not SbsState.AWAITING_MSG1:
        raise ProtocolStateError(f"SBS got Msg1 in state {session.state.value}")
    p = session.params
    _expect_shape("Msg1", msg1.t1, p.n, p.n, p.field)
    p1 = msg1.t1 @ session.Y
    msg2 = Msg2(p1, p1 @ session.Y_g)
    session.XgX = msg1.t1
    session.state = SbsState.AWAITING_MSG3
    return msg2


def sbs_respond(
    sbs_seed: int, params: HandshakeParams, msg1: Msg1, *, epoch: int = 1, Y: FieldMatrix | None = None
) -> tuple[SbsSession, Msg2]:
    session = sbs_new_session(params, sbs_seed, epoch=epoch, Y=Y)
    return session, sbs_accept(session, msg1)


def node_finalize(session: NodeSession, msg2: Msg2) -> tuple[SharedKey, Msg3]:
    """Steps 5-6 on the node: Msg3 = X P2, key = X P1."""
    if session.state is not NodeState.AWAITING_SBS_REPLY:
        raise ProtocolStateError(f"node got Msg2 in state {session.state.value}")
    p = session.params
    _expect_shape("Msg2.p1", msg2.p1, p.n, p.k, p.field)
    _expect_shape("Msg2.p2", msg2.p2, p.n, p.n, p.field)
    key = SharedKey.from_matrix(session.X @ msg2.p1, session.epoch)
    msg3 = Msg3(session.X @ msg2.p2)
    session.key = key
    session.state = NodeState.COMPLETE
    return key, msg3


def sbs_finalize(session: SbsSession, msg3: Msg3) -> SharedKey:
    if session.state is not SbsState.AWAITING_MSG3:
        raise ProtocolStateError(f"SBS got Msg3 in state {session.state.value}")
    p = session.params
    _expect_shape("Msg3", msg3.t4, p.m, p.n, p.field)
    key = SharedKey.from_matrix(msg3.t4 @ session.Y, session.epoch)
    session.key = key
    session.state = SbsState.COMPLETE
    return key


def preprovision_key(params: HandshakeParams, key_matrix: FieldMatrix, epoch: int = 0) -> SharedKey:
    """Install a key loaded before deployment, skipping the exchange."""
    _expect_shape("key", key_matrix, params.m, params.k, params.field)
    return SharedKey.from_matrix(key_matrix, epoch)


@dataclass(frozen=True)
class HandshakeRun:
    """Everything one complete exchange produced, secrets included."""

    params: HandshakeParams
    node: NodeSession
    sbs: SbsSession
    msg1: Msg1
    msg2: Msg2
    msg3: Msg3

    @property
    def agreed(self) -> bool:
        return self.node.key is not None and self.sbs.key is not None and self.node.key.matrix == self.sbs.key.matrix


def run_handshake(params: HandshakeParams, node_seed: int, sbs_seed: int, *, epoch: int = 1) -> HandshakeRun:
    node, msg1 = node_init(params, node_seed, epoch=epoch)
    sbs, msg2 = sbs_respond(sbs_seed, params, msg1, epoch=epoch)
    _, msg3 = node_finalize(node, msg2)
    sbs_finalize(sbs, msg3)
    return HandshakeRun(params, node, sbs, msg1, msg2, msg3)
