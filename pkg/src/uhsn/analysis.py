"""Eavesdropper view of the handshake and toy-scale key-ambiguity measurement.

A passive adversary sees four matrices per handshake::

    t1 = X_g X        (n x n)   Msg1
    t2 = X_g X Y      (n x k)   Msg2, first part
    t3 = X_g X Y Y_g  (n x n)   Msg2, second part
    t4 = X Y Y_g      (m x n)   Msg3

``count_consistent_keys`` enumerates every secret (X', X'_g, Y', Y'_g) that
reproduces all four and reports how many distinct keys X'Y' remain. The
numbers are measurements; nothing here asserts that the scheme is secure.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import asdict, dataclass
from functools import lru_cache

from .errors import AttackSpaceTooLarge, UhsnError
from .gfmatrix import FieldMatrix, FieldSpec, all_matrices, is_generalized_inverse, mat_serialize
from .handshake import HandshakeParams, Msg1, Msg2, Msg3
from .netsim.frames import MsgType
from .netsim.network import wire_messages

ENUMERATION_LIMIT = 2**24


@dataclass(frozen=True)
class Transcript:
    t1: FieldMatrix
    t2: FieldMatrix
    t3: FieldMatrix
    t4: FieldMatrix
    params: HandshakeParams

    @property
    def matrices(self) -> tuple[FieldMatrix, ...]:
        return self.t1, self.t2, self.t3, self.t4

    def to_bytes(self) -> bytes:
        return b"".join(mat_serialize(a) for a in self.matrices)


def capture_messages(params: HandshakeParams, msg1: Msg1, msg2: Msg2, msg3: Msg3) -> Transcript:
    return Transcript(msg1.t1, msg2.p1, msg2.p2, msg3.t4, params)


def capture(wire: list[bytes], params: HandshakeParams, node_id: int | None = None) -> Transcript:
    """Rebuild the latest complete handshake transcript from raw frames.

    With ``node_id`` only that node's exchange is considered.
    """
    open_: dict[tuple[int, int], dict[int, bytes]] = defaultdict(dict)
    latest = None
    for msg in wire_messages(wire):
        if msg.msg_type not in (MsgType.HS_MSG1, MsgType.HS_MSG2, MsgType.HS_MSG3):
            continue
        node = msg.dst if msg.msg_type == MsgType.HS_MSG2 else msg.src
        if node_id is not None and node != node_id:
            continue
        parts = open_[(node, msg.session_id)]
        if msg.msg_type == MsgType.HS_MSG1:
            parts.clear()
        parts[msg.msg_type] = msg.body
        if len(parts) == 3:
            latest = (
                Msg1.from_bytes(parts[MsgType.HS_MSG1], params),
                Msg2.from_bytes(parts[MsgType.HS_MSG2], params),
                Msg3.from_bytes(parts[MsgType.HS_MSG3], params),
            )
    if latest is None:
        raise UhsnError("no complete handshake in the capture")
    return capture_messages(params, *latest)


@lru_cache(maxsize=None)
def inverse_table(field: FieldSpec, rows: int, cols: int) -> tuple[tuple[FieldMatrix, tuple[FieldMatrix, ...]], ...]:
    """Every rows x cols matrix paired with all of its generalized inverses."""
    candidates = list(all_matrices(field, cols, rows))
    return tuple(
        (a, tuple(b for b in candidates if is_generalized_inverse(a, b)))
        for a in all_matrices(field, rows, cols)
    )


@dataclass(frozen=True)
class AmbiguityReport:
    consistent_key_count: int
    consistent_pair_count: int
    total_secret_pairs_enumerated: int
    true_key_found: bool | None
    product_attack_recovers: bool | None
    q: int
    m: int
    n: int
    k: int

    @property
    def key_determined(self) -> bool:
        return self.consistent_key_count == 1

    def to_dict(self) -> dict:
        return {**asdict(self), "key_determined": self.key_determined}


def enumeration_size(params: HandshakeParams) -> int:
    q, m, n, k = params.field.q, params.m, params.n, params.k
    return q ** (m * n + n * k)


def product_attack(t: Transcript) -> FieldMatrix:
    """t4 @ t2 = X Y Y_g X_g X Y, which equals XY whenever X_g X = I or Y Y_g = I."""
    return t.t4 @ t.t2


def count_consistent_keys(
    t: Transcript, true_key: FieldMatrix | None = None, *, limit: int = ENUMERATION_LIMIT
) -> AmbiguityReport:
    p = t.params
    q = p.field.q
    total = enumeration_size(p)
    inverse_work = q ** (2 * p.m * p.n) + q ** (2 * p.n * p.k)
    if total > limit or inverse_work > limit:
        raise AttackSpaceTooLarge(
            f"GF({q}) m={p.m} n={p.n} k={p.k}: {total} secret pairs exceeds limit {limit}"
        )

    xs = [x for x, invs in inverse_table(p.field, p.m, p.n) if any(xg @ x == t.t1 for xg in invs)]
    # for each admissible Y', the distinct projectors Y' Y'_g compatible with t2, t3
    ys: list[tuple[FieldMatrix, set[FieldMatrix]]] = []
    for y, invs in inverse_table(p.field, p.n, p.k):
        if t.t1 @ y != t.t2:
            continue
        projectors = {y @ yg for yg in invs if t.t1 @ y @ yg == t.t3}
        if projectors:
            ys.append((y, projectors))

    keys = set()
    pairs = 0
    for x in xs:
        for y, projectors in ys:
            if any(x @ proj == t.t4 for proj in projectors):
                pairs += 1
                keys.add(x @ y)
    return AmbiguityReport(
        consistent_key_count=len(keys),
        consistent_pair_count=pairs,
        total_secret_pairs_enumerated=total,
        true_key_found=None if true_key is None else true_key in keys,
        product_attack_recovers=None if true_key is None else product_attack(t) == true_key,
        q=q, m=p.m, n=p.n, k=p.k,
    )


def key_leak_scan(t: Transcript, key: FieldMatrix) -> bool:
    """True if the serialized key equals a captured matrix or occurs inside the
    concatenated transcript bytes."""
    if any(a == key for a in t.matrices):
        return True
    return mat_serialize(key) in t.to_bytes()
