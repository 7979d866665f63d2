"""Dense matrices over a prime field GF(q) and their generalized inverses.

Everything here is a pure function of immutable values. Matrices are small
(the protocol uses dimensions in the single digits), so entries live in a
flat row-major tuple of Python ints.
"""

from __future__ import annotations

import hashlib
from itertools import product
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import DimensionError, FieldError

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)
# Miller-Rabin with the bases above is exact below this bound.
_MR_LIMIT = 3317044064679887385961981


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    if n >= _MR_LIMIT:
        raise FieldError(f"modulus {n} exceeds the deterministic primality bound")
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class FieldSpec:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, int) or isinstance(self.q, bool):
            raise FieldError(f"modulus must be an integer, got {self.q!r}")
        if not is_prime(self.q):
            raise FieldError(f"modulus {self.q} is not prime")

    @property
    def element_bits(self) -> int:
        return (self.q - 1).bit_length()

    @property
    def element_bytes(self) -> int:
        return (self.element_bits + 7) // 8

    def inv(self, x: int) -> int:
        if x % self.q == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(x, -1, self.q)


@dataclass(frozen=True)
class FieldMatrix:
    """A rows x cols matrix over ``field``.

    Zero-sized dimensions are allowed so that a rank-0 factorization can be
    represented; everything the protocol generates is at least 1x1.
    """

    field: FieldSpec
    rows: int
    cols: int
    entries: tuple[int, ...]

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise DimensionError(f"negative dimensions {self.rows}x{self.cols}")
        if not isinstance(self.entries, tuple):
            object.__setattr__(self, "entries", tuple(self.entries))
        if len(self.entries) != self.rows * self.cols:
            raise DimensionError(
                f"{len(self.entries)} entries for a {self.rows}x{self.cols} matrix"
            )
        q = self.field.q
        for e in self.entries:
            if not 0 <= e < q:
                raise FieldError(f"entry {e} outside [0, {q})")

    @classmethod
    def from_rows(cls, field: FieldSpec, rows: Sequence[Sequence[int]]) -> FieldMatrix:
        rows = [list(r) for r in rows]
        ncols = len(rows[0]) if rows else 0
        if any(len(r) != ncols for r in rows):
            raise DimensionError("ragged rows")
        return cls(field, len(rows), ncols, tuple(x % field.q for r in rows for x in r))

    @classmethod
    def zeros(cls, field: FieldSpec, rows: int, cols: int) -> FieldMatrix:
        return cls(field, rows, cols, (0,) * (rows * cols))

    @classmethod
    def identity(cls, field: FieldSpec, n: int) -> FieldMatrix:
        return cls(field, n, n, tuple(int(i == j) for i in range(n) for j in range(n)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> tuple[int, ...]:
        return self.entries[i * self.cols:(i + 1) * self.cols]

    def to_rows(self) -> list[list[int]]:
        return [list(self.row(i)) for i in range(self.rows)]

    def transpose(self) -> FieldMatrix:
        return FieldMatrix(
            self.field, self.cols, self.rows,
            tuple(self[i, j] for j in range(self.cols) for i in range(self.rows)),
        )

    def is_zero(self) -> bool:
        return not any(self.entries)

    def __matmul__(self, other: FieldMatrix) -> FieldMatrix:
        return mat_mul(self, other)

    def __repr__(self) -> str:
        return f"FieldMatrix(GF({self.field.q}), {self.to_rows()})"


def mat_mul(a: FieldMatrix, b: FieldMatrix) -> FieldMatrix:
    if a.field != b.field:
        raise FieldError(f"GF({a.field.q}) times GF({b.field.q})")
    if a.cols != b.rows:
        raise DimensionError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    q = a.field.q
    bcols = [b.entries[j::b.cols] for j in range(b.cols)] if b.cols else []
    out = []
    for i in range(a.rows):
        r = a.row(i)
        out.extend(sum(x * y for x, y in zip(r, c)) % q for c in bcols)
    return FieldMatrix(a.field, a.rows, b.cols, tuple(out))


class DeterministicRng:
    """Counter-mode SHA-256 byte stream keyed by (seed, stream).

    Elements are drawn by masking to ``element_bits`` and rejecting values
    >= q, so every residue is exactly equally likely.
    """

    def __init__(self, seed: int, stream: int = 0):
        if not 0 <= seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if not 0 <= stream < 2**64:
            raise ValueError("stream id must fit in 64 bits")
        self._prefix = b"uhsn/rng/v1" + seed.to_bytes(8, "big") + stream.to_bytes(8, "big")
        self._counter = 0
        self._buf = b""

    def bytes(self, n: int) -> bytes:
        while len(self._buf) < n:
            block = hashlib.sha256(self._prefix + self._counter.to_bytes(8, "big")).digest()
            self._buf += block
            self._counter += 1
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def below(self, q: int) -> int:
        bits = (q - 1).bit_length()
        nbytes = max(1, (bits + 7) // 8)
        mask = (1 << bits) - 1
        while True:
            v = int.from_bytes(self.bytes(nbytes), "big") & mask
            if v < q:
                return v

    def matrix(self, rows: int, cols: int, field: FieldSpec) -> FieldMatrix:
        if rows < 1 or cols < 1:
            raise DimensionError(f"random matrix needs positive dims, got {rows}x{cols}")
        return FieldMatrix(field, rows, cols, tuple(self.below(field.q) for _ in range(rows * cols)))


def mat_random(seed: int, rows: int, cols: int, field: FieldSpec, stream: int = 0) -> FieldMatrix:
    """Uniform random matrix; identical (seed, stream) give identical output."""
    return DeterministicRng(seed, stream).matrix(rows, cols, field)


def derive_seed(seed: int, *labels: int | str) -> int:
    """Deterministic 64-bit child seed, used to give every node its own stream."""
    h = hashlib.sha256(b"uhsn/seed/v1" + seed.to_bytes(8, "big"))
    for label in labels:
        h.update(b"|" + str(label).encode())
    return int.from_bytes(h.digest()[:8], "big")


def _rref(rows: list[list[int]], ncols: int, q: int) -> tuple[list[list[int]], list[int]]:
    """Reduced row echelon form; pivot is the first nonzero entry at or below
    the current row, scanning columns left to right."""
    m = [r[:] for r in rows]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        if r == len(m):
            break
        p = next((i for i in range(r, len(m)) if m[i][c]), None)
        if p is None:
            continue
        m[r], m[p] = m[p], m[r]
        inv = pow(m[r][c], -1, q)
        m[r] = [x * inv % q for x in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c]:
                f = m[i][c]
                m[i] = [(x - f * y) % q for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
    return m, pivots


def rank(a: FieldMatrix) -> int:
    return len(_rref(a.to_rows(), a.cols, a.field.q)[1])


@dataclass(frozen=True)
class RankFactorization:
    F: FieldMatrix
    G: FieldMatrix
    r: int
    pivots: tuple[int, ...]


def rank_factorize(a: FieldMatrix) -> RankFactorization:
    """Split ``a`` as F @ G with F = pivot columns of a and G = nonzero RREF rows."""
    reduced, pivots = _rref(a.to_rows(), a.cols, a.field.q)
    r = len(pivots)
    F = FieldMatrix(a.field, a.rows, r, tuple(a[i, c] for i in range(a.rows) for c in pivots))
    G = FieldMatrix(a.field, r, a.cols, tuple(x for row in reduced[:r] for x in row))
    return RankFactorization(F, G, r, tuple(pivots))


def mat_inverse(a: FieldMatrix) -> FieldMatrix:
    if a.rows != a.cols:
        raise DimensionError("only square matrices are invertible")
    n, q = a.rows, a.field.q
    aug = [list(a.row(i)) + [int(i == j) for j in range(n)] for i in range(n)]
    reduced, pivots = _rref(aug, n, q)
    if pivots != list(range(n)):
        raise ZeroDivisionError("matrix is singular")
    return FieldMatrix(a.field, n, n, tuple(x for row in reduced for x in row[n:]))


def generalized_inverse(a: FieldMatrix) -> FieldMatrix:
    """Return B with a@B@a == a and B@a@B == B.

    B = G_r @ F_l where a = F @ G, F_l is a left inverse of F built from the
    first r independent rows of F, and G_r selects G's pivot columns.
    The result is canonical for the fixed pivot order of ``_rref``.
    """
    fac = rank_factorize(a)
    q, r = a.field.q, fac.r
    if r == 0:
        return FieldMatrix.zeros(a.field, a.cols, a.rows)
    # independent rows of F are the pivot columns of F^T
    _, row_idx = _rref(fac.F.transpose().to_rows(), a.rows, q)
    S = FieldMatrix(a.field, r, r, tuple(x for i in row_idx for x in fac.F.row(i)))
    S_inv = mat_inverse(S)
    F_l = [[0] * a.rows for _ in range(r)]
    for j in range(r):
        for s, t in enumerate(row_idx):
            F_l[j][t] = S_inv[j, s]
    B = [[0] * a.rows for _ in range(a.cols)]
    for j, p in enumerate(fac.pivots):
        B[p] = F_l[j]
    return FieldMatrix(a.field, a.cols, a.rows, tuple(x for row in B for x in row))


def is_generalized_inverse(a: FieldMatrix, b: FieldMatrix) -> bool:
    return a @ b @ a == a and b @ a @ b == b


def serialized_length(field: FieldSpec, rows: int, cols: int) -> int:
    if field.q == 2:
        return (rows * cols + 7) // 8
    return rows * cols * field.element_bytes


def payload_bits(a: FieldMatrix) -> int:
    """Information bits of the matrix, excluding byte-alignment padding."""
    return a.rows * a.cols * a.field.element_bits


def mat_serialize(a: FieldMatrix) -> bytes:
    """Row-major encoding; GF(2) packs eight entries per byte, MSB first."""
    if a.field.q == 2:
        out = bytearray(serialized_length(a.field, a.rows, a.cols))
        for idx, bit in enumerate(a.entries):
            if bit:
                out[idx >> 3] |= 0x80 >> (idx & 7)
        return bytes(out)
    w = a.field.element_bytes
    return b"".join(e.to_bytes(w, "big") for e in a.entries)


def mat_deserialize(data: bytes, field: FieldSpec, rows: int, cols: int) -> FieldMatrix:
    expected = serialized_length(field, rows, cols)
    if len(data) != expected:
        raise DimensionError(f"{len(data)} bytes for a {rows}x{cols} GF({field.q}) matrix, expected {expected}")
    count = rows * cols
    if field.q == 2:
        entries = tuple((data[i >> 3] >> (7 - (i & 7))) & 1 for i in range(count))
        if count % 8 and data[-1] & (0xFF >> (count % 8)):
            raise FieldError("nonzero padding bits")
    else:
        w = field.element_bytes
        entries = tuple(int.from_bytes(data[i * w:(i + 1) * w], "big") for i in range(count))
    return FieldMatrix(field, rows, cols, entries)


def all_matrices(field: FieldSpec, rows: int, cols: int) -> Iterable[FieldMatrix]:
    """Every rows x cols matrix over ``field``, in lexicographic order."""
    for entries in product(range(field.q), repeat=rows * cols):
        yield FieldMatrix(field, rows, cols, entries)
