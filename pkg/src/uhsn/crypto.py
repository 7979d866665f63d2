"""Key derivation, the hash-counter stream cipher, and the central key generator.

Wire layout of a derived key input (all integers big-endian)::

    "uhsn/kdf/v1" | q (8) | rows (4) | cols (4) | epoch (8) | matrix bytes

Keystream block i is SHA-256(key | nonce | i as 4 bytes); the tag is the
first 16 bytes of SHA-256(key | 0x01 | nonce | body).
"""

from __future__ import annotations

import hashlib
import hmac
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .errors import AuthenticationError, CkgError, NonceReuseError
from .gfmatrix import FieldMatrix, mat_serialize

if TYPE_CHECKING:
    from .handshake import SharedKey

HASH_NAME = "sha256"
KDF_DOMAIN = b"uhsn/kdf/v1"
KEY_BYTES = 32
NONCE_BYTES = 12
TAG_BYTES = 16
BLOCK_BYTES = 32


def _h(*parts: bytes) -> bytes:
    h = hashlib.new(HASH_NAME)
    for p in parts:
        h.update(p)
    return h.digest()


@dataclass(frozen=True)
class SymmetricKey:
    bytes: bytes
    source_epoch: int

    def __post_init__(self):
        if len(self.bytes) != KEY_BYTES:
            raise ValueError(f"symmetric key must be {KEY_BYTES} bytes")

    def __repr__(self) -> str:
        # keep key material out of logs
        return f"SymmetricKey(epoch={self.source_epoch}, id={self.bytes[:2].hex()}..)"


def derive_sym_key(matrix_key: FieldMatrix, epoch: int) -> SymmetricKey:
    digest = _h(
        KDF_DOMAIN,
        matrix_key.field.q.to_bytes(8, "big"),
        matrix_key.rows.to_bytes(4, "big"),
        matrix_key.cols.to_bytes(4, "big"),
        epoch.to_bytes(8, "big"),
        mat_serialize(matrix_key),
    )
    return SymmetricKey(digest, epoch)


@dataclass(frozen=True)
class Ciphertext:
    nonce: bytes
    body: bytes
    tag: bytes = b""

    def to_bytes(self) -> bytes:
        return self.nonce + self.tag + self.body

    @classmethod
    def from_bytes(cls, data: bytes, auth: bool = True) -> Ciphertext:
        tag_len = TAG_BYTES if auth else 0
        if len(data) < NONCE_BYTES + tag_len:
            raise AuthenticationError("ciphertext too short")
        return cls(
            data[:NONCE_BYTES],
            data[NONCE_BYTES + tag_len:],
            data[NONCE_BYTES:NONCE_BYTES + tag_len],
        )


def _keystream(key: bytes, nonce: bytes, n: int) -> bytes:
    blocks = (n + BLOCK_BYTES - 1) // BLOCK_BYTES
    return b"".join(_h(key, nonce, i.to_bytes(4, "big")) for i in range(blocks))[:n]


def _tag(key: bytes, nonce: bytes, body: bytes) -> bytes:
    return _h(key, b"\x01", nonce, body)[:TAG_BYTES]


class NonceRegistry:
    """Per-key nonce bookkeeping; hands out counter nonces and refuses reuse."""

    def __init__(self):
        self._used: dict[bytes, set[bytes]] = {}
        self._next: dict[bytes, int] = {}

    def claim(self, key: SymmetricKey, nonce: bytes) -> None:
        used = self._used.setdefault(key.bytes, set())
        if nonce in used:
            raise NonceReuseError(f"nonce {nonce.hex()} already used under this key")
        used.add(nonce)

    def next_nonce(self, key: SymmetricKey) -> bytes:
        used = self._used.setdefault(key.bytes, set())
        ctr = self._next.get(key.bytes, 0)
        while (nonce := ctr.to_bytes(NONCE_BYTES, "big")) in used:
            ctr += 1
        self._next[key.bytes] = ctr + 1
        return nonce


def encrypt(
    key: SymmetricKey,
    nonce: bytes,
    plaintext: bytes,
    *,
    auth: bool = True,
    nonces: NonceRegistry | None = None,
) -> Ciphertext:
    if len(nonce) != NONCE_BYTES:
        raise ValueError(f"nonce must be {NONCE_BYTES} bytes")
    if nonces is not None:
        nonces.claim(key, nonce)
    ks = _keystream(key.bytes, nonce, len(plaintext))
    body = bytes(a ^ b for a, b in zip(plaintext, ks))
    return Ciphertext(nonce, body, _tag(key.bytes, nonce, body) if auth else b"")


def decrypt(key: SymmetricKey, ct: Ciphertext, *, auth: bool = True) -> bytes:
    if auth:
        if not hmac.compare_digest(_tag(key.bytes, ct.nonce, ct.body), ct.tag):
            raise AuthenticationError("tag mismatch")
    ks = _keystream(key.bytes, ct.nonce, len(ct.body))
    return bytes(a ^ b for a, b in zip(ct.body, ks))


@dataclass
class CkgRecord:
    node_id: int
    shared_key: SharedKey
    revoked: bool = False

    @property
    def epoch(self) -> int:
        return self.shared_key.epoch


@dataclass(frozen=True)
class DecryptionKeyResponse:
    wrapped: Ciphertext
    sender_id: int
    receiver_id: int
    sender_epoch: int


def unwrap_kd(receiver_key: SymmetricKey, resp: DecryptionKeyResponse, *, auth: bool = True) -> SymmetricKey:
    kd = decrypt(receiver_key, resp.wrapped, auth=auth)
    return SymmetricKey(kd, resp.sender_epoch)


@dataclass
class CentralKeyGenerator:
    """The SBS-resident table of node keys that issues wrapped decryption keys."""

    auth: bool = True
    records: dict[int, CkgRecord] = field(default_factory=dict)
    nonces: NonceRegistry = field(default_factory=NonceRegistry)

    def register(self, node_id: int, shared_key: SharedKey) -> None:
        old = self.records.get(node_id)
        if old is not None and shared_key.epoch <= old.epoch:
            raise CkgError("stale_epoch", f"node {node_id}: epoch {shared_key.epoch} <= {old.epoch}")
        self.records[node_id] = CkgRecord(node_id, shared_key)

    def next_epoch(self, node_id: int) -> int:
        rec = self.records.get(node_id)
        return 1 if rec is None else rec.epoch + 1

    def _live(self, node_id: int, role: str) -> CkgRecord:
        rec = self.records.get(node_id)
        if rec is None:
            raise CkgError(f"unknown_{role}", f"{role} {node_id} is not registered")
        if rec.revoked:
            raise CkgError(f"revoked_{role}", f"{role} {node_id} is revoked")
        return rec

    def issue(self, sender_id: int, receiver_id: int) -> DecryptionKeyResponse:
        sender = self._live(sender_id, "sender")
        receiver = self._live(receiver_id, "receiver")
        kd = sender.shared_key.sym_key
        rkey = receiver.shared_key.sym_key
        wrapped = encrypt(rkey, self.nonces.next_nonce(rkey), kd.bytes, auth=self.auth, nonces=self.nonces)
        return DecryptionKeyResponse(wrapped, sender_id, receiver_id, kd.source_epoch)

    def revoke_and_rekey(self, node_id: int) -> int:
        """Mark the node's key revoked; returns the epoch its next handshake must install."""
        rec = self.records.get(node_id)
        if rec is None:
            raise CkgError("unknown_node", f"node {node_id} is not registered")
        rec.revoked = True
        return rec.epoch + 1
