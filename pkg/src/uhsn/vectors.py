"""Frozen KDF and cipher vectors for cross-implementation checks.

The file is plain text: blocks separated by blank lines, one ``name = value``
per line, byte strings in hex, ``#`` starts a comment.
"""

from __future__ import annotations

from importlib import resources

from .crypto import SymmetricKey, decrypt, derive_sym_key, encrypt
from .gfmatrix import FieldMatrix, FieldSpec, mat_deserialize, mat_serialize

VECTOR_FILE = "vectors.txt"

_KDF_CASES = [
    # (q, matrix rows, epoch)
    (5, [[3]], 1),
    (5, [[0]], 0),
    (5, [[0, 0], [0, 0]], 0),
    (251, [[1, 0], [0, 1]], 1),
    (2, [[1] * 8], 2),
    (2, [[1, 0, 1], [1, 1, 0], [0, 0, 1]], 1),
    (257, [[256, 1], [2, 255], [128, 0]], 3),
]

_CIPHER_CASES = [
    # (kdf case index, nonce counter, plaintext, auth)
    (0, 0, b"", True),
    (0, 1, b"abc", True),
    (0, 2, bytes(range(32)), True),
    (3, 0, bytes(range(100)), True),
    (0, 3, b"heart rate 72 bpm", False),
]


def generate() -> list[dict[str, str]]:
    blocks = []
    keys = []
    for q, rows, epoch in _KDF_CASES:
        a = FieldMatrix.from_rows(FieldSpec(q), rows)
        key = derive_sym_key(a, epoch)
        keys.append(key)
        blocks.append({
            "kind": "kdf", "q": str(q), "rows": str(a.rows), "cols": str(a.cols),
            "epoch": str(epoch), "matrix": mat_serialize(a).hex(), "key": key.bytes.hex(),
        })
    for idx, ctr, pt, auth in _CIPHER_CASES:
        key = keys[idx]
        nonce = ctr.to_bytes(12, "big")
        ct = encrypt(key, nonce, pt, auth=auth)
        blocks.append({
            "kind": "cipher", "key": key.bytes.hex(), "nonce": nonce.hex(),
            "auth": "1" if auth else "0", "plaintext": pt.hex(),
            "body": ct.body.hex(), "tag": ct.tag.hex(),
        })
    return blocks


def format_vectors(blocks: list[dict[str, str]]) -> str:
    lines = [
        "# KDF: SHA-256('uhsn/kdf/v1' | q:8 | rows:4 | cols:4 | epoch:8 | matrix)",
        "# cipher: keystream_i = SHA-256(key | nonce | i:4); tag = SHA-256(key | 01 | nonce | body)[:16]",
        "",
    ]
    for b in blocks:
        lines.extend(f"{k} = {v}" for k, v in b.items())
        lines.append("")
    return "\n".join(lines)


def parse_vectors(text: str) -> list[dict[str, str]]:
    blocks, cur = [], {}
    for line in text.splitlines() + [""]:
        line = line.strip()
        if line.startswith("#"):
            continue
        if not line:
            if cur:
                blocks.append(cur)
                cur = {}
            continue
        name, _, value = line.partition("=")
        cur[name.strip()] = value.strip()
    return blocks


def frozen_text() -> str:
    return resources.files("uhsn.data").joinpath(VECTOR_FILE).read_text()


def check_block(b: dict[str, str]) -> bool:
    """Recompute one frozen block with this implementation."""
    if b["kind"] == "kdf":
        fld = FieldSpec(int(b["q"]))
        a = mat_deserialize(bytes.fromhex(b["matrix"]), fld, int(b["rows"]), int(b["cols"]))
        return derive_sym_key(a, int(b["epoch"])).bytes.hex() == b["key"]
    key = SymmetricKey(bytes.fromhex(b["key"]), 0)
    auth = b["auth"] == "1"
    ct = encrypt(key, bytes.fromhex(b["nonce"]), bytes.fromhex(b["plaintext"]), auth=auth)
    if ct.body.hex() != b["body"] or ct.tag.hex() != b["tag"]:
        return False
    return decrypt(key, ct, auth=auth).hex() == b["plaintext"]


def verify(text: str | None = None) -> list[int]:
    """Indices of frozen blocks that do not reproduce; empty means all match."""
    blocks = parse_vectors(frozen_text() if text is None else text)
    bad = [i for i, b in enumerate(blocks) if not check_block(b)]
    if len(blocks) != len(generate()):
        bad.append(-1)
    return bad
