"""Pure-Python digest kernels backed by hashlib.

Fallback for the compiled extension in ``_kernels.pyx``; both expose the
same three functions and must produce identical digests and byte counts.
Inputs are the per-group canonical byte strings (length prefix included)
and the 32-byte nonces; outputs pair the digest list with the total number
of bytes fed to the hash, which the byte-work model asserts against.
"""

from __future__ import annotations

import hashlib

BACKEND = "python"


def single_digests(nonces: list[bytes], canonicals: list[bytes]) -> tuple[list[bytes], int]:
    """digest_i = SHA-256(nonce_i || canonical_i), one per group."""
    if len(nonces) != len(canonicals):
        raise ValueError("nonce count differs from group count")
    digests: list[bytes] = []
    total = 0
    for nonce, data in zip(nonces, canonicals):
        h = hashlib.sha256()
        h.update(nonce)
        h.update(data)
        digests.append(h.digest())
        total += len(nonce) + len(data)
    return digests, total


def multi_digests(nonces: list[bytes], canonicals: list[bytes]) -> tuple[list[bytes], int]:
    """digest_k = SHA-256(nonce_k || canonical_1 || ... || canonical_k) for k=1..N."""
    if len(nonces) != len(canonicals):
        raise ValueError("nonce count differs from group count")
    digests: list[bytes] = []
    total = 0
    for k in range(1, len(canonicals) + 1):
        h = hashlib.sha256()
        h.update(nonces[k - 1])
        fed = len(nonces[k - 1])
        for j in range(k):
            h.update(canonicals[j])
            fed += len(canonicals[j])
        digests.append(h.digest())
        total += fed
    return digests, total


def prefix_digest(nonce: bytes, canonicals: list[bytes]) -> tuple[bytes, int]:
    """Single cumulative digest over a disclosed prefix (validation path)."""
    h = hashlib.sha256()
    h.update(nonce)
    fed = len(nonce)
    for data in canonicals:
        h.update(data)
        fed += len(data)
    return h.digest(), fed
