"""Random byte sources: system CSPRNG plus a seeded stream for test mode.

Production paths (nonces, ephemeral keys) draw from :func:`secrets.token_bytes`.
The seeded :class:`ByteStream` exists so scenarios and tests can replay
byte-identically; it is a SHA-256 counter generator and must never back a
real deployment.
"""

from __future__ import annotations

import hashlib
import secrets
import struct


def system_bytes(n: int) -> bytes:
    return secrets.token_bytes(n)


class ByteStream:
    """Deterministic byte stream derived from a seed (test/scenario mode only)."""

    def __init__(self, seed: bytes | str | int):
        if isinstance(seed, int):
            seed = str(seed)
        if isinstance(seed, str):
            seed = seed.encode("utf-8")
        self._key = hashlib.sha256(seed).digest()
        self._counter = 0
        self._buffer = b""
        self._drawn = 0

    def take(self, n: int) -> bytes:
        if n < 0:
            raise ValueError("n must be >= 0")
        while len(self._buffer) < n:
            block = hashlib.sha256(self._key + struct.pack(">Q", self._counter)).digest()
            self._counter += 1
            self._buffer += block
        out, self._buffer = self._buffer[:n], self._buffer[n:]
        self._drawn += n
        return out

    # Callable so it can stand in anywhere a `draw(n) -> bytes` hook is accepted.
    __call__ = take

    @property
    def position(self) -> int:
        """Total bytes drawn; take(position) on a fresh stream replays to here."""
        return self._drawn

    def fork(self, label: str) -> "ByteStream":
        """Independent substream; forks with distinct labels never overlap."""
        return ByteStream(self._key + b"/" + label.encode("utf-8"))
