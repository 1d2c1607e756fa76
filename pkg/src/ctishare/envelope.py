"""Asymmetric envelopes for credentials and response packages in transit.

Hybrid construction: ephemeral X25519 key agreement, HKDF-SHA256 key
derivation bound to both public keys, then ChaCha20-Poly1305. The symmetric
key is unique per seal, so a fixed AEAD nonce is safe and any ciphertext
modification fails authentication. Wrong key and tampering are deliberately
indistinguishable: both surface as DecryptionFailure.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Callable

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import CtiShareError
from .rng import ByteStream, system_bytes

BLOB_VERSION = 1
_KDF_INFO = b"ctishare-seal-v1"
_AEAD_NONCE = bytes(12)


class DecryptionFailure(CtiShareError):
    """Open failed: wrong key or tampered ciphertext (indistinguishable)."""


def key_id_for(public_key: bytes) -> str:
    return "k" + hashlib.sha256(public_key).hexdigest()[:16]


@dataclass(frozen=True)
class KeyPair:
    """X25519 keypair; the private half never leaves the owning organisation."""

    public_key: bytes
    private_key: bytes
    key_id: str


def keygen(seed: bytes | ByteStream | None = None) -> KeyPair:
    """Fresh keypair; a seed (test/scenario mode) makes the result deterministic."""
    if seed is None:
        raw = system_bytes(32)
    else:
        stream = seed if isinstance(seed, ByteStream) else ByteStream(seed)
        raw = stream.take(32)
    private = X25519PrivateKey.from_private_bytes(raw)
    public = private.public_key().public_bytes_raw()
    return KeyPair(public_key=public, private_key=raw, key_id=key_id_for(public))


@dataclass(frozen=True)
class SealedBlob:
    """Ciphertext addressed to one recipient key.

    ``ciphertext`` bundles the ephemeral public key and the AEAD output
    (tag included); serialization adds a one-byte framing version.
    """

    recipient_key_id: str
    ciphertext: bytes

    def to_bytes(self) -> bytes:
        key_id = self.recipient_key_id.encode("utf-8")
        return struct.pack(">H", len(key_id)) + key_id + bytes([BLOB_VERSION]) + self.ciphertext

    @classmethod
    def from_bytes(cls, data: bytes) -> "SealedBlob":
        if len(data) < 3:
            raise DecryptionFailure("sealed blob too short")
        (key_len,) = struct.unpack(">H", data[:2])
        if len(data) < 2 + key_len + 1:
            raise DecryptionFailure("sealed blob truncated")
        key_id = data[2 : 2 + key_len].decode("utf-8", errors="replace")
        version = data[2 + key_len]
        if version != BLOB_VERSION:
            raise DecryptionFailure(f"unsupported sealed blob version {version}")
        return cls(recipient_key_id=key_id, ciphertext=data[2 + key_len + 1 :])


def _derive_key(shared: bytes, ephemeral_public: bytes, recipient_public: bytes) -> bytes:
    kdf = HKDF(
        algorithm=hashes.SHA256(),
        length=32,
        salt=None,
        info=_KDF_INFO + ephemeral_public + recipient_public,
    )
    return kdf.derive(shared)


def seal(
    recipient_public: bytes,
    plaintext: bytes,
    rng: Callable[[int], bytes] | None = None,
) -> SealedBlob:
    """Encrypt plaintext so only the holder of the matching private key can read it.

    Sealing is randomized: each call draws a fresh ephemeral key, so two seals
    of the same plaintext differ byte-for-byte. ``rng`` exists for seeded
    scenario replay and must not be supplied in production use.
    """
    draw = rng or system_bytes
    ephemeral = X25519PrivateKey.from_private_bytes(draw(32))
    ephemeral_public = ephemeral.public_key().public_bytes_raw()
    shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(recipient_public))
    key = _derive_key(shared, ephemeral_public, recipient_public)
    ciphertext = ChaCha20Poly1305(key).encrypt(_AEAD_NONCE, plaintext, None)
    return SealedBlob(
        recipient_key_id=key_id_for(recipient_public),
        ciphertext=ephemeral_public + ciphertext,
    )


def open_blob(recipient_private: bytes, blob: SealedBlob) -> bytes:
    """Recover the plaintext; raises DecryptionFailure on any mismatch or tamper."""
    if len(blob.ciphertext) < 32 + 16:
        raise DecryptionFailure("ciphertext shorter than ephemeral key plus tag")
    ephemeral_public, ciphertext = blob.ciphertext[:32], blob.ciphertext[32:]
    try:
        private = X25519PrivateKey.from_private_bytes(recipient_private)
        recipient_public = private.public_key().public_bytes_raw()
        shared = private.exchange(X25519PublicKey.from_public_bytes(ephemeral_public))
        key = _derive_key(shared, ephemeral_public, recipient_public)
        return ChaCha20Poly1305(key).decrypt(_AEAD_NONCE, ciphertext, None)
    except (InvalidTag, ValueError) as exc:
        raise DecryptionFailure("unable to open sealed blob") from exc
