"""Content-addressed immutable blob store (IPFS stand-in).

Blobs are addressed by "sha256:" plus the lowercase hex digest of their
bytes, stored under ``<root>/objects/<first-2-hex>/<hex>``, and verified on
every read. There is no delete or overwrite: the API keeps the store
append-only and every address self-authenticates.
"""

from __future__ import annotations

import hashlib
import os
import re
import tempfile
import threading
from pathlib import Path

from .errors import CtiShareError

CID_PREFIX = "sha256:"
_CID_RE = re.compile(r"^sha256:[0-9a-f]{64}$")


class EmptyBlob(CtiShareError):
    """Zero-length blobs are not addressable."""


class NotFound(CtiShareError):
    """No blob stored under this cid."""


class IntegrityError(CtiShareError):
    """Stored bytes no longer match their cid."""


def compute_cid(blob: bytes) -> str:
    return CID_PREFIX + hashlib.sha256(blob).hexdigest()


def check_cid(cid: str) -> str:
    """Validate cid syntax, returning the bare hex digest."""
    if not _CID_RE.match(cid):
        raise ValueError(f"malformed cid {cid!r}")
    return cid[len(CID_PREFIX) :]


class ContentStore:
    """Directory-backed blob store with an in-memory index.

    put/get are safe under concurrent callers; concurrent puts of identical
    bytes race benignly onto the same address.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._objects = self.root / "objects"
        self._objects.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._index: set[str] = set()
        for path in self._objects.glob("??/*"):
            self._index.add(path.name)

    def _path_for(self, hex_digest: str) -> Path:
        return self._objects / hex_digest[:2] / hex_digest

    def put(self, blob: bytes) -> str:
        """Persist a blob and return its cid; idempotent for identical bytes."""
        if len(blob) == 0:
            raise EmptyBlob("cannot store an empty blob")
        cid = compute_cid(blob)
        hex_digest = cid[len(CID_PREFIX) :]
        path = self._path_for(hex_digest)
        with self._lock:
            if hex_digest in self._index and path.exists():
                return cid
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".put-")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(blob)
                os.replace(tmp, path)
            finally:
                if os.path.exists(tmp):
                    os.unlink(tmp)
            self._index.add(hex_digest)
        return cid

    def get(self, cid: str) -> bytes:
        """Return the exact original bytes, re-verifying the digest on read."""
        hex_digest = check_cid(cid)
        path = self._path_for(hex_digest)
        if not path.is_file():
            raise NotFound(f"no blob stored for {cid}")
        blob = path.read_bytes()
        if hashlib.sha256(blob).hexdigest() != hex_digest:
            raise IntegrityError(f"stored bytes for {cid} fail digest recomputation")
        return blob

    def __contains__(self, cid: str) -> bool:
        try:
            hex_digest = check_cid(cid)
        except ValueError:
            return False
        return self._path_for(hex_digest).is_file()

    def __len__(self) -> int:
        return sum(1 for _ in self._objects.glob("??/*"))

    def cids(self) -> list[str]:
        return sorted(CID_PREFIX + path.name for path in self._objects.glob("??/*"))

    def blobs(self):
        """Iterate (cid, raw bytes) without digest verification, for audits/scans."""
        for path in sorted(self._objects.glob("??/*")):
            yield CID_PREFIX + path.name, path.read_bytes()

    def audit(self) -> list[str]:
        """Full-scan address audit; returns cids whose bytes fail recomputation."""
        mismatched = []
        for cid, blob in self.blobs():
            if compute_cid(blob) != cid:
                mismatched.append(cid)
        return mismatched
