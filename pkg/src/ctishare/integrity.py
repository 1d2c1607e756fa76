"""Nonce-salted integrity hash schemes and their validation.

Two schemes cover differential disclosure:

* single: one digest per sensitive group, SHA-256(nonce_i || canonical_i).
  Validating k disclosed groups recomputes and compares k digests.
* multi: cumulative prefix chain, SHA-256(nonce_k || canonical_1 .. canonical_k)
  for k = 1..N. A prefix disclosure {1..k} validates with exactly one
  comparison, at the price of hashing prefix sums at generation time.

One-time random nonces salt every digest so published hash sets leak nothing
about low-entropy group content and are disjoint across shares of identical
data.

The digest loops live in a compiled kernel (``_kernels``) with a pure-Python
fallback (``_kernels_py``); set CTISHARE_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from . import _kernels_py
from .errors import CtiShareError
from .model import DataGroup, canonical_bytes
from .rng import ByteStream, system_bytes

if os.environ.get("CTISHARE_PURE_PYTHON"):
    _kernels = _kernels_py
else:
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        _kernels = _kernels_py

NONCE_LEN = 32
HASH_FUNCTION_ID = "sha256"


def kernel_backend() -> str:
    """Name of the digest backend in use: "c" or "python"."""
    return _kernels.BACKEND


def kernel_modules() -> dict[str, object]:
    """All importable digest backends, for the backend comparison benchmark."""
    modules: dict[str, object] = {"python": _kernels_py}
    try:
        from . import _kernels as compiled  # type: ignore[attr-defined]

        modules["c"] = compiled
    except ImportError:
        pass
    return modules


class NonceCountMismatch(CtiShareError):
    """Nonces do not pair up one-to-one with the groups they must salt."""


class SchemeMismatch(CtiShareError):
    """Disclosure package scheme differs from the published hash set scheme."""


class NonPrefixDisclosure(CtiShareError):
    """Multi-hash disclosure whose levels are not a prefix {1..k}."""


class HashScheme(str, Enum):
    SINGLE = "single"
    MULTI = "multi"


@dataclass(frozen=True)
class IntegrityHashSet:
    """Published digests for the sensitive groups of one share."""

    scheme: HashScheme
    digests: tuple[bytes, ...]
    hash_function_id: str = HASH_FUNCTION_ID

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "hash": self.hash_function_id,
            "digests": [d.hex() for d in self.digests],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "IntegrityHashSet":
        scheme = HashScheme(doc["scheme"])
        digests = tuple(bytes.fromhex(h) for h in doc["digests"])
        if any(len(d) != 32 for d in digests):
            raise ValueError("digests must be 32 bytes of lowercase hex")
        return cls(scheme=scheme, digests=digests, hash_function_id=doc["hash"])


@dataclass(frozen=True)
class DisclosurePackage:
    """Groups and nonces a producer discloses to one consumer.

    Invariants, checked at construction: under the single scheme every
    disclosed level carries its own nonce; under the multi scheme the levels
    form the prefix {1..k} and exactly the nonce with index k is present.
    """

    scheme: HashScheme
    groups: tuple[tuple[int, DataGroup], ...]
    nonces: tuple[tuple[int, bytes], ...]

    def __post_init__(self):
        for level, group in self.groups:
            if group.level != level:
                raise NonPrefixDisclosure(f"group labeled {group.level} listed under level {level}")
        for index, nonce in self.nonces:
            if len(nonce) != NONCE_LEN:
                raise NonceCountMismatch(f"nonce {index} is {len(nonce)} bytes, expected {NONCE_LEN}")
        levels = [level for level, _ in self.groups]
        if len(set(levels)) != len(levels):
            raise NonPrefixDisclosure(f"duplicate disclosed levels in {levels}")
        if self.scheme is HashScheme.SINGLE:
            if {i for i, _ in self.nonces} != set(levels):
                raise NonceCountMismatch(
                    f"single-hash disclosure needs one nonce per level {sorted(levels)}, "
                    f"got indices {sorted(i for i, _ in self.nonces)}"
                )
        else:
            if sorted(levels) != list(range(1, len(levels) + 1)):
                raise NonPrefixDisclosure(f"disclosed levels {sorted(levels)} are not a prefix {{1..k}}")
            indices = [i for i, _ in self.nonces]
            if levels and indices != [len(levels)]:
                raise NonceCountMismatch(
                    f"multi-hash disclosure of prefix 1..{len(levels)} needs exactly nonce "
                    f"{len(levels)}, got indices {indices}"
                )
            if not levels and indices:
                raise NonceCountMismatch("empty disclosure must carry no nonces")

    @property
    def levels(self) -> list[int]:
        return sorted(level for level, _ in self.groups)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of checking a disclosure against the published hash set."""

    scheme: HashScheme
    per_index: dict[int, bool]
    comparisons_performed: int
    ok: bool
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "per_index": {str(k): v for k, v in sorted(self.per_index.items())},
            "comparisons": self.comparisons_performed,
            "ok": self.ok,
            "detail": self.detail,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ValidationReport":
        return cls(
            scheme=HashScheme(doc["scheme"]),
            per_index={int(k): bool(v) for k, v in doc["per_index"].items()},
            comparisons_performed=doc["comparisons"],
            ok=doc["ok"],
            detail=doc.get("detail", ""),
        )


def draw_nonces(n: int, rng_seed: bytes | ByteStream | None = None) -> list[bytes]:
    """Draw n one-time 32-byte nonces.

    Unseeded draws come from the system CSPRNG. A seed (bytes, or an existing
    ByteStream) switches to a deterministic stream for tests and scenarios.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if rng_seed is None:
        return [system_bytes(NONCE_LEN) for _ in range(n)]
    stream = rng_seed if isinstance(rng_seed, ByteStream) else ByteStream(rng_seed)
    return [stream.take(NONCE_LEN) for _ in range(n)]


def _check_generation_inputs(groups: Sequence[DataGroup], nonces: Sequence[bytes]):
    if len(nonces) != len(groups):
        raise NonceCountMismatch(f"{len(groups)} groups but {len(nonces)} nonces")
    for nonce in nonces:
        if len(nonce) != NONCE_LEN:
            raise NonceCountMismatch(f"nonce is {len(nonce)} bytes, expected {NONCE_LEN}")
    expected_levels = list(range(1, len(groups) + 1))
    if [g.level for g in groups] != expected_levels:
        raise ValueError(
            f"groups must be the ordered sensitive groups with levels {expected_levels}, "
            f"got {[g.level for g in groups]}"
        )


def generate_with_stats(
    groups: Sequence[DataGroup], nonces: Sequence[bytes], scheme: HashScheme
) -> tuple[IntegrityHashSet, int]:
    """Generate the hash set and report how many bytes were fed to SHA-256."""
    _check_generation_inputs(groups, nonces)
    canonicals = [canonical_bytes(g) for g in groups]
    if scheme is HashScheme.SINGLE:
        digests, fed = _kernels.single_digests(list(nonces), canonicals)
    else:
        digests, fed = _kernels.multi_digests(list(nonces), canonicals)
    return IntegrityHashSet(scheme=scheme, digests=tuple(digests)), fed


def generate_hashes(
    groups: Sequence[DataGroup], nonces: Sequence[bytes], scheme: HashScheme
) -> IntegrityHashSet:
    """Hash the ordered sensitive groups g_1..g_N under the chosen scheme."""
    hash_set, _ = generate_with_stats(groups, nonces, scheme)
    return hash_set


def byte_work(scheme: HashScheme, canonical_sizes: Sequence[int]) -> int:
    """Total bytes fed to the hash at generation, per the byte-work model.

    single: sum(|nonce| + |c_i|); multi: sum over k of (|nonce| + sum_{j<=k} |c_j|).
    """
    if scheme is HashScheme.SINGLE:
        return sum(NONCE_LEN + size for size in canonical_sizes)
    total = 0
    running = 0
    for size in canonical_sizes:
        running += size
        total += NONCE_LEN + running
    return total


def validate(package: DisclosurePackage, published: IntegrityHashSet) -> ValidationReport:
    """Recompute disclosed digests and compare against the published set.

    Single scheme: one recomputation and comparison per disclosed group.
    Multi scheme: one cumulative digest over the disclosed prefix, one
    comparison. An empty disclosure passes vacuously with zero comparisons.
    """
    if package.scheme is not published.scheme:
        raise SchemeMismatch(f"package scheme {package.scheme.value} vs published {published.scheme.value}")
    if not package.groups:
        return ValidationReport(scheme=package.scheme, per_index={}, comparisons_performed=0, ok=True)

    if package.scheme is HashScheme.SINGLE:
        nonce_by_level = dict(package.nonces)
        per_index: dict[int, bool] = {}
        comparisons = 0
        for level, group in sorted(package.groups):
            digest, _ = _kernels.prefix_digest(nonce_by_level[level], [canonical_bytes(group)])
            comparisons += 1
            in_range = 1 <= level <= len(published.digests)
            per_index[level] = in_range and digest == published.digests[level - 1]
        return ValidationReport(
            scheme=package.scheme,
            per_index=per_index,
            comparisons_performed=comparisons,
            ok=all(per_index.values()),
        )

    ordered = [group for _, group in sorted(package.groups)]
    k = len(ordered)
    nonce = package.nonces[0][1]
    digest, _ = _kernels.prefix_digest(nonce, [canonical_bytes(g) for g in ordered])
    matches = k <= len(published.digests) and digest == published.digests[k - 1]
    return ValidationReport(
        scheme=package.scheme,
        per_index={level: matches for level in range(1, k + 1)},
        comparisons_performed=1,
        ok=matches,
    )
