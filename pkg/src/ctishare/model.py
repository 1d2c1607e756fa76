"""CTI bundles, sensitivity segmentation, and canonical byte serialization.

A bundle is a CTI report whose objects carry producer-assigned sensitivity
levels. Level 0 is the non-sensitive group published in clear; levels 1..N
are the sensitive groups that feed the integrity-hash schemes. All hashing
operates on the canonical bytes produced here, so serialization must be
deterministic: objects are sorted by id inside a group and every payload is
length-prefixed.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from datetime import datetime

from .errors import CtiShareError

OBJECT_TYPES = (
    "indicator",
    "malware",
    "attack_pattern",
    "vulnerability",
    "identity",
    "relationship",
    "other",
)


class EmptyBundle(CtiShareError):
    """Bundle contains no objects."""


class MissingLevel(CtiShareError):
    """Sensitivity levels are not the contiguous set {0..N}."""


class DuplicateObjectId(CtiShareError):
    """Two objects in one bundle share an object id."""


class SchemaError(CtiShareError):
    """Bundle document violates the JSON schema; carries a JSON-pointer path."""

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{message} (at {pointer or '/'})")
        self.pointer = pointer or "/"


@dataclass(frozen=True)
class CtiObject:
    """One typed CTI object: opaque payload bytes identified within a bundle."""

    object_id: str
    object_type: str
    payload: bytes

    def __post_init__(self):
        if not self.object_id:
            raise SchemaError("object_id must be non-empty")
        if self.object_type not in OBJECT_TYPES:
            raise SchemaError(f"unknown object type {self.object_type!r}")
        if len(self.payload) < 1:
            raise SchemaError(f"payload of {self.object_id!r} must be at least 1 byte")


@dataclass(frozen=True)
class CtiBundle:
    """A CTI report: metadata plus objects labeled with sensitivity levels."""

    bundle_id: str
    metadata: dict[str, str]
    objects: tuple[tuple[CtiObject, int], ...]

    def __post_init__(self):
        seen: set[str] = set()
        for obj, level in self.objects:
            if obj.object_id in seen:
                raise DuplicateObjectId(f"duplicate object id {obj.object_id!r}")
            seen.add(obj.object_id)
            if level < 0:
                raise SchemaError(f"negative sensitivity level on {obj.object_id!r}")

    @property
    def levels(self) -> set[int]:
        return {level for _, level in self.objects}

    @property
    def max_level(self) -> int:
        return max(self.levels, default=0)


@dataclass(frozen=True)
class DataGroup:
    """Concatenated member objects of one sensitivity level."""

    level: int
    payload: bytes

    def __post_init__(self):
        if len(self.payload) < 1:
            raise SchemaError(f"group {self.level} payload must be at least 1 byte")


def _u32(n: int) -> bytes:
    return struct.pack(">I", n)


def segment(bundle: CtiBundle) -> list[DataGroup]:
    """Split a bundle into groups ordered by level 0..N.

    Each group payload is the concatenation, over member objects sorted by
    object_id, of the u32 big-endian payload length followed by the payload.
    Re-segmenting the same bundle is byte-identical.
    """
    if not bundle.objects:
        raise EmptyBundle(f"bundle {bundle.bundle_id!r} has no objects")
    levels = bundle.levels
    top = max(levels)
    missing = set(range(top + 1)) - levels
    if missing:
        raise MissingLevel(
            f"bundle {bundle.bundle_id!r} missing levels {sorted(missing)}; "
            f"levels must be contiguous 0..{top}"
        )
    groups: list[DataGroup] = []
    for level in range(top + 1):
        members = sorted(
            (obj for obj, lvl in bundle.objects if lvl == level),
            key=lambda o: o.object_id,
        )
        payload = b"".join(_u32(len(o.payload)) + o.payload for o in members)
        groups.append(DataGroup(level=level, payload=payload))
    return groups


def canonical_bytes(group: DataGroup) -> bytes:
    """Length-prefixed group payload: u32 big-endian length, then the bytes.

    The prefix makes the encoding injective over payloads, so hashing
    concatenated canonical forms cannot collide across group boundaries.
    """
    return _u32(len(group.payload)) + group.payload


def object_payload_bytes(value) -> bytes:
    """Serialize a JSON payload value to bytes: compact separators, sorted keys."""
    return json.dumps(value, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _require(condition: bool, message: str, pointer: str):
    if not condition:
        raise SchemaError(message, pointer)


def _check_rfc3339(value: str, pointer: str):
    try:
        datetime.fromisoformat(value.replace("Z", "+00:00"))
    except ValueError:
        raise SchemaError(f"created_at {value!r} is not an RFC3339 timestamp", pointer)


def parse_bundle(document: bytes) -> CtiBundle:
    """Parse and validate a bundle JSON document.

    Raises SchemaError with the JSON-pointer path of the offending field,
    or DuplicateObjectId when two objects share an id.
    """
    try:
        doc = json.loads(document.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"document is not UTF-8 JSON: {exc}") from exc
    _require(isinstance(doc, dict), "document must be a JSON object", "")
    _require(isinstance(doc.get("bundle_id"), str) and doc["bundle_id"] != "", "bundle_id must be a non-empty string", "/bundle_id")

    meta = doc.get("metadata")
    _require(isinstance(meta, dict), "metadata must be an object", "/metadata")
    for key, value in meta.items():
        _require(isinstance(value, str), f"metadata[{key!r}] must be a string", f"/metadata/{key}")
    _require("threat_type" in meta, "metadata must contain threat_type", "/metadata/threat_type")
    _require("created_at" in meta, "metadata must contain created_at", "/metadata/created_at")
    _check_rfc3339(meta["created_at"], "/metadata/created_at")

    raw_objects = doc.get("objects")
    _require(isinstance(raw_objects, list) and raw_objects, "objects must be a non-empty array", "/objects")

    objects: list[tuple[CtiObject, int]] = []
    seen: set[str] = set()
    for i, raw in enumerate(raw_objects):
        ptr = f"/objects/{i}"
        _require(isinstance(raw, dict), "object must be a JSON object", ptr)
        _require(isinstance(raw.get("id"), str) and raw["id"] != "", "id must be a non-empty string", f"{ptr}/id")
        _require(raw.get("type") in OBJECT_TYPES, f"type must be one of {OBJECT_TYPES}", f"{ptr}/type")
        _require(isinstance(raw.get("level"), int) and not isinstance(raw["level"], bool) and raw["level"] >= 0, "level must be a non-negative integer", f"{ptr}/level")
        _require("payload" in raw, "payload is required", f"{ptr}/payload")
        if raw["id"] in seen:
            raise DuplicateObjectId(f"duplicate object id {raw['id']!r} (at {ptr}/id)")
        seen.add(raw["id"])
        obj = CtiObject(
            object_id=raw["id"],
            object_type=raw["type"],
            payload=object_payload_bytes(raw["payload"]),
        )
        objects.append((obj, raw["level"]))

    return CtiBundle(bundle_id=doc["bundle_id"], metadata=dict(meta), objects=tuple(objects))
