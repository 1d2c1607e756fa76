"""Regenerate the bundled 94 KB sample CTI report.

The report's segmented payload bytes must total exactly 96,256 (94 KB):
50 objects contribute 4 length-prefix bytes each, so the JSON payloads are
sized to sum to 96,056. Deterministic, so the checked-in fixture is stable.
"""

from __future__ import annotations

import json
from pathlib import Path

from ctishare.model import object_payload_bytes, parse_bundle, segment
from ctishare.rng import ByteStream

TOTAL = 96_256
OBJECTS = 50
TYPES = ("indicator", "malware", "attack_pattern", "vulnerability", "relationship")
# {"data":""} serializes to 11 bytes around the value string.
JSON_OVERHEAD = 11


def main() -> None:
    payload_total = TOTAL - 4 * OBJECTS
    base, remainder = divmod(payload_total, OBJECTS)
    stream = ByteStream("sample-report")

    objects = []
    for i in range(OBJECTS):
        size = base + (1 if i < remainder else 0)
        text_len = size - JSON_OVERHEAD
        text = stream.take((text_len + 1) // 2).hex()[:text_len]
        value = {"data": text}
        assert len(object_payload_bytes(value)) == size
        objects.append(
            {
                "id": f"obj-{i:03d}",
                "type": TYPES[i % len(TYPES)],
                "level": i,
                "payload": value,
            }
        )

    doc = {
        "bundle_id": "sample-report",
        "metadata": {
            "threat_type": "ransomware",
            "created_at": "2023-06-15T10:00:00Z",
        },
        "objects": objects,
    }
    raw = json.dumps(doc, indent=1).encode()

    groups = segment(parse_bundle(raw))
    total = sum(len(g.payload) for g in groups)
    assert total == TOTAL, f"segmented payload is {total} bytes, wanted {TOTAL}"

    out = Path(__file__).resolve().parents[1] / "src" / "ctishare" / "data" / "sample_bundle.json"
    out.write_bytes(raw + b"\n")
    print(f"wrote {out} ({len(raw)} bytes JSON, {total} payload bytes, {len(groups)} groups)")


if __name__ == "__main__":
    main()
