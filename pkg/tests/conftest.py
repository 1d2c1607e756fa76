"""Shared fixtures and the acceptance summary hook."""

from __future__ import annotations

from pathlib import Path

import pytest

from ctishare.ledger import GasModel, Ledger
from ctishare.model import CtiBundle, CtiObject
from ctishare.orgs import Organisation, Services
from ctishare.policy import EngineRegistry, Issuer, IssuerRegistry, make_issuer
from ctishare.rng import ByteStream
from ctishare.store import ContentStore

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"


@pytest.fixture
def services(tmp_path) -> Services:
    return Services(
        ledger=Ledger(gas_model=GasModel.CALIBRATED),
        store=ContentStore(tmp_path / "store"),
        issuers=IssuerRegistry(),
        engines=EngineRegistry(),
    )


@pytest.fixture
def issuer(services) -> Issuer:
    issuer = make_issuer("test-authority", ByteStream("issuer-seed"))
    services.issuers.register(issuer.issuer_id, issuer.public_key)
    return issuer


def build_bundle(level_payloads: dict[int, list[bytes]], bundle_id: str = "b-1") -> CtiBundle:
    """Bundle with the given payload bytes at each level; ids keep input order."""
    objects = []
    n = 0
    for level in sorted(level_payloads):
        for payload in level_payloads[level]:
            objects.append((CtiObject(object_id=f"o-{n:03d}", object_type="indicator", payload=payload), level))
            n += 1
    return CtiBundle(
        bundle_id=bundle_id,
        metadata={"threat_type": "test", "created_at": "2023-01-01T00:00:00Z"},
        objects=tuple(objects),
    )


def simple_bundle(levels: int, payload_size: int = 32, seed: str = "bundle") -> CtiBundle:
    """One object per level 0..levels, deterministic payloads of payload_size bytes."""
    stream = ByteStream(seed)
    return build_bundle({level: [stream.take(payload_size)] for level in range(levels + 1)})


@pytest.fixture
def two_orgs(services, issuer):
    producer = Organisation.create("producer", services, rng=ByteStream("producer-keys"))
    consumer = Organisation.create("consumer", services, rng=ByteStream("consumer-keys"))
    return producer, consumer


# -- acceptance criterion reporting ----------------------------------------------

_CRITERIA: dict[str, tuple[int, str]] = {}
_RESULTS: dict[int, tuple[str, str]] = {}


def register_criterion(nodeid_name: str, number: int, title: str):
    _CRITERIA[nodeid_name] = (number, title)


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    name = report.nodeid.rsplit("::", 1)[-1]
    base = name.split("[")[0]
    if base in _CRITERIA:
        number, title = _CRITERIA[base]
        outcome = "PASS" if report.outcome == "passed" else report.outcome.upper().replace("FAILED", "FAIL")
        _RESULTS[number] = (title, outcome)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, outcome = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number} ({title}): {outcome}")
