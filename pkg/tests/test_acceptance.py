"""Acceptance checks for the full framework, one test per criterion.

Each criterion gets a pass/fail line in the terminal summary (see conftest).
Timing-based checks assert orderings and ratio bands, not absolute
milliseconds, so they hold across hardware.
"""

from __future__ import annotations

import hashlib
import json
import time

import pytest

from ctishare.bench import full_grid, run_matrix, sample_case
from ctishare.envelope import keygen
from ctishare.integrity import (
    DisclosurePackage,
    HashScheme,
    draw_nonces,
    generate_hashes,
    validate,
)
from ctishare.ledger import (
    AlreadyResponded,
    GasModel,
    Ledger,
    NotProducer,
    SelfRequest,
    replay_calls,
)
from ctishare.model import DataGroup
from ctishare.orgs import Services
from ctishare.policy import EngineRegistry, IssuerRegistry
from ctishare.rng import ByteStream
from ctishare.scenario import load_scenario_config, run_scenario
from ctishare.store import ContentStore

import conftest
from conftest import FIXTURES

conftest.register_criterion(
    "test_criterion_1_differential_exchange", 1, "end-to-end differential exchange"
)
conftest.register_criterion("test_criterion_2_tamper_soundness", 2, "exhaustive tamper soundness")
conftest.register_criterion("test_criterion_3_comparison_counts", 3, "validation comparison counts")
conftest.register_criterion("test_criterion_4_gas_totals", 4, "calibrated gas totals")
conftest.register_criterion("test_criterion_5_timing_trends", 5, "benchmark timing trends")
conftest.register_criterion("test_criterion_6_privacy", 6, "published-artifact privacy")
conftest.register_criterion("test_criterion_7_store_ledger_properties", 7, "store and ledger properties")


def test_criterion_1_differential_exchange():
    """Trust 0.9 gets levels {1,2,3}, trust 0.5 gets {1}; both validate; < 5 s."""
    config = load_scenario_config(FIXTURES / "two_consumers.json")
    start = time.perf_counter()
    transcript = run_scenario(config)
    elapsed = time.perf_counter() - start

    reports = {org: report for (org, _), report in transcript.reports().items()}
    assert sorted(reports["nordbank-soc"].per_index) == [1, 2, 3]
    assert sorted(reports["cityu-lab"].per_index) == [1]
    assert all(report.ok for report in reports.values())
    assert elapsed < 5.0, f"scenario took {elapsed:.2f}s"


def test_criterion_2_tamper_soundness():
    """Every single-byte flip in disclosed groups or nonces must be detected."""
    start = time.perf_counter()
    group_size = 1024
    payloads = [ByteStream(f"tamper-{i}").take(group_size) for i in range(5)]
    groups = tuple(DataGroup(level=i + 1, payload=p) for i, p in enumerate(payloads))
    nonces = draw_nonces(5, b"tamper-nonces")

    flips = detections = 0
    for scheme in HashScheme:
        published = generate_hashes(groups, nonces, scheme)

        def package(current_groups, current_nonces):
            disclosed = tuple((g.level, g) for g in current_groups)
            if scheme is HashScheme.SINGLE:
                pkg_nonces = tuple((i + 1, current_nonces[i]) for i in range(5))
            else:
                pkg_nonces = ((5, current_nonces[4]),)
            return DisclosurePackage(scheme=scheme, groups=disclosed, nonces=pkg_nonces)

        assert validate(package(groups, nonces), published).ok

        for gi in range(5):
            for pos in range(group_size):
                mutated = bytearray(payloads[gi])
                mutated[pos] ^= 0xFF
                tampered = list(groups)
                tampered[gi] = DataGroup(level=gi + 1, payload=bytes(mutated))
                flips += 1
                detections += not validate(package(tuple(tampered), nonces), published).ok

        disclosed_nonce_indices = range(5) if scheme is HashScheme.SINGLE else [4]
        for ni in disclosed_nonce_indices:
            for pos in range(32):
                mutated = bytearray(nonces[ni])
                mutated[pos] ^= 0xFF
                tampered_nonces = list(nonces)
                tampered_nonces[ni] = bytes(mutated)
                flips += 1
                detections += not validate(package(groups, tampered_nonces), published).ok

    elapsed = time.perf_counter() - start
    assert flips == 2 * 5 * group_size + 5 * 32 + 32
    assert detections == flips, f"{flips - detections} flips went undetected"
    assert elapsed < 60.0, f"exhaustive tamper scan took {elapsed:.2f}s"


@pytest.mark.parametrize("k", range(0, 6))
def test_criterion_3_comparison_counts(k):
    """k disclosed groups: exactly k comparisons single-hash, exactly 1 multi-hash."""
    payloads = [ByteStream(f"cmp-{i}").take(64) for i in range(5)]
    groups = tuple(DataGroup(level=i + 1, payload=p) for i, p in enumerate(payloads))
    nonces = draw_nonces(5, b"cmp-nonces")

    for scheme, expected in ((HashScheme.SINGLE, k), (HashScheme.MULTI, 1 if k else 0)):
        published = generate_hashes(groups, nonces, scheme)
        disclosed = tuple((g.level, g) for g in groups[:k])
        if scheme is HashScheme.SINGLE:
            pkg_nonces = tuple((i + 1, nonces[i]) for i in range(k))
        else:
            pkg_nonces = ((k, nonces[k - 1]),) if k else ()
        report = validate(
            DisclosurePackage(scheme=scheme, groups=disclosed, nonces=pkg_nonces), published
        )
        assert report.ok
        assert report.comparisons_performed == expected


def test_criterion_4_gas_totals(tmp_path):
    """share + request + respond = 43,897 + 66,628 + 50,625 = 161,150 gas."""
    from ctishare.orgs import Organisation
    from ctishare.policy import make_issuer, policy_from_json

    from conftest import simple_bundle

    services = Services(
        ledger=Ledger(gas_model=GasModel.CALIBRATED),
        store=ContentStore(tmp_path / "store"),
        issuers=IssuerRegistry(),
        engines=EngineRegistry(),
    )
    issuer = make_issuer("authority", ByteStream(b"gas-issuer"))
    services.issuers.register(issuer.issuer_id, issuer.public_key)
    producer = Organisation.create("producer", services, rng=ByteStream(b"gas-p"))
    consumer = Organisation.create("consumer", services, rng=ByteStream(b"gas-c"))

    policy = policy_from_json(
        {"policy_id": "open", "scheme": "single", "rules": [{"id": "all", "grant": [1, 2]}]}
    )
    share_id = producer.produce_share(simple_bundle(levels=2), policy, HashScheme.SINGLE)
    request_id = consumer.submit_request(share_id, issuer.sign("consumer", {}))
    producer.process_request(request_id)
    assert consumer.consume_response(request_id).ok

    receipts = {r.function: r.gas_used for r in producer.gas_log + consumer.gas_log}
    assert receipts == {"share": 43_897, "request": 66_628, "respond": 50_625}
    assert producer.gas_total + consumer.gas_total == 161_150


def test_criterion_5_timing_trends():
    """Sample-data trends: multi/single generation ratio, monotone growth,
    validation ordering, exact byte counts; full matrix under 5 minutes."""
    start = time.perf_counter()
    report = run_matrix(full_grid(iterations=200), reps=3)
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0, f"matrix took {elapsed:.1f}s"
    assert len(report.rows) == 24

    sample = {
        (row["groups"], row["scheme"]): row for row in report.rows if row["data_kind"] == "sample"
    }
    ratio = sample[(50, "multi")]["gen_ms"] / sample[(50, "single")]["gen_ms"]
    assert 4.0 <= ratio <= 20.0, f"gen(multi)/gen(single) at 50 groups = {ratio:.2f}"

    single_gen = [sample[(g, "single")]["gen_ms"] for g in (10, 20, 50)]
    assert single_gen[0] < single_gen[1] < single_gen[2], f"not monotone: {single_gen}"

    for g in (20, 50):
        assert sample[(g, "single")]["val_ms"] >= sample[(g, "multi")]["val_ms"], (
            f"val ordering violated at {g} groups"
        )

    assert all(row["check_bytes_model"] == "pass" for row in report.rows)


def test_criterion_6_privacy():
    """Nothing sensitive in public artifacts; salted digests resist guessing."""
    import base64

    from ctishare.orgs import decode_public_blob

    config = load_scenario_config(FIXTURES / "two_consumers.json")
    transcript = run_scenario(config)
    services = transcript.services

    secrets: list[bytes] = []
    published: set[bytes] = set()
    for org in transcript.orgs.values():
        for state in org.data_manager.produced.values():
            for sensitive_group in state.groups:
                secrets.append(sensitive_group.payload)
            secrets.extend(state.nonces)
            _, hashes, _ = decode_public_blob(services.store.get(state.cid_public))
            published.update(hashes.digests)
    assert secrets and published

    # Public surfaces: every ledger record and event, every stored blob.
    # Sealed response blobs are included: ciphertext must not leak either.
    surfaces = [line.encode() for line in services.ledger.snapshot_lines()]
    surfaces += [json.dumps(e.data).encode() for e in services.ledger.events_since(0)]
    surfaces += [blob for _, blob in services.store.blobs()]
    for secret in secrets:
        encodings = (secret, secret.hex().encode(), base64.b64encode(secret))
        for surface in surfaces:
            for encoded in encodings:
                assert encoded not in surface

    # Dictionary attack: hash 10^5 low-entropy candidates (including the true
    # plaintexts, framed and raw) without the nonce; none may match.
    candidates: list[bytes] = []
    for org in transcript.orgs.values():
        for state in org.data_manager.produced.values():
            for sensitive_group in state.groups:
                candidates.append(sensitive_group.payload)
                candidates.append(
                    len(sensitive_group.payload).to_bytes(4, "big") + sensitive_group.payload
                )
    stream = ByteStream(b"dictionary")
    while len(candidates) < 100_000:
        candidates.append(b"indicator-" + stream.take(6).hex().encode())
    matches = sum(1 for c in candidates if hashlib.sha256(c).digest() in published)
    assert len(candidates) == 100_000
    assert matches == 0

    # Identical content shared twice: fresh nonces force disjoint digest sets.
    producer = transcript.orgs["acme-cert"]
    states = list(producer.data_manager.produced.values())
    spec = config.shares[0]
    second_id = producer.produce_share(spec.bundle, spec.policy, spec.scheme)
    first_state, second_state = states[0], producer.data_manager.produced[second_id]
    first_set = generate_hashes(first_state.groups, first_state.nonces, first_state.scheme)
    second_set = generate_hashes(second_state.groups, second_state.nonces, second_state.scheme)
    assert [g.payload for g in first_state.groups] == [g.payload for g in second_state.groups]
    assert set(first_set.digests).isdisjoint(second_set.digests)


def test_criterion_7_store_ledger_properties(tmp_path):
    """Store roundtrips and audits; ledger replays deterministically; the
    authorization errors carry their names."""
    store = ContentStore(tmp_path / "store")
    stream = ByteStream(b"blobs")
    stored = []
    for i in range(1_000):
        blob = stream.take(1 + (i * 37) % 2048)
        stored.append((store.put(blob), blob))
    for cid, blob in stored:
        assert store.get(cid) == blob
    assert store.audit() == []

    config = load_scenario_config(FIXTURES / "two_consumers.json")
    first = run_scenario(config).services.ledger
    second = run_scenario(config).services.ledger
    assert [(e.kind, e.data) for e in first.events_since(0)] == [
        (e.kind, e.data) for e in second.events_since(0)
    ]
    assert first.state_digest() == second.state_digest()

    trace = [{"op": "register", "pubkey": keygen(b"replay").public_key.hex()}]
    assert replay_calls(trace) == replay_calls(trace)

    ledger = Ledger()
    producer = ledger.register_org(keygen(b"auth-p").public_key)
    consumer = ledger.register_org(keygen(b"auth-c").public_key)
    metadata = {"threat_type": "phishing"}
    share_id, _ = ledger.share(producer, "sha256:" + "0" * 64, metadata)
    with pytest.raises(SelfRequest):
        ledger.request(producer, share_id, "sha256:" + "1" * 64)
    request_id, _ = ledger.request(consumer, share_id, "sha256:" + "1" * 64)
    with pytest.raises(NotProducer):
        ledger.respond(consumer, request_id, "sha256:" + "2" * 64)
    ledger.respond(producer, request_id, "sha256:" + "2" * 64)
    with pytest.raises(AlreadyResponded):
        ledger.respond(producer, request_id, "sha256:" + "3" * 64)
