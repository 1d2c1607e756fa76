"""Seeded multi-organisation scenario runner.

A scenario config names the organisations, the shares to publish, and a
request matrix. The run is driven by one deterministic byte stream: key
generation, nonce draws, and envelope ephemerals all consume it in program
order, so two runs with the same seed produce byte-identical transcripts.
The transcript is JSON lines: one meta line, then organisations, ledger
events, manager actions, validation reports, and a gas summary.
"""

from __future__ import annotations

import json
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .integrity import HashScheme
from .ledger import GasModel, Ledger
from .model import CtiBundle, parse_bundle
from .orgs import Organisation, Services
from .policy import (
    AccessPolicy,
    CredentialSet,
    EngineRegistry,
    IssuerRegistry,
    make_issuer,
    policy_from_json,
)
from .rng import ByteStream, system_bytes
from .store import ContentStore

ISSUER_ID = "scenario-authority"


@dataclass(frozen=True)
class OrgSpec:
    org_id: str
    role: str
    attributes: dict


@dataclass(frozen=True)
class ShareSpec:
    producer: str
    bundle: CtiBundle
    policy: AccessPolicy
    scheme: HashScheme


@dataclass(frozen=True)
class RequestSpec:
    consumer: str
    share_index: int


@dataclass(frozen=True)
class ScenarioConfig:
    seed: str | None
    gas_model: GasModel
    orgs: tuple[OrgSpec, ...]
    shares: tuple[ShareSpec, ...]
    requests: tuple[RequestSpec, ...]


def _load_relative(value: object, base_dir: Path, what: str) -> dict:
    """Inline object, or a path string resolved against the config's directory."""
    if isinstance(value, dict):
        return value
    if isinstance(value, str):
        path = base_dir / value
        if not path.is_file():
            raise ConfigError(f"{what} file not found: {path}")
        return json.loads(path.read_text())
    raise ConfigError(f"{what} must be an object or a path string, got {type(value).__name__}")


def parse_scenario_config(doc: dict, base_dir: Path) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ConfigError("scenario config must be a JSON object")
    try:
        raw_orgs = doc["organisations"]
        raw_shares = doc["shares"]
        raw_requests = doc["requests"]
    except KeyError as exc:
        raise ConfigError(f"scenario config missing key {exc}") from exc

    try:
        gas_model = GasModel(doc.get("gas_model", "calibrated"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    orgs = []
    for raw in raw_orgs:
        role = raw.get("role")
        if role not in ("producer", "consumer"):
            raise ConfigError(f"organisation {raw.get('id')!r} has unknown role {role!r}")
        orgs.append(OrgSpec(org_id=raw["id"], role=role, attributes=dict(raw.get("attributes", {}))))
    ids = [o.org_id for o in orgs]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"duplicate organisation ids in {ids}")
    by_id = {o.org_id: o for o in orgs}

    shares = []
    for raw in raw_shares:
        producer = raw.get("producer")
        if producer not in by_id or by_id[producer].role != "producer":
            raise ConfigError(f"share names {producer!r}, which is not a configured producer")
        bundle_doc = _load_relative(raw["bundle"], base_dir, "bundle")
        policy_doc = _load_relative(raw["policy"], base_dir, "policy")
        try:
            scheme = HashScheme(raw.get("scheme", "multi"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        shares.append(
            ShareSpec(
                producer=producer,
                bundle=parse_bundle(json.dumps(bundle_doc).encode()),
                policy=policy_from_json(policy_doc),
                scheme=scheme,
            )
        )

    requests = []
    for raw in raw_requests:
        consumer = raw.get("consumer")
        if consumer not in by_id or by_id[consumer].role != "consumer":
            raise ConfigError(f"request names {consumer!r}, which is not a configured consumer")
        index = raw.get("share", 0)
        if not isinstance(index, int) or not 0 <= index < len(shares):
            raise ConfigError(f"request references share {index!r}, valid range 0..{len(shares) - 1}")
        requests.append(RequestSpec(consumer=consumer, share_index=index))

    seed = doc.get("seed")
    if seed is not None and not isinstance(seed, str):
        raise ConfigError(f"seed must be a string, got {type(seed).__name__}")
    return ScenarioConfig(
        seed=seed,
        gas_model=gas_model,
        orgs=tuple(orgs),
        shares=tuple(shares),
        requests=tuple(requests),
    )


def load_scenario_config(path: Path) -> ScenarioConfig:
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario config {path}: {exc}") from exc
    return parse_scenario_config(doc, path.parent)


class ScenarioTranscript:
    """Run result: transcript lines plus live handles for inspection."""

    def __init__(self, lines: list[str], orgs: dict[str, Organisation], services: Services):
        self.lines = lines
        self.orgs = orgs
        self.services = services
        self._tmp = None

    def to_text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def grants(self) -> dict[tuple[str, int], list[int]]:
        """(consumer org_id, request_id) → granted levels, from validation reports."""
        out = {}
        for org in self.orgs.values():
            for request_id, report in org.data_manager.reports.items():
                out[(org.org_id, request_id)] = sorted(report.per_index)
        return out

    def reports(self) -> dict[tuple[str, int], object]:
        out = {}
        for org in self.orgs.values():
            for request_id, report in org.data_manager.reports.items():
                out[(org.org_id, request_id)] = report
        return out

    @property
    def gas_total(self) -> int:
        return sum(org.gas_total for org in self.orgs.values())


def run_scenario(config: ScenarioConfig, store_root: Path | None = None) -> ScenarioTranscript:
    """Execute the configured exchange and return its transcript.

    Poll rounds proceed over organisations in config order until a full
    round produces no actions, so producers answer requests and consumers
    validate responses without any wall-clock coupling.
    """
    seed = config.seed if config.seed is not None else system_bytes(16).hex()
    stream = ByteStream(seed)

    tmp = None
    if store_root is None:
        tmp = tempfile.TemporaryDirectory(prefix="ctishare-scenario-")
        store_root = Path(tmp.name)

    services = Services(
        ledger=Ledger(gas_model=config.gas_model),
        store=ContentStore(store_root),
        issuers=IssuerRegistry(),
        engines=EngineRegistry(),
    )
    issuer = make_issuer(ISSUER_ID, stream)
    services.issuers.register(issuer.issuer_id, issuer.public_key)

    lines: list[str] = []

    def emit(record: dict):
        lines.append(json.dumps(record, sort_keys=True, separators=(",", ":")))

    emit(
        {
            "record": "meta",
            "seed": seed,
            "gas_model": config.gas_model.value,
            "organisations": len(config.orgs),
            "shares": len(config.shares),
            "requests": len(config.requests),
        }
    )

    orgs: dict[str, Organisation] = {}
    credentials: dict[str, CredentialSet] = {}
    for spec in config.orgs:
        org = Organisation.create(spec.org_id, services, rng=stream)
        orgs[spec.org_id] = org
        if spec.role == "consumer":
            credentials[spec.org_id] = issuer.sign(spec.org_id, spec.attributes)
        emit({"record": "org", "id": spec.org_id, "role": spec.role, "address": org.address})

    share_ids = []
    for spec in config.shares:
        share_id = orgs[spec.producer].produce_share(spec.bundle, spec.policy, spec.scheme)
        share_ids.append(share_id)
        record = services.ledger.get_share(share_id)
        emit(
            {
                "record": "share",
                "share_id": share_id,
                "producer": spec.producer,
                "scheme": spec.scheme.value,
                "cid": record.cid_public,
            }
        )

    for spec in config.requests:
        request_id = orgs[spec.consumer].submit_request(
            share_ids[spec.share_index], credentials[spec.consumer]
        )
        emit(
            {
                "record": "request",
                "request_id": request_id,
                "share_id": share_ids[spec.share_index],
                "consumer": spec.consumer,
            }
        )

    # Event-driven phase: keep polling until a full round is quiet.
    while True:
        acted = False
        for spec in config.orgs:
            for action in orgs[spec.org_id].poll():
                acted = True
                emit({"record": "action", **action})
        if not acted:
            break

    for event in services.ledger.events_since(0):
        emit({"record": "event", "seq": event.seq, "kind": event.kind, "data": event.data})

    for spec in config.orgs:
        org = orgs[spec.org_id]
        for request_id in sorted(org.data_manager.reports):
            emit(
                {
                    "record": "report",
                    "org": spec.org_id,
                    "request_id": request_id,
                    "report": org.data_manager.reports[request_id].to_json(),
                }
            )

    per_function: dict[str, int] = {}
    total = 0
    for spec in config.orgs:
        org = orgs[spec.org_id]
        for receipt in org.gas_log:
            per_function[receipt.function] = per_function.get(receipt.function, 0) + receipt.gas_used
            total += receipt.gas_used
        emit({"record": "gas", "org": spec.org_id, "total": org.gas_total})
    emit(
        {
            "record": "gas_summary",
            "per_function": {k: per_function[k] for k in sorted(per_function)},
            "total": total,
        }
    )

    transcript = ScenarioTranscript(lines, orgs, services)
    transcript._tmp = tmp
    return transcript
