"""Organisation actors and the share/request/respond/validate protocol.

Each organisation owns a keypair, a ledger address, and three managers:
the data manager keeps private CTI (producer share states, validated
results), the access manager verifies credentials and evaluates policy,
and the request manager tracks outgoing requests. Organisations interact
only through the ledger and the content store; sensitive groups and
nonces leave a producer solely inside sealed response packages.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field

from .envelope import KeyPair, SealedBlob, key_id_for, keygen, open_blob, seal
from .integrity import (
    DisclosurePackage,
    HashScheme,
    IntegrityHashSet,
    ValidationReport,
    draw_nonces,
    generate_hashes,
    validate,
)
from .ledger import (
    AlreadyResponded,
    GasReceipt,
    Ledger,
    NotProducer,
    SelfRequest,
    derive_address,
)
from .model import CtiBundle, DataGroup, segment
from .policy import (
    AccessPolicy,
    BadSignature,
    CredentialSet,
    EngineRegistry,
    IssuerRegistry,
    PolicyShapeError,
    is_prefix_set,
    policy_from_json,
    verify_credentials,
)
from .rng import ByteStream
from .store import ContentStore, NotFound

PUBLIC_BLOB_KIND = "public-share"
RESPONSE_KIND = "cti-response"
WIRE_VERSION = 1


@dataclass
class Services:
    """Shared substrate one deployment's organisations operate against."""

    ledger: Ledger
    store: ContentStore
    issuers: IssuerRegistry
    engines: EngineRegistry = field(default_factory=EngineRegistry)


# -- wire formats ---------------------------------------------------------------


def encode_public_blob(non_sensitive: bytes, hashes: IntegrityHashSet, public_policy: dict) -> bytes:
    doc = {
        "kind": PUBLIC_BLOB_KIND,
        "version": WIRE_VERSION,
        "non_sensitive": base64.b64encode(non_sensitive).decode(),
        "hashes": hashes.to_json(),
        "policy": public_policy,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def decode_public_blob(raw: bytes) -> tuple[bytes, IntegrityHashSet, dict]:
    doc = json.loads(raw)
    if doc.get("kind") != PUBLIC_BLOB_KIND:
        raise ValueError(f"expected a {PUBLIC_BLOB_KIND} blob, got {doc.get('kind')!r}")
    non_sensitive = base64.b64decode(doc["non_sensitive"])
    return non_sensitive, IntegrityHashSet.from_json(doc["hashes"]), doc["policy"]


def encode_response_package(share_id: int, package: DisclosurePackage) -> bytes:
    """Plaintext response body; share_id is bound inside so a response sealed
    for one share cannot be replayed as the answer to another."""
    doc = {
        "kind": RESPONSE_KIND,
        "version": WIRE_VERSION,
        "share_id": share_id,
        "scheme": package.scheme.value,
        "groups": [
            {"level": level, "data": base64.b64encode(group.payload).decode()}
            for level, group in package.groups
        ],
        "nonces": [
            {"index": index, "nonce": base64.b64encode(nonce).decode()}
            for index, nonce in package.nonces
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


def decode_response_package(raw: bytes) -> tuple[int, DisclosurePackage]:
    doc = json.loads(raw)
    if doc.get("kind") != RESPONSE_KIND:
        raise ValueError(f"expected a {RESPONSE_KIND} package, got {doc.get('kind')!r}")
    groups = tuple(
        (entry["level"], DataGroup(level=entry["level"], payload=base64.b64decode(entry["data"])))
        for entry in doc["groups"]
    )
    nonces = tuple((entry["index"], base64.b64decode(entry["nonce"])) for entry in doc["nonces"])
    package = DisclosurePackage(scheme=HashScheme(doc["scheme"]), groups=groups, nonces=nonces)
    return doc["share_id"], package


# -- private organisation state ---------------------------------------------------


@dataclass(frozen=True)
class ProducerShareState:
    """Off-chain producer side of one share: sensitive groups, nonces, full policy."""

    share_id: int
    scheme: HashScheme
    groups: tuple[DataGroup, ...]
    nonces: tuple[bytes, ...]
    policy: AccessPolicy
    cid_public: str


@dataclass(frozen=True)
class ConsumedCti:
    """Validated result a consumer retains: level → plaintext group bytes."""

    share_id: int
    levels: dict[int, bytes]
    report: ValidationReport


class DataManager:
    """Private CTI store: producer share states and consumer validated results."""

    def __init__(self):
        self.produced: dict[int, ProducerShareState] = {}
        self.consumed: dict[int, ConsumedCti] = {}
        self.reports: dict[int, ValidationReport] = {}


class AccessManager:
    """Producer-side credential verification and policy evaluation log."""

    def __init__(self):
        self.verification_failures: list[tuple[int, str]] = []
        self.decisions: dict[int, list[int]] = {}


class RequestManager:
    """Consumer-side view of this organisation's outgoing requests."""

    def __init__(self):
        self.outgoing: dict[int, int] = {}


class Organisation:
    """One participant; producer or consumer per share, never both."""

    def __init__(
        self,
        org_id: str,
        keypair: KeyPair,
        services: Services,
        rng: ByteStream | None = None,
        auto_register: bool = True,
    ):
        self.org_id = org_id
        self.keypair = keypair
        self.services = services
        self._rng = rng
        self.address = derive_address(keypair.public_key)
        if auto_register and not services.ledger.is_registered(self.address):
            services.ledger.register_org(keypair.public_key)
        self.gas_log: list[GasReceipt] = []
        self.data_manager = DataManager()
        self.access_manager = AccessManager()
        self.request_manager = RequestManager()
        self._cursor = 0
        self._roles: dict[int, str] = {}

    @classmethod
    def create(cls, org_id: str, services: Services, rng: ByteStream | None = None) -> "Organisation":
        return cls(org_id, keygen(rng), services, rng=rng)

    # -- producer ----------------------------------------------------------------

    def produce_share(self, bundle: CtiBundle, policy: AccessPolicy, scheme: HashScheme) -> int:
        """Segment, hash, publish the public blob, and record the share.

        All shape checks run before the store or ledger is touched, so a
        rejected share leaves no partial state anywhere.
        """
        scheme = HashScheme(scheme)
        if policy.scheme_kind is not scheme:
            raise PolicyShapeError(
                f"policy {policy.policy_id!r} is shaped for {policy.scheme_kind.value}, share uses {scheme.value}"
            )
        if scheme is HashScheme.MULTI:
            for rule in policy.rules:
                if not is_prefix_set(rule.grant):
                    raise PolicyShapeError(
                        f"rule {rule.rule_id!r} grant {sorted(rule.grant)} is not a prefix {{1..k}}"
                    )
        groups = segment(bundle)
        sensitive = tuple(groups[1:])
        nonces = tuple(draw_nonces(len(sensitive), self._rng))
        hashes = generate_hashes(sensitive, nonces, scheme)
        blob = encode_public_blob(groups[0].payload, hashes, policy.public_json())
        cid = self.services.store.put(blob)
        share_id, receipt = self.services.ledger.share(self.address, cid, dict(bundle.metadata))
        self.gas_log.append(receipt)
        self.data_manager.produced[share_id] = ProducerShareState(
            share_id=share_id,
            scheme=scheme,
            groups=sensitive,
            nonces=nonces,
            policy=policy,
            cid_public=cid,
        )
        self._roles[share_id] = "producer"
        return share_id

    def process_request(self, request_id: int) -> None:
        """Open credentials, decide the grant, seal the response to the consumer.

        A credential set whose signature fails verification still gets a
        response: an explicit empty grant, so the request lifecycle stays
        auditable. The failure is logged locally at the producer.
        """
        ledger = self.services.ledger
        request = ledger.get_request(request_id)
        share = ledger.get_share(request.share_id)
        if share.producer != self.address:
            raise NotProducer(f"share {share.share_id} was produced by {share.producer}, not this org")
        if ledger.has_response(request_id):
            raise AlreadyResponded(f"request {request_id} already has a response")
        state = self.data_manager.produced[request.share_id]

        sealed = SealedBlob.from_bytes(self.services.store.get(request.cid_credentials))
        creds = CredentialSet.from_json(json.loads(open_blob(self.keypair.private_key, sealed)))
        try:
            verified = verify_credentials(creds, self.services.issuers)
        except BadSignature:
            self.access_manager.verification_failures.append((request_id, "bad-signature"))
            levels: list[int] = []
        else:
            decision = self.services.engines.evaluate(state.policy, verified)
            # a policy can grant deeper than this share goes; cap at N
            levels = sorted(k for k in decision.levels if k <= len(state.groups))
        self.access_manager.decisions[request_id] = levels

        disclosed = tuple((k, state.groups[k - 1]) for k in levels)
        if state.scheme is HashScheme.SINGLE:
            nonces = tuple((k, state.nonces[k - 1]) for k in levels)
        else:
            nonces = ((levels[-1], state.nonces[levels[-1] - 1]),) if levels else ()
        package = DisclosurePackage(scheme=state.scheme, groups=disclosed, nonces=nonces)

        plaintext = encode_response_package(request.share_id, package)
        consumer_key = ledger.public_key_of(request.consumer)
        blob = seal(consumer_key, plaintext, self._rng)
        cid = self.services.store.put(blob.to_bytes())
        receipt = ledger.respond(self.address, request_id, cid)
        self.gas_log.append(receipt)

    # -- consumer ----------------------------------------------------------------

    def submit_request(self, share_id: int, creds: CredentialSet) -> int:
        """Seal credentials to the producer's key and record the request."""
        if self._roles.get(share_id) == "producer":
            raise SelfRequest(f"this org produced share {share_id}")
        ledger = self.services.ledger
        share = ledger.get_share(share_id)
        producer_key = ledger.public_key_of(share.producer)
        plaintext = json.dumps(creds.to_json(), sort_keys=True, separators=(",", ":")).encode()
        blob = seal(producer_key, plaintext, self._rng)
        cid = self.services.store.put(blob.to_bytes())
        request_id, receipt = ledger.request(self.address, share_id, cid)
        self.gas_log.append(receipt)
        self.request_manager.outgoing[request_id] = share_id
        self._roles[share_id] = "consumer"
        return request_id

    def consume_response(self, request_id: int) -> ValidationReport:
        """Open the response, fetch the published hashes, and validate.

        Validation failure is an outcome carried in the report, not an
        exception; the consumer keeps plaintext only when the report passes.
        """
        ledger = self.services.ledger
        response = ledger.get_response(request_id)
        if response is None:
            raise NotFound(f"no response recorded for request {request_id}")
        request = ledger.get_request(request_id)
        share = ledger.get_share(request.share_id)

        sealed = SealedBlob.from_bytes(self.services.store.get(response.cid_response))
        bound_share_id, package = decode_response_package(
            open_blob(self.keypair.private_key, sealed)
        )
        non_sensitive, hashes, _ = decode_public_blob(self.services.store.get(share.cid_public))

        if bound_share_id != request.share_id:
            report = ValidationReport(
                scheme=package.scheme,
                per_index={level: False for level in package.levels},
                comparisons_performed=0,
                ok=False,
                detail=f"response bound to share {bound_share_id}, expected {request.share_id}",
            )
        else:
            report = validate(package, hashes)

        self.data_manager.reports[request_id] = report
        if report.ok:
            plaintext_levels = {0: non_sensitive}
            for level, group in package.groups:
                plaintext_levels[level] = group.payload
            self.data_manager.consumed[request_id] = ConsumedCti(
                share_id=request.share_id, levels=plaintext_levels, report=report
            )
        return report

    # -- event loop -----------------------------------------------------------------

    def poll(self) -> list[dict]:
        """React to ledger events past this org's cursor.

        Producers answer new requests against their shares; consumers
        validate new responses to their requests. Returns one action record
        per reaction for transcripts.
        """
        actions = []
        for event in self.services.ledger.events_since(self._cursor):
            self._cursor = event.seq
            if event.kind == "RequestAdded":
                request_id = event.data["request_id"]
                if (
                    event.data["share_id"] in self.data_manager.produced
                    and not self.services.ledger.has_response(request_id)
                ):
                    self.process_request(request_id)
                    actions.append(
                        {
                            "org": self.org_id,
                            "action": "responded",
                            "request_id": request_id,
                            "granted_levels": self.access_manager.decisions[request_id],
                        }
                    )
            elif event.kind == "ResponseAdded":
                request_id = event.data["request_id"]
                if request_id in self.request_manager.outgoing and request_id not in self.data_manager.reports:
                    report = self.consume_response(request_id)
                    actions.append(
                        {
                            "org": self.org_id,
                            "action": "validated",
                            "request_id": request_id,
                            "ok": report.ok,
                            "levels": sorted(report.per_index),
                            "comparisons": report.comparisons_performed,
                        }
                    )
        return actions

    @property
    def gas_total(self) -> int:
        return sum(receipt.gas_used for receipt in self.gas_log)

    # -- persistence (CLI home directory) ---------------------------------------------

    def to_state(self) -> dict:
        return {
            "org_id": self.org_id,
            "public_key": self.keypair.public_key.hex(),
            "private_key": self.keypair.private_key.hex(),
            "cursor": self._cursor,
            "roles": {str(k): v for k, v in self._roles.items()},
            "produced": [
                {
                    "share_id": s.share_id,
                    "scheme": s.scheme.value,
                    "groups": [base64.b64encode(g.payload).decode() for g in s.groups],
                    "nonces": [base64.b64encode(n).decode() for n in s.nonces],
                    "policy": s.policy.to_json(),
                    "cid_public": s.cid_public,
                }
                for s in self.data_manager.produced.values()
            ],
            "outgoing": {str(k): v for k, v in self.request_manager.outgoing.items()},
            "reports": {
                str(request_id): report.to_json()
                for request_id, report in self.data_manager.reports.items()
            },
        }

    @classmethod
    def from_state(cls, state: dict, services: Services, auto_register: bool = True) -> "Organisation":
        public_key = bytes.fromhex(state["public_key"])
        keypair = KeyPair(
            public_key=public_key,
            private_key=bytes.fromhex(state["private_key"]),
            key_id=key_id_for(public_key),
        )
        org = cls(state["org_id"], keypair, services, auto_register=auto_register)
        org._cursor = state["cursor"]
        org._roles = {int(k): v for k, v in state["roles"].items()}
        for raw in state["produced"]:
            groups = tuple(
                DataGroup(level=i + 1, payload=base64.b64decode(b))
                for i, b in enumerate(raw["groups"])
            )
            org.data_manager.produced[raw["share_id"]] = ProducerShareState(
                share_id=raw["share_id"],
                scheme=HashScheme(raw["scheme"]),
                groups=groups,
                nonces=tuple(base64.b64decode(n) for n in raw["nonces"]),
                policy=policy_from_json(raw["policy"]),
                cid_public=raw["cid_public"],
            )
        org.request_manager.outgoing = {int(k): v for k, v in state["outgoing"].items()}
        org.data_manager.reports = {
            int(request_id): ValidationReport.from_json(raw)
            for request_id, raw in state.get("reports", {}).items()
        }
        return org
