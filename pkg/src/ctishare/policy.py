"""Trust-policy engine: verified credentials in, granted group levels out.

Producers attach an access policy to each share; consumers present signed
attribute credentials. The built-in "attribute-rules" engine walks an
ordered rule list with first-match semantics and default deny; the
"identity-allowlist" engine is the same dispatch restricted to org-id
predicates. Additional engines plug in through the registry, so producers
can swap trust schemes per share.
"""

from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Mapping

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from .errors import CtiShareError
from .integrity import HashScheme
from .rng import ByteStream


class UnknownIssuer(CtiShareError):
    """Credential issuer not present in the key registry."""


class BadSignature(CtiShareError):
    """Credential signature does not verify against the issuer key."""


class PolicyShapeError(CtiShareError):
    """Policy grant incompatible with the share's hash scheme."""


class DuplicateEngineName(CtiShareError):
    """A policy engine with this name is already registered."""


class UnknownEngine(CtiShareError):
    """No registered policy engine under this name."""


AttributeValue = str | int | float


def canonical_attribute_bytes(org_id: str, attributes: Mapping[str, AttributeValue]) -> bytes:
    """Byte serialization that credential signatures cover."""
    doc = {"org_id": org_id, "attributes": dict(attributes)}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode("utf-8")


@dataclass(frozen=True)
class CredentialSet:
    """Consumer-presented attributes, signed by an issuer."""

    org_id: str
    attributes: dict[str, AttributeValue]
    issuer_id: str
    signature: bytes

    def to_json(self) -> dict:
        return {
            "org_id": self.org_id,
            "attributes": dict(self.attributes),
            "issuer_id": self.issuer_id,
            "signature": self.signature.hex(),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "CredentialSet":
        return cls(
            org_id=doc["org_id"],
            attributes=dict(doc["attributes"]),
            issuer_id=doc["issuer_id"],
            signature=bytes.fromhex(doc["signature"]),
        )


@dataclass(frozen=True)
class VerifiedCredentials:
    """Credentials whose signature checked out against a registered issuer."""

    org_id: str
    attributes: dict[str, AttributeValue]
    issuer_id: str


@dataclass(frozen=True)
class Issuer:
    """Signing authority for credentials (test PKI stand-in)."""

    issuer_id: str
    public_key: bytes
    _private_key: bytes

    def sign(self, org_id: str, attributes: Mapping[str, AttributeValue]) -> CredentialSet:
        key = Ed25519PrivateKey.from_private_bytes(self._private_key)
        signature = key.sign(canonical_attribute_bytes(org_id, attributes))
        return CredentialSet(
            org_id=org_id,
            attributes=dict(attributes),
            issuer_id=self.issuer_id,
            signature=signature,
        )


def make_issuer(issuer_id: str, seed: bytes | ByteStream | None = None) -> Issuer:
    if seed is None:
        key = Ed25519PrivateKey.generate()
        raw = key.private_bytes_raw()
    else:
        stream = seed if isinstance(seed, ByteStream) else ByteStream(seed)
        raw = stream.take(32)
        key = Ed25519PrivateKey.from_private_bytes(raw)
    return Issuer(
        issuer_id=issuer_id,
        public_key=key.public_key().public_bytes_raw(),
        _private_key=raw,
    )


class IssuerRegistry:
    """issuer_id -> verification key; populated before any evaluation."""

    def __init__(self):
        self._keys: dict[str, bytes] = {}

    def register(self, issuer_id: str, public_key: bytes):
        self._keys[issuer_id] = public_key

    def public_key_of(self, issuer_id: str) -> bytes:
        if issuer_id not in self._keys:
            raise UnknownIssuer(f"issuer {issuer_id!r} not registered")
        return self._keys[issuer_id]


def verify_credentials(creds: CredentialSet, registry: IssuerRegistry) -> VerifiedCredentials:
    """Check the issuer signature over the canonical attribute bytes."""
    public = Ed25519PublicKey.from_public_bytes(registry.public_key_of(creds.issuer_id))
    try:
        public.verify(creds.signature, canonical_attribute_bytes(creds.org_id, creds.attributes))
    except InvalidSignature:
        raise BadSignature(f"signature check failed for {creds.org_id!r} from {creds.issuer_id!r}")
    return VerifiedCredentials(
        org_id=creds.org_id,
        attributes=dict(creds.attributes),
        issuer_id=creds.issuer_id,
    )


# --- predicate trees ---------------------------------------------------------

_OPS = ("==", "!=", ">=", "<=", "in")


def eval_predicate(node: dict, creds: VerifiedCredentials) -> bool:
    """Evaluate a predicate tree against verified credentials.

    Missing attributes and type-incompatible comparisons evaluate to False
    rather than erroring, keeping default deny the worst case.
    """
    if "all" in node:
        return all(eval_predicate(child, creds) for child in node["all"])
    if "any" in node:
        return any(eval_predicate(child, creds) for child in node["any"])
    if "not" in node:
        return not eval_predicate(node["not"], creds)
    if "always" in node:
        return bool(node["always"])
    if "org" in node:
        return creds.org_id in node["org"]
    if "attr" in node:
        value = creds.attributes.get(node["attr"])
        if value is None:
            return False
        op, target = node["op"], node["value"]
        try:
            if op == "==":
                return value == target
            if op == "!=":
                return value != target
            if op == ">=":
                return value >= target
            if op == "<=":
                return value <= target
            if op == "in":
                return value in target
        except TypeError:
            return False
    raise PolicyShapeError(f"unrecognized predicate node {node!r}")


def _check_predicate_shape(node: dict, pointer: str, org_only: bool):
    if not isinstance(node, dict):
        raise PolicyShapeError(f"predicate at {pointer} must be an object")
    if "all" in node or "any" in node:
        key = "all" if "all" in node else "any"
        children = node[key]
        if not isinstance(children, list):
            raise PolicyShapeError(f"{key} at {pointer} must hold a list")
        for i, child in enumerate(children):
            _check_predicate_shape(child, f"{pointer}/{key}/{i}", org_only)
    elif "not" in node:
        _check_predicate_shape(node["not"], f"{pointer}/not", org_only)
    elif "always" in node:
        pass
    elif "org" in node:
        if not isinstance(node["org"], list):
            raise PolicyShapeError(f"org allowlist at {pointer} must be a list")
    elif "attr" in node:
        if org_only:
            raise PolicyShapeError(
                f"identity-allowlist policies may not use attribute predicates (at {pointer})"
            )
        if node.get("op") not in _OPS:
            raise PolicyShapeError(f"op at {pointer} must be one of {_OPS}")
        if "value" not in node:
            raise PolicyShapeError(f"comparison at {pointer} needs a value")
    else:
        raise PolicyShapeError(f"unrecognized predicate node at {pointer}: {node!r}")


# --- policies ----------------------------------------------------------------


def is_prefix_set(levels: frozenset[int]) -> bool:
    return sorted(levels) == list(range(1, len(levels) + 1))


@dataclass(frozen=True)
class Rule:
    """One ordered policy rule: predicate over credentials, granted levels."""

    rule_id: str
    predicate: dict
    grant: frozenset[int]
    private: bool = False


@dataclass(frozen=True)
class AccessPolicy:
    """Producer-defined disclosure rules for one share; default deny."""

    policy_id: str
    engine: str
    scheme_kind: HashScheme
    rules: tuple[Rule, ...]

    def to_json(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "engine": self.engine,
            "scheme": self.scheme_kind.value,
            "rules": [
                {
                    "id": rule.rule_id,
                    "if": rule.predicate,
                    "grant": sorted(rule.grant),
                    **({"private": True} if rule.private else {}),
                }
                for rule in self.rules
            ],
        }

    def public_json(self) -> dict:
        """Published copy: predicates of private-marked rules are withheld."""
        doc = self.to_json()
        for raw in doc["rules"]:
            if raw.pop("private", False):
                raw["if"] = {"withheld": True}
        return doc


def policy_from_json(doc: dict) -> AccessPolicy:
    """Parse and shape-check a policy document.

    Under the multi scheme every grant must be a prefix {1..k}; the offending
    rule is named in the error so CLI messages can point at it.
    """
    try:
        policy_id = doc["policy_id"]
        engine = doc.get("engine", "attribute-rules")
        scheme = HashScheme(doc["scheme"])
        raw_rules = doc["rules"]
    except (KeyError, ValueError) as exc:
        raise PolicyShapeError(f"policy document malformed: {exc}") from exc
    org_only = engine == "identity-allowlist"
    rules = []
    for i, raw in enumerate(raw_rules):
        rule_id = raw.get("id", f"rule-{i + 1}")
        grant = frozenset(raw.get("grant", []))
        if any(not isinstance(level, int) or level < 1 for level in grant):
            raise PolicyShapeError(f"rule {rule_id!r} grants non-positive levels {sorted(grant)}")
        if scheme is HashScheme.MULTI and not is_prefix_set(grant):
            raise PolicyShapeError(
                f"rule {rule_id!r} grant {sorted(grant)} is not a prefix {{1..k}}; "
                "multi-hash shares require prefix grants"
            )
        if "if" in raw:
            _check_predicate_shape(raw["if"], f"/rules/{i}/if", org_only)
        rules.append(
            Rule(
                rule_id=rule_id,
                predicate=raw.get("if", {"always": True}),
                grant=grant,
                private=bool(raw.get("private", False)),
            )
        )
    return AccessPolicy(policy_id=policy_id, engine=engine, scheme_kind=scheme, rules=tuple(rules))


@dataclass(frozen=True)
class GrantDecision:
    levels: frozenset[int]
    matched_rule: str | None = None


class PolicyEngine(ABC):
    """Pluggable trust scheme: deterministic, side-effect-free evaluation."""

    name: str

    @abstractmethod
    def evaluate(self, policy: AccessPolicy, creds: VerifiedCredentials) -> GrantDecision: ...


class FirstMatchEngine(PolicyEngine):
    """Ordered first-match rule walk with default deny."""

    name = "attribute-rules"

    def evaluate(self, policy: AccessPolicy, creds: VerifiedCredentials) -> GrantDecision:
        for rule in policy.rules:
            if eval_predicate(rule.predicate, creds):
                return GrantDecision(levels=rule.grant, matched_rule=rule.rule_id)
        return GrantDecision(levels=frozenset(), matched_rule=None)


class IdentityAllowlistEngine(FirstMatchEngine):
    """First-match over org-id allowlist rules; attribute predicates rejected at load."""

    name = "identity-allowlist"


class EngineRegistry:
    """Per-share engine selection by name; built-ins are always present."""

    def __init__(self):
        self._engines: dict[str, PolicyEngine] = {}
        for engine in (FirstMatchEngine(), IdentityAllowlistEngine()):
            self._engines[engine.name] = engine

    def register_engine(self, engine: PolicyEngine):
        if engine.name in self._engines:
            raise DuplicateEngineName(f"engine {engine.name!r} already registered")
        self._engines[engine.name] = engine

    def names(self) -> list[str]:
        return sorted(self._engines)

    def evaluate(self, policy: AccessPolicy, creds: VerifiedCredentials) -> GrantDecision:
        """Dispatch to the policy's engine and enforce scheme shape on the grant."""
        if policy.engine not in self._engines:
            raise UnknownEngine(f"policy {policy.policy_id!r} names unknown engine {policy.engine!r}")
        decision = self._engines[policy.engine].evaluate(policy, creds)
        if policy.scheme_kind is HashScheme.MULTI and not is_prefix_set(decision.levels):
            raise PolicyShapeError(
                f"engine {policy.engine!r} returned non-prefix grant {sorted(decision.levels)} "
                "for a multi-hash share"
            )
        return decision
