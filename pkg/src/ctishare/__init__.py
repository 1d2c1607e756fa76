"""Trusted differential CTI sharing: segment, hash, share, validate.

Producers split a CTI bundle into sensitivity groups, publish integrity
hashes and a policy, and disclose per-consumer subsets whose integrity any
consumer can check against the public record. Two hash schemes trade
generation cost against validation cost; a simulated ledger and content
store stand in for the chain and IPFS.
"""

from .bench import BenchCase, BenchResult, compare_backends, full_grid, run_bench, run_matrix
from .envelope import DecryptionFailure, KeyPair, SealedBlob, keygen, open_blob, seal
from .errors import ConfigError, CtiShareError
from .integrity import (
    DisclosurePackage,
    HashScheme,
    IntegrityHashSet,
    ValidationReport,
    byte_work,
    draw_nonces,
    generate_hashes,
    kernel_backend,
    validate,
)
from .ledger import GasModel, GasReceipt, Ledger, derive_address, replay_calls
from .model import CtiBundle, CtiObject, DataGroup, canonical_bytes, parse_bundle, segment
from .orgs import Organisation, Services
from .policy import (
    AccessPolicy,
    CredentialSet,
    EngineRegistry,
    Issuer,
    IssuerRegistry,
    PolicyEngine,
    make_issuer,
    policy_from_json,
    verify_credentials,
)
from .rng import ByteStream
from .scenario import ScenarioConfig, load_scenario_config, parse_scenario_config, run_scenario
from .store import ContentStore, compute_cid

__version__ = "0.1.0"

__all__ = [
    "AccessPolicy",
    "BenchCase",
    "BenchResult",
    "ByteStream",
    "ConfigError",
    "ContentStore",
    "CredentialSet",
    "CtiBundle",
    "CtiObject",
    "CtiShareError",
    "DataGroup",
    "DecryptionFailure",
    "DisclosurePackage",
    "EngineRegistry",
    "GasModel",
    "GasReceipt",
    "HashScheme",
    "IntegrityHashSet",
    "Issuer",
    "IssuerRegistry",
    "KeyPair",
    "Ledger",
    "Organisation",
    "PolicyEngine",
    "ScenarioConfig",
    "SealedBlob",
    "Services",
    "ValidationReport",
    "byte_work",
    "canonical_bytes",
    "compare_backends",
    "compute_cid",
    "derive_address",
    "draw_nonces",
    "generate_hashes",
    "keygen",
    "kernel_backend",
    "load_scenario_config",
    "make_issuer",
    "open_blob",
    "full_grid",
    "parse_bundle",
    "parse_scenario_config",
    "policy_from_json",
    "replay_calls",
    "run_bench",
    "run_matrix",
    "run_scenario",
    "seal",
    "segment",
    "validate",
    "verify_credentials",
]
