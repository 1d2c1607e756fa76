"""Operator command line.

Every subcommand is a thin wrapper over the library: no policy, hashing,
or protocol logic lives here. State for single-step commands persists in a
home directory (content store, ledger state, per-organisation files) held
under an advisory lock so concurrent CLI writers cannot interleave.

Exit codes: 0 success (including validations that report FAIL), 1 domain
error, 2 usage error.
"""

from __future__ import annotations

import fcntl
import functools
import json
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import envelope
from .bench import (
    BenchCase,
    DataKind,
    compare_backends,
    full_grid,
    run_matrix,
    sample_case,
)
from .errors import CtiShareError
from .integrity import HashScheme, kernel_backend
from .ledger import GasModel, Ledger, UnregisteredCaller, replay_calls
from .model import parse_bundle
from .orgs import Organisation, Services
from .policy import CredentialSet, EngineRegistry, Issuer, IssuerRegistry, make_issuer, policy_from_json
from .rng import ByteStream
from .scenario import load_scenario_config, run_scenario
from .store import ContentStore

DEFAULT_ISSUER = "local-authority"


class Session:
    """Locked view of one CLI home directory."""

    def __init__(self, root: Path, gas_model: str | None, seed: str | None):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "orgs").mkdir(exist_ok=True)
        self._lock = open(self.root / ".lock", "w")
        fcntl.flock(self._lock, fcntl.LOCK_EX)

        ledger_path = self.root / "ledger.json"
        if ledger_path.is_file():
            self.ledger = Ledger.from_state(json.loads(ledger_path.read_text()))
            if gas_model is not None:
                self.ledger.gas_model = GasModel(gas_model)
        else:
            self.ledger = Ledger(gas_model=GasModel(gas_model or "calibrated"))

        self.stream: ByteStream | None = None
        if seed is not None:
            self.stream = ByteStream(seed)
            state_path = self.root / "rng.json"
            if state_path.is_file():
                state = json.loads(state_path.read_text())
                if state["seed"] == seed:
                    self.stream.take(state["drawn"])
            self._seed = seed

        issuers_path = self.root / "issuers.json"
        self._issuers_raw = json.loads(issuers_path.read_text()) if issuers_path.is_file() else {}
        registry = IssuerRegistry()
        for issuer_id, keys in self._issuers_raw.items():
            registry.register(issuer_id, bytes.fromhex(keys["public"]))
        self.services = Services(
            ledger=self.ledger,
            store=ContentStore(self.root / "store"),
            issuers=registry,
            engines=EngineRegistry(),
        )
        self._orgs: dict[str, Organisation] = {}

    def org_path(self, org_id: str) -> Path:
        return self.root / "orgs" / f"{org_id}.json"

    def org(self, org_id: str) -> Organisation:
        if org_id not in self._orgs:
            path = self.org_path(org_id)
            if not path.is_file():
                raise CtiShareError(f"unknown org {org_id!r}; run keygen --org {org_id} first")
            self._orgs[org_id] = Organisation.from_state(
                json.loads(path.read_text()), self.services, auto_register=False
            )
            self._orgs[org_id]._rng = self.stream
        return self._orgs[org_id]

    def add_org(self, org: Organisation):
        if self.org_path(org.org_id).is_file():
            raise CtiShareError(f"org {org.org_id!r} already has a keypair in this home")
        self._orgs[org.org_id] = org

    def issuer(self, issuer_id: str = DEFAULT_ISSUER) -> Issuer:
        if issuer_id not in self._issuers_raw:
            issuer = make_issuer(issuer_id, self.stream)
            self._issuers_raw[issuer_id] = {
                "public": issuer.public_key.hex(),
                "private": issuer._private_key.hex(),
            }
            self.services.issuers.register(issuer_id, issuer.public_key)
            return issuer
        keys = self._issuers_raw[issuer_id]
        return Issuer(
            issuer_id=issuer_id,
            public_key=bytes.fromhex(keys["public"]),
            _private_key=bytes.fromhex(keys["private"]),
        )

    def require_registered(self, org: Organisation):
        if not self.ledger.is_registered(org.address):
            raise UnregisteredCaller(f"org {org.org_id!r} is not registered; run register --org {org.org_id}")

    def commit(self):
        (self.root / "ledger.json").write_text(json.dumps(self.ledger.to_state()))
        (self.root / "issuers.json").write_text(json.dumps(self._issuers_raw))
        for org in self._orgs.values():
            self.org_path(org.org_id).write_text(json.dumps(org.to_state()))
        if self.stream is not None:
            (self.root / "rng.json").write_text(
                json.dumps({"seed": self._seed, "drawn": self.stream.position})
            )

    def close(self):
        fcntl.flock(self._lock, fcntl.LOCK_UN)
        self._lock.close()


def with_session(fn):
    """Open the home under lock, run the command, persist state on success."""

    @functools.wraps(fn)
    @click.pass_obj
    def wrapper(config, *args, **kwargs):
        session = Session(config["home"], config["gas_model"], config["seed"])
        try:
            result = fn(session, *args, **kwargs)
            session.commit()
            return result
        finally:
            session.close()

    return wrapper


def domain_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (CtiShareError, OSError) as exc:
            # bad --out paths and unreadable inputs get the same clean exit
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
@click.option(
    "--home",
    type=click.Path(path_type=Path),
    default=Path(".ctishare"),
    envvar="CTISHARE_HOME",
    show_default=True,
    help="State directory for single-step commands.",
)
@click.option("--gas-model", type=click.Choice(["calibrated", "linear"]), default=None)
@click.option("--seed", default=None, help="Deterministic byte stream for reproducible runs.")
@click.pass_context
def main(ctx, home: Path, gas_model: str | None, seed: str | None):
    """Differential CTI sharing: share, request, respond, validate."""
    ctx.obj = {"home": home, "gas_model": gas_model, "seed": seed}


@main.command()
@click.option("--org", "org_id", required=True)
@domain_errors
@with_session
def keygen(session: Session, org_id: str):
    """Create a keypair for an organisation (does not register it)."""
    keypair = envelope.keygen(session.stream)
    org = Organisation(org_id, keypair, session.services, rng=session.stream, auto_register=False)
    session.add_org(org)
    click.echo(f"org {org_id}: address {org.address} key_id {keypair.key_id}")


@main.command()
@click.option("--org", "org_id", required=True)
@domain_errors
@with_session
def register(session: Session, org_id: str):
    """Register the organisation's public key on the ledger."""
    org = session.org(org_id)
    address = session.ledger.register_org(org.keypair.public_key)
    click.echo(f"org {org_id} registered at {address}")


@main.command()
@click.option("--org", "org_id", required=True)
@click.option("--bundle", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--policy", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--scheme", type=click.Choice(["single", "multi"]), required=True)
@domain_errors
@with_session
def share(session: Session, org_id: str, bundle: Path, policy: Path, scheme: str):
    """Segment a bundle, publish its public blob, and record the share."""
    org = session.org(org_id)
    session.require_registered(org)
    parsed_bundle = parse_bundle(bundle.read_bytes())
    parsed_policy = policy_from_json(json.loads(policy.read_text()))
    share_id = org.produce_share(parsed_bundle, parsed_policy, HashScheme(scheme))
    record = session.ledger.get_share(share_id)
    receipt = org.gas_log[-1]
    click.echo(f"share {share_id}: cid {record.cid_public} gas {receipt.gas_used} ({receipt.model.value})")


@main.command()
@click.option("--org", "org_id", required=True)
@click.option("--share", "share_id", type=int, required=True)
@click.option("--creds", type=click.Path(exists=True, path_type=Path), required=True)
@domain_errors
@with_session
def request(session: Session, org_id: str, share_id: int, creds: Path):
    """Request access to a share with signed credentials."""
    org = session.org(org_id)
    session.require_registered(org)
    credential_set = CredentialSet.from_json(json.loads(creds.read_text()))
    request_id = org.submit_request(share_id, credential_set)
    receipt = org.gas_log[-1]
    click.echo(f"request {request_id} on share {share_id}: gas {receipt.gas_used} ({receipt.model.value})")


@main.command()
@click.option("--org", "org_id", required=True)
@click.option("--request", "request_id", type=int, required=True)
@domain_errors
@with_session
def respond(session: Session, org_id: str, request_id: int):
    """Evaluate the requester's credentials and seal the granted groups."""
    org = session.org(org_id)
    session.require_registered(org)
    org.process_request(request_id)
    levels = org.access_manager.decisions[request_id]
    receipt = org.gas_log[-1]
    click.echo(
        f"responded to request {request_id}: granted levels {levels or '[]'} "
        f"gas {receipt.gas_used} ({receipt.model.value})"
    )


@main.command()
@click.option("--org", "org_id", required=True)
@click.option("--request", "request_id", type=int, required=True)
@click.option("--json", "as_json", is_flag=True)
@domain_errors
@with_session
def validate(session: Session, org_id: str, request_id: int, as_json: bool):
    """Open the response and check it against the published hashes.

    A failed validation is still exit 0: the command ran and the report is
    the output. Nonzero exits are reserved for not being able to run.
    """
    org = session.org(org_id)
    report = org.consume_response(request_id)
    if as_json:
        click.echo(json.dumps(report.to_json(), indent=2))
    else:
        verdict = "PASS" if report.ok else "FAIL"
        detail = f" ({report.detail})" if report.detail else ""
        click.echo(
            f"{verdict} request {request_id}: levels {sorted(report.per_index)} "
            f"comparisons {report.comparisons_performed} scheme {report.scheme.value}{detail}"
        )


@main.group()
def creds():
    """Credential helpers (test authority)."""


@creds.command("sign")
@click.option("--org", "org_id", required=True)
@click.option("--attributes", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--issuer", "issuer_id", default=DEFAULT_ISSUER, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@domain_errors
@with_session
def creds_sign(session: Session, org_id: str, attributes: Path, issuer_id: str, out: Path | None):
    """Sign an attribute document for an organisation."""
    attrs = json.loads(attributes.read_text())
    if not isinstance(attrs, dict):
        raise CtiShareError("attributes file must hold a JSON object")
    issuer = session.issuer(issuer_id)
    signed = issuer.sign(org_id, attrs)
    text = json.dumps(signed.to_json(), indent=2)
    if out is None:
        click.echo(text)
    else:
        out.write_text(text + "\n")
        click.echo(f"credentials for {org_id} written to {out}", err=True)


@main.group()
def scenario():
    """Multi-organisation scenario runs."""


@scenario.command("run")
@click.argument("config_path", type=click.Path(exists=True, path_type=Path))
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--store-root", type=click.Path(path_type=Path), default=None)
@click.pass_obj
@domain_errors
def scenario_run(config, config_path: Path, out: Path | None, store_root: Path | None):
    """Run a scenario config; writes the JSON-lines transcript."""
    scenario_config = load_scenario_config(config_path)
    if config["seed"] is not None:
        scenario_config = replace(scenario_config, seed=config["seed"])
    if config["gas_model"] is not None:
        scenario_config = replace(scenario_config, gas_model=GasModel(config["gas_model"]))
    transcript = run_scenario(scenario_config, store_root)
    if out is None:
        click.echo(transcript.to_text(), nl=False)
    else:
        out.write_text(transcript.to_text())
        reports = transcript.reports()
        passed = sum(1 for r in reports.values() if r.ok)
        click.echo(
            f"transcript written to {out}: {len(reports)} validations "
            f"({passed} pass), gas total {transcript.gas_total}"
        )


def _case_from_doc(doc: dict, default_iterations: int) -> BenchCase:
    try:
        kind = DataKind(doc.get("data_kind", "synthetic"))
        scheme = HashScheme(doc["scheme"])
        groups = doc["groups"]
        iterations = doc.get("iterations", default_iterations)
        if kind is DataKind.SAMPLE:
            return sample_case(groups, scheme, iterations)
        size = doc["size_bytes"] if "size_bytes" in doc else doc["size_kb"] * 1024
        return BenchCase(
            data_kind=kind,
            data_size_bytes=size,
            group_count=groups,
            scheme=scheme,
            iterations=iterations,
        )
    except (KeyError, ValueError) as exc:
        raise CtiShareError(f"bad bench case {doc!r}: {exc}") from exc


@main.group()
def bench():
    """Timing study over hash generation and validation."""


@bench.command("run")
@click.option("--matrix", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--iterations", type=int, default=1000, show_default=True)
@click.option("--reps", type=int, default=3, show_default=True)
@domain_errors
def bench_run(matrix: Path | None, out: Path | None, iterations: int, reps: int):
    """Run the benchmark grid (default: the full grid) to CSV."""
    if matrix is None:
        cases = full_grid(iterations)
    else:
        docs = json.loads(matrix.read_text())
        if not isinstance(docs, list):
            raise CtiShareError("matrix file must hold a JSON array of cases")
        cases = [_case_from_doc(doc, iterations) for doc in docs]
    report = run_matrix(cases, reps=reps)
    text = report.to_csv()
    if out is None:
        click.echo(text, nl=False)
    else:
        out.write_text(text)
        click.echo(f"{len(report.rows)} rows written to {out}")


@bench.command("backends")
@click.option("--json", "as_json", is_flag=True)
@click.option("--iterations", type=int, default=200, show_default=True)
@domain_errors
def bench_backends(as_json: bool, iterations: int):
    """Compare the compiled hashing kernel against the pure-Python fallback."""
    result = compare_backends(iterations=iterations)
    result["active_backend"] = kernel_backend()
    if as_json:
        click.echo(json.dumps(result, indent=2))
        return
    click.echo(f"active backend: {result['active_backend']}")
    for backend, ms in result["ms"].items():
        click.echo(f"  {backend}: " + ("not built" if ms is None else f"{ms} ms"))
    if "speedup_c_over_python" in result:
        click.echo(f"  speedup (c over python): {result['speedup_c_over_python']}x")


@main.group()
def ledger():
    """Ledger inspection and replay."""


@ledger.command("inspect")
@click.option("--json", "as_json", is_flag=True)
@domain_errors
@with_session
def ledger_inspect(session: Session, as_json: bool):
    """Print ledger records in append order."""
    lines = session.ledger.snapshot_lines()
    if as_json:
        for line in lines:
            click.echo(line)
        return
    click.echo(
        f"gas model {session.ledger.gas_model.value}: "
        f"{session.ledger.share_count} shares, {session.ledger.request_count} requests"
    )
    for line in lines:
        doc = json.loads(line)
        kind = doc.pop("kind")
        rendered = " ".join(f"{k}={v}" for k, v in doc.items())
        click.echo(f"  {kind} {rendered}")


@ledger.command("replay")
@click.option("--calls", type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_obj
@domain_errors
def ledger_replay(config, calls: Path, out: Path | None):
    """Replay a recorded call trace on a fresh ledger; emit outcomes and records."""
    trace = json.loads(calls.read_text())
    if not isinstance(trace, list):
        raise CtiShareError("calls file must hold a JSON array")
    result = replay_calls(trace, GasModel(config["gas_model"] or "calibrated"))
    text = json.dumps(result, separators=(",", ":"))
    if out is None:
        click.echo(text)
    else:
        out.write_text(text)


@main.group()
def store():
    """Content store maintenance."""


@store.command("audit")
@domain_errors
@with_session
def store_audit(session: Session):
    """Recompute every blob's digest; nonzero exit on any mismatch."""
    mismatched = session.services.store.audit()
    if not mismatched:
        click.echo(f"store ok ({len(session.services.store)} blobs)")
        return
    for cid in mismatched:
        click.echo(f"corrupt: {cid}", err=True)
    sys.exit(1)


if __name__ == "__main__":
    main()
