"""Simulated data-storage contract: append-only share/request/response records.

An in-process, single-node deterministic state machine. Mutating calls are
serialized through one lock (linearizable); every append emits an event with
a monotonically increasing sequence number. Gas is charged per call under
either the calibrated model (constants measured on the reference contract)
or a linear calldata model for sensitivity experiments.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from enum import Enum
from typing import Mapping

from .errors import CtiShareError


class AlreadyRegistered(CtiShareError):
    """Public key already registered."""


class UnregisteredCaller(CtiShareError):
    """Caller address has no registered public key."""


class BadMetadata(CtiShareError):
    """Share metadata is missing required keys."""


class UnknownShare(CtiShareError):
    """No share record with this id."""


class SelfRequest(CtiShareError):
    """A producer may not request its own share."""


class UnknownRequest(CtiShareError):
    """No request record with this id."""


class NotProducer(CtiShareError):
    """Only the share's producer may respond to its requests."""


class AlreadyResponded(CtiShareError):
    """A request accepts at most one response."""


class GasModel(str, Enum):
    CALIBRATED = "calibrated"
    LINEAR = "linear"


# Calibrated per-function costs measured on the reference Ethereum contract.
CALIBRATED_GAS = {"share": 43_897, "request": 66_628, "respond": 50_625}
LINEAR_BASE_GAS = 21_000
LINEAR_GAS_PER_BYTE = 16


def _calldata_size(*args: object) -> int:
    """ABI-flavoured argument size: 4-byte selector, 32 per integer, UTF-8 length per string."""
    size = 4
    for arg in args:
        if isinstance(arg, int):
            size += 32
        elif isinstance(arg, str):
            size += len(arg.encode())
        elif isinstance(arg, Mapping):
            size += len(json.dumps(dict(arg), sort_keys=True, separators=(",", ":")).encode())
        else:
            raise TypeError(f"unsupported calldata argument {type(arg).__name__}")
    return size


@dataclass(frozen=True)
class GasReceipt:
    function: str
    gas_used: int
    model: GasModel


@dataclass(frozen=True)
class ShareRecord:
    share_id: int
    producer: str
    cid_public: str
    metadata: dict[str, str]


@dataclass(frozen=True)
class RequestRecord:
    request_id: int
    share_id: int
    consumer: str
    cid_credentials: str


@dataclass(frozen=True)
class ResponseRecord:
    request_id: int
    cid_response: str


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    data: dict


def derive_address(public_key: bytes) -> str:
    """First 20 bytes of SHA-256(public key), lowercase hex."""
    return hashlib.sha256(public_key).digest()[:20].hex()


class Ledger:
    """Append-only record store with events and deterministic gas accounting."""

    def __init__(self, gas_model: GasModel = GasModel.CALIBRATED):
        self.gas_model = GasModel(gas_model)
        self._lock = threading.Lock()
        self._keys: dict[str, bytes] = {}
        self._shares: dict[int, ShareRecord] = {}
        self._requests: dict[int, RequestRecord] = {}
        self._responses: dict[int, ResponseRecord] = {}
        self._events: list[Event] = []

    # -- gas ------------------------------------------------------------------

    def _charge(self, function: str, calldata_bytes: int) -> GasReceipt:
        if self.gas_model is GasModel.CALIBRATED:
            gas = CALIBRATED_GAS[function]
        else:
            gas = LINEAR_BASE_GAS + LINEAR_GAS_PER_BYTE * calldata_bytes
        return GasReceipt(function=function, gas_used=gas, model=self.gas_model)

    # -- registration ---------------------------------------------------------

    def register_org(self, public_key: bytes) -> str:
        with self._lock:
            address = derive_address(public_key)
            if address in self._keys:
                raise AlreadyRegistered(f"address {address} already registered")
            self._keys[address] = bytes(public_key)
            return address

    def public_key_of(self, address: str) -> bytes:
        if address not in self._keys:
            raise UnregisteredCaller(f"address {address} not registered")
        return self._keys[address]

    def is_registered(self, address: str) -> bool:
        return address in self._keys

    # -- contract functions ----------------------------------------------------

    def share(self, caller: str, cid_public: str, metadata: Mapping[str, str]) -> tuple[int, GasReceipt]:
        with self._lock:
            if caller not in self._keys:
                raise UnregisteredCaller(f"caller {caller} not registered")
            if "threat_type" not in metadata:
                raise BadMetadata("metadata must contain threat_type")
            share_id = len(self._shares) + 1
            record = ShareRecord(
                share_id=share_id,
                producer=caller,
                cid_public=cid_public,
                metadata=dict(metadata),
            )
            self._shares[share_id] = record
            self._emit(
                "ShareAdded",
                {
                    "share_id": share_id,
                    "producer": caller,
                    "cid": cid_public,
                    "metadata": dict(metadata),
                },
            )
            return share_id, self._charge("share", _calldata_size(cid_public, metadata))

    def request(self, caller: str, share_id: int, cid_credentials: str) -> tuple[int, GasReceipt]:
        with self._lock:
            if caller not in self._keys:
                raise UnregisteredCaller(f"caller {caller} not registered")
            if share_id not in self._shares:
                raise UnknownShare(f"no share {share_id}")
            if self._shares[share_id].producer == caller:
                raise SelfRequest(f"caller {caller} produced share {share_id}")
            request_id = len(self._requests) + 1
            record = RequestRecord(
                request_id=request_id,
                share_id=share_id,
                consumer=caller,
                cid_credentials=cid_credentials,
            )
            self._requests[request_id] = record
            self._emit(
                "RequestAdded",
                {
                    "request_id": request_id,
                    "share_id": share_id,
                    "consumer": caller,
                    "cid": cid_credentials,
                },
            )
            return request_id, self._charge("request", _calldata_size(share_id, cid_credentials))

    def respond(self, caller: str, request_id: int, cid_response: str) -> GasReceipt:
        with self._lock:
            if caller not in self._keys:
                raise UnregisteredCaller(f"caller {caller} not registered")
            if request_id not in self._requests:
                raise UnknownRequest(f"no request {request_id}")
            share = self._shares[self._requests[request_id].share_id]
            if share.producer != caller:
                raise NotProducer(f"caller {caller} did not produce share {share.share_id}")
            if request_id in self._responses:
                raise AlreadyResponded(f"request {request_id} already has a response")
            self._responses[request_id] = ResponseRecord(request_id=request_id, cid_response=cid_response)
            self._emit("ResponseAdded", {"request_id": request_id, "cid": cid_response})
            return self._charge("respond", _calldata_size(request_id, cid_response))

    # -- reads ------------------------------------------------------------------

    def _emit(self, kind: str, data: dict):
        self._events.append(Event(seq=len(self._events) + 1, kind=kind, data=data))

    def events_since(self, cursor: int) -> list[Event]:
        if cursor < 0:
            raise ValueError("cursor must be >= 0")
        return [e for e in self._events if e.seq > cursor]

    def get_share(self, share_id: int) -> ShareRecord:
        if share_id not in self._shares:
            raise UnknownShare(f"no share {share_id}")
        return self._shares[share_id]

    def get_request(self, request_id: int) -> RequestRecord:
        if request_id not in self._requests:
            raise UnknownRequest(f"no request {request_id}")
        return self._requests[request_id]

    def get_response(self, request_id: int) -> ResponseRecord | None:
        return self._responses.get(request_id)

    def has_response(self, request_id: int) -> bool:
        return request_id in self._responses

    @property
    def share_count(self) -> int:
        return len(self._shares)

    @property
    def request_count(self) -> int:
        return len(self._requests)

    # -- export / persistence ----------------------------------------------------

    def snapshot_lines(self) -> list[str]:
        """One JSON line per record in event (append) order, stable field order."""
        lines = []
        for event in self._events:
            if event.kind == "ShareAdded":
                record = self._shares[event.data["share_id"]]
                doc = {
                    "kind": "share",
                    "share_id": record.share_id,
                    "producer": record.producer,
                    "cid": record.cid_public,
                    "metadata": {k: record.metadata[k] for k in sorted(record.metadata)},
                }
            elif event.kind == "RequestAdded":
                request = self._requests[event.data["request_id"]]
                doc = {
                    "kind": "request",
                    "request_id": request.request_id,
                    "share_id": request.share_id,
                    "consumer": request.consumer,
                    "cid": request.cid_credentials,
                }
            else:
                response = self._responses[event.data["request_id"]]
                doc = {
                    "kind": "response",
                    "request_id": response.request_id,
                    "cid": response.cid_response,
                }
            lines.append(json.dumps(doc, separators=(",", ":")))
        return lines

    def state_digest(self) -> str:
        """Hash over the snapshot; used to check records are immutable post-append."""
        return hashlib.sha256("\n".join(self.snapshot_lines()).encode()).hexdigest()

    def to_state(self) -> dict:
        return {
            "gas_model": self.gas_model.value,
            "keys": {addr: key.hex() for addr, key in self._keys.items()},
            "shares": [
                {
                    "share_id": r.share_id,
                    "producer": r.producer,
                    "cid": r.cid_public,
                    "metadata": r.metadata,
                }
                for r in self._shares.values()
            ],
            "requests": [
                {
                    "request_id": r.request_id,
                    "share_id": r.share_id,
                    "consumer": r.consumer,
                    "cid": r.cid_credentials,
                }
                for r in self._requests.values()
            ],
            "responses": [
                {"request_id": r.request_id, "cid": r.cid_response} for r in self._responses.values()
            ],
            "events": [{"seq": e.seq, "kind": e.kind, "data": e.data} for e in self._events],
        }

    @classmethod
    def from_state(cls, state: dict) -> "Ledger":
        ledger = cls(gas_model=GasModel(state["gas_model"]))
        ledger._keys = {addr: bytes.fromhex(key) for addr, key in state["keys"].items()}
        for raw in state["shares"]:
            ledger._shares[raw["share_id"]] = ShareRecord(
                share_id=raw["share_id"],
                producer=raw["producer"],
                cid_public=raw["cid"],
                metadata=dict(raw["metadata"]),
            )
        for raw in state["requests"]:
            ledger._requests[raw["request_id"]] = RequestRecord(
                request_id=raw["request_id"],
                share_id=raw["share_id"],
                consumer=raw["consumer"],
                cid_credentials=raw["cid"],
            )
        for raw in state["responses"]:
            ledger._responses[raw["request_id"]] = ResponseRecord(
                request_id=raw["request_id"], cid_response=raw["cid"]
            )
        ledger._events = [Event(seq=e["seq"], kind=e["kind"], data=e["data"]) for e in state["events"]]
        return ledger


def replay_calls(calls: list[dict], gas_model: GasModel = GasModel.CALIBRATED) -> dict:
    """Drive a fresh ledger through a recorded call trace.

    Reference side of the contract-equivalence harness: each call reports
    ok/error-name, and the result bundles outcomes with the final snapshot
    and event-kind order for diffing against the on-chain replay.
    """
    ledger = Ledger(gas_model=gas_model)
    outcomes: list[dict] = []
    for call in calls:
        op = call["op"]
        try:
            if op == "register":
                address = ledger.register_org(bytes.fromhex(call["pubkey"]))
                outcomes.append({"ok": True, "address": address})
            elif op == "share":
                metadata = {"threat_type": call["threat_type"], "created_at": call["created_at"]}
                share_id, _ = ledger.share(call["caller"], call["cid"], metadata)
                outcomes.append({"ok": True, "share_id": share_id})
            elif op == "request":
                request_id, _ = ledger.request(call["caller"], call["share_id"], call["cid"])
                outcomes.append({"ok": True, "request_id": request_id})
            elif op == "respond":
                ledger.respond(call["caller"], call["request_id"], call["cid"])
                outcomes.append({"ok": True})
            else:
                raise ValueError(f"unknown op {op!r}")
        except CtiShareError as exc:
            outcomes.append({"ok": False, "error": type(exc).__name__})
    return {
        "outcomes": outcomes,
        "records": ledger.snapshot_lines(),
        "events": [e.kind for e in ledger._events],
    }
