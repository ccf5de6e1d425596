"""Transmission accounting on the eNB <-> UE channel.

Every logical transmission is logged as a :class:`MessageRecord`.  A broadcast
is a single record no matter how many UEs hear it.  :func:`predict_overhead`
holds the closed-form minimum counts for each architecture / policy / event
type, :func:`measure_overhead` counts what a simulation actually sent.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, TextIO


class MessageKind(str, enum.Enum):
    BID = "Bid"
    PRICE = "Price"
    UTILITY_PARAMS = "UtilityParams"
    RATE_ASSIGNMENT = "RateAssignment"
    SERVICE_TERMINATION = "ServiceTermination"


class Direction(str, enum.Enum):
    UPLINK = "UE->eNB"
    DOWNLINK = "eNB->UE"


class Addressing(str, enum.Enum):
    UNICAST = "unicast"
    BROADCAST = "broadcast"


_DIRECTION = {
    MessageKind.BID: Direction.UPLINK,
    MessageKind.UTILITY_PARAMS: Direction.UPLINK,
    MessageKind.SERVICE_TERMINATION: Direction.UPLINK,
    MessageKind.PRICE: Direction.DOWNLINK,
    MessageKind.RATE_ASSIGNMENT: Direction.DOWNLINK,
}


@dataclass(frozen=True)
class MessageRecord:
    kind: MessageKind
    direction: Direction
    addressing: Addressing
    slot: int
    ue_id: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "slot": self.slot,
            "kind": self.kind.value,
            "direction": self.direction.value,
            "addressing": self.addressing.value,
            "ue_id": self.ue_id,
        }


class Channel:
    """Append-only message log shared by the eNB and UE agents of one run."""

    def __init__(self):
        self._records: list[MessageRecord] = []

    def __len__(self):
        return len(self._records)

    @property
    def records(self) -> tuple[MessageRecord, ...]:
        return tuple(self._records)

    def unicast(self, kind: MessageKind, slot: int, ue_id: str) -> None:
        self._records.append(MessageRecord(kind, _DIRECTION[kind], Addressing.UNICAST, slot, ue_id))

    def broadcast(self, kind: MessageKind, slot: int) -> None:
        if _DIRECTION[kind] is not Direction.DOWNLINK:
            raise ValueError(f"{kind.value} cannot be broadcast")
        self._records.append(MessageRecord(kind, Direction.DOWNLINK, Addressing.BROADCAST, slot))


def measure_overhead(
    trace: Iterable[MessageRecord], window: Optional[tuple[int, int]] = None
) -> int:
    """Number of transmissions in ``trace`` with ``window[0] <= slot <= window[1]``."""
    if window is None:
        return sum(1 for _ in trace)
    lo, hi = window
    return sum(1 for rec in trace if lo <= rec.slot <= hi)


def write_trace(trace: Sequence[MessageRecord], fh: TextIO) -> None:
    """One JSON object per line, keys in a fixed order."""
    for rec in trace:
        fh.write(json.dumps(rec.as_dict()) + "\n")


def read_trace(fh: TextIO) -> list[MessageRecord]:
    out = []
    for line in fh:
        if not line.strip():
            continue
        d = json.loads(line)
        out.append(
            MessageRecord(
                MessageKind(d["kind"]),
                Direction(d["direction"]),
                Addressing(d["addressing"]),
                int(d["slot"]),
                d.get("ue_id"),
            )
        )
    return out


# --------------------------------------------------------------------------
# closed-form predictions


@dataclass(frozen=True)
class OverheadScenario:
    """Event whose re-allocation cost is predicted.

    ``kind`` is ``"fresh"`` (``M`` UEs start from nothing), ``"churn"``
    (``M1 -> M2`` UEs) or ``"usage"`` (``M_prime`` of ``M`` UEs change their
    usage weights).  ``n_iter`` is the number of bid/price rounds after the
    event's first exchange.
    """

    kind: str
    architecture: str = "distributed"
    policy: str = "rebid"
    beta_location: str = "ue"
    n_iter: int = 1
    M: int = 0
    M1: int = 0
    M2: int = 0
    M_prime: int = 0

    def __post_init__(self):
        if self.kind not in ("fresh", "churn", "usage"):
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if self.architecture not in ("centralized", "distributed"):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.policy not in ("rebid", "no-rebid"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.beta_location not in ("ue", "enb"):
            raise ValueError(f"unknown beta location {self.beta_location!r}")
        if self.n_iter < 1:
            raise ValueError("n_iter must be at least 1")
        if min(self.M, self.M1, self.M2, self.M_prime) < 0:
            raise ValueError("UE counts must be nonnegative")
        if self.kind == "fresh" and self.M < 1:
            raise ValueError("fresh start needs M >= 1")
        if self.kind == "churn" and (self.M1 == self.M2 or self.M2 < 1):
            raise ValueError(f"churn needs M1 != M2 and M2 >= 1, got {self.M1} -> {self.M2}")
        if self.kind == "usage" and not 0 < self.M_prime <= self.M:
            raise ValueError(f"usage change needs 0 < M_prime <= M, got {self.M_prime} of {self.M}")


def predict_overhead(s: OverheadScenario) -> int:
    """Closed-form transmission count of scenario ``s``.

    With ``n_iter=1`` this is the minimum over all runs; larger ``n_iter``
    gives the count after that many bid/price rounds.
    """
    k = s.n_iter
    at_ue = s.beta_location == "ue"

    if s.architecture == "centralized":
        if s.kind == "fresh":
            return 2 * s.M
        if s.kind == "churn":
            return 2 * s.M2 - s.M1 if s.M2 > s.M1 else s.M1
        return s.M_prime + s.M

    if s.kind == "fresh":
        # a fresh start is churn from an empty cell; both policies coincide
        M = s.M
        return (k + 1) * M + k + 1 if at_ue else (2 * k + 2) * M

    if s.kind == "churn":
        M1, M2 = s.M1, s.M2
        if s.policy == "rebid":
            if M2 > M1:
                return (k + 1) * M2 + k + 1 - M1 if at_ue else (2 * k + 2) * M2 - M1
            return (k - 1) * M2 + k + 1 + M1 if at_ue else 2 * k * M2 + M1
        if M2 > M1:
            return k * (M2 - M1) + k if at_ue else (2 * k + 2) * (M2 - M1)
        return M1 - M2

    M, Mp = s.M, s.M_prime
    if s.policy == "rebid":
        return Mp + 1 + k * M + k if at_ue else Mp + M + 2 * k * M
    return k * Mp + k if at_ue else (2 * k + 2) * Mp
