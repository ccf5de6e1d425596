"""Two-stage distributed allocation: eNB/UE bidding (EURA) then per-UE split (IURA).

One slot is one full exchange: every responding UE sends a bid, then the eNB
publishes a price.  With ``beta_location="ue"`` the price is one broadcast of
``p``; with ``beta_location="enb"`` the eNB unicasts ``p / beta_i`` to each
responding UE.  The eNB allocates ``r_i = w_i / p`` so capacity is always
exactly used; bidding stops once no bid moves by ``delta`` or more.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .centralized import Allocation
from .overhead import Channel, MessageKind
from .utility import UEProfile, ue_demand

INITIAL_BID = 1.0
IURA_REL_TOL = 1e-8


@dataclass(frozen=True)
class Bid:
    ue_id: str
    w: float
    slot: int

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError(f"bid must be positive, got {self.w}")


@dataclass(frozen=True)
class ShadowPrice:
    """Price message.  ``value`` is what goes on the air: ``p`` or ``p / beta_i``."""

    p: float
    slot: int
    addressing: str = "broadcast"
    value: Optional[float] = None
    ue_id: Optional[str] = None

    def __post_init__(self):
        if not self.p > 0:
            raise ValueError(f"price must be positive, got {self.p}")
        if self.addressing not in ("broadcast", "per-ue"):
            raise ValueError(f"unknown addressing {self.addressing!r}")
        if self.value is None:
            object.__setattr__(self, "value", self.p)

    def for_ue(self, ue: UEProfile) -> "ShadowPrice":
        return ShadowPrice(self.p, self.slot, "per-ue", self.p / ue.beta, ue.id)


@dataclass(frozen=True)
class ProtocolConfig:
    delta: float = 1e-3
    beta_location: str = "ue"
    damping: float = 1.0
    max_slots: int = 10_000

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.beta_location not in ("ue", "enb"):
            raise ValueError(f"beta_location must be 'ue' or 'enb', got {self.beta_location!r}")
        if not 0 < self.damping <= 1:
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if self.max_slots < 1:
            raise ValueError("max_slots must be positive")


def enb_price(bids: Sequence[Bid], R: float, slot: Optional[int] = None) -> ShadowPrice:
    """Price that makes the bids buy exactly ``R``: ``sum(w) / R``."""
    if not bids:
        raise ValueError("cannot price an empty bid set")
    if not R > 0:
        raise ValueError(f"capacity R must be positive, got {R}")
    slot = max(b.slot for b in bids) if slot is None else slot
    return ShadowPrice(sum(b.w for b in bids) / R, slot)


def ue_bid(
    ue: UEProfile,
    price: ShadowPrice,
    cfg: ProtocolConfig,
    w_prev: Optional[float] = None,
    slot: Optional[int] = None,
) -> tuple[float, Bid]:
    """A UE's desired rate and its next bid after hearing ``price``."""
    q = price.value if price.addressing == "per-ue" else price.p / ue.beta
    r = ue_demand(ue, q)
    w = price.p * r
    if w_prev is not None and cfg.damping != 1.0:
        w = cfg.damping * w + (1.0 - cfg.damping) * w_prev
    return r, Bid(ue.id, w, price.slot + 1 if slot is None else slot)


class BiddingSession:
    """eNB-side state of the bidding loop plus the UE agents it talks to.

    The session is driven one slot at a time: :meth:`perturb` handles the
    exchange triggered by an event (UEs joining, leaving or changing usage),
    :meth:`step` runs one bid/price round.  Bids of UEs that are not
    ``responders`` stay frozen.
    """

    def __init__(self, R: float, cfg: ProtocolConfig, channel: Optional[Channel] = None):
        if not R > 0:
            raise ValueError(f"capacity R must be positive, got {R}")
        self.R = float(R)
        self.cfg = cfg
        self.channel = channel if channel is not None else Channel()
        self.ues: dict[str, UEProfile] = {}
        self.bids: dict[str, float] = {}
        self.price: Optional[float] = None
        self.responders: list[str] = []
        self.converged = True
        self.rounds = 0
        self.last_change = float("nan")

    def rates(self) -> dict[str, float]:
        return {uid: w / self.price for uid, w in self.bids.items()}

    def _publish(self, slot: int) -> None:
        self.price = sum(self.bids.values()) / self.R
        if self.cfg.beta_location == "ue":
            self.channel.broadcast(MessageKind.PRICE, slot)
        else:
            for uid in self.responders:
                self.channel.unicast(MessageKind.PRICE, slot, uid)

    def _offer(self, uid: str) -> ShadowPrice:
        msg = ShadowPrice(self.price, 0)
        return msg.for_ue(self.ues[uid]) if self.cfg.beta_location == "enb" else msg

    def perturb(
        self,
        slot: int,
        joins: Iterable[tuple[UEProfile, Optional[float]]] = (),
        leaves: Iterable[str] = (),
        changes: Iterable[UEProfile] = (),
        rebid: bool = True,
    ) -> None:
        """Apply an event and run its opening exchange.

        Joining UEs send an initial bid (``INITIAL_BID`` unless given),
        changed UEs send the bid of their new profile at the current price,
        leaving UEs send a service termination.  The eNB then publishes a
        price to the UEs that will keep bidding.
        """
        joins, leaves, changes = list(joins), list(leaves), list(changes)
        for uid in leaves:
            if uid not in self.ues:
                raise KeyError(f"UE {uid} is not in the cell")
            self.channel.unicast(MessageKind.SERVICE_TERMINATION, slot, uid)
            del self.ues[uid]
            del self.bids[uid]
        for ue, w0 in joins:
            if ue.id in self.ues:
                raise ValueError(f"UE {ue.id} is already in the cell")
            self.ues[ue.id] = ue
            self.bids[ue.id] = INITIAL_BID if w0 is None else float(w0)
            self.channel.unicast(MessageKind.BID, slot, ue.id)
        for ue in changes:
            if ue.id not in self.ues:
                raise KeyError(f"UE {ue.id} is not in the cell")
            self.ues[ue.id] = ue
            if self.price is not None:
                _, bid = ue_bid(ue, self._offer(ue.id), self.cfg, slot=slot)
                self.bids[ue.id] = bid.w
            self.channel.unicast(MessageKind.BID, slot, ue.id)
        if not self.ues:
            raise ValueError("cell is empty")

        moved = {ue.id for ue, _ in joins} | {ue.id for ue in changes}
        if rebid:
            self.responders = list(self.ues)
        else:
            self.responders = [uid for uid in self.ues if uid in moved]
        self.rounds = 0
        if self.responders:
            self._publish(slot)
            self.converged = False
        else:
            # frozen bids only: the eNB re-prices silently
            self.price = sum(self.bids.values()) / self.R
            self.converged = True

    def step(self, slot: int) -> bool:
        """One bid/price round; returns the convergence flag."""
        if self.converged:
            return True
        change = 0.0
        for uid in self.responders:
            w_prev = self.bids[uid]
            _, bid = ue_bid(self.ues[uid], self._offer(uid), self.cfg, w_prev=w_prev, slot=slot)
            self.channel.unicast(MessageKind.BID, slot, uid)
            self.bids[uid] = bid.w
            change = max(change, abs(bid.w - w_prev))
        self._publish(slot)
        self.rounds += 1
        self.last_change = change
        self.converged = change < self.cfg.delta
        return self.converged


@dataclass
class EURAResult:
    rates: dict[str, float]
    bids: dict[str, float]
    price: float
    converged: bool
    slots: int
    rounds: int
    bid_trace: list[dict[str, float]] = field(default_factory=list)
    price_trace: list[float] = field(default_factory=list)
    channel: Channel = field(default_factory=Channel)


def run_eura(
    ues: Sequence[UEProfile],
    R: float,
    cfg: ProtocolConfig = ProtocolConfig(),
    channel: Optional[Channel] = None,
    initial_bids: Optional[Sequence[float]] = None,
) -> EURAResult:
    """Run the eNB/UE bidding loop from a fresh start.

    Slot 1 carries the initial bids and the first price; each later slot is
    one round.  Stops on convergence or after ``cfg.max_slots`` slots, in
    which case ``converged`` is False and the partial trace is returned.
    """
    if not ues:
        raise ValueError("no UEs to allocate to")
    channel = channel if channel is not None else Channel()
    if len(channel):
        raise ValueError("channel must start empty")
    inits = list(initial_bids) if initial_bids is not None else [None] * len(ues)
    session = BiddingSession(R, cfg, channel)

    slot = 1
    session.perturb(slot, joins=zip(ues, inits))
    bid_trace = [dict(session.bids)]
    price_trace = [session.price]
    while not session.converged and slot < cfg.max_slots:
        slot += 1
        session.step(slot)
        bid_trace.append(dict(session.bids))
        price_trace.append(session.price)
    return EURAResult(
        rates=session.rates(),
        bids=dict(session.bids),
        price=session.price,
        converged=session.converged,
        slots=slot,
        rounds=session.rounds,
        bid_trace=bid_trace,
        price_trace=price_trace,
        channel=channel,
    )


def run_iura(ue: UEProfile, r_opt: float) -> dict[int, float]:
    """Split a UE's budget among its active applications.

    Returns ``{app_index: rate}``; the rates equalize the applications'
    log-marginals and sum to ``r_opt``.
    """
    if not r_opt > 0:
        raise ValueError(f"UE budget must be positive, got {r_opt}")
    if len(ue.active) == 1:
        return {ue.active[0]: float(r_opt)}
    kind, p1, p2, alpha = ue.arrays()
    _, _, rates, _ = kernels.clearing_price(kind, p1, p2, alpha, np.ones(kind.size), float(r_opt))
    return {j: float(r) for j, r in zip(ue.active, rates)}


def allocate_distributed(
    ues: Sequence[UEProfile], R: float, cfg: ProtocolConfig = ProtocolConfig()
) -> tuple[Allocation, EURAResult]:
    """EURA followed by IURA on every UE, packaged like a centralized result."""
    eura = run_eura(ues, R, cfg)
    per_app = {}
    for ue in ues:
        for j, r in run_iura(ue, eura.rates[ue.id]).items():
            per_app[(ue.id, j)] = r
    alloc = Allocation(
        per_app_rates=per_app,
        per_ue_rates=dict(eura.rates),
        shadow_price=eura.price,
        iterations_or_bisections=eura.slots,
        residual=abs(sum(eura.rates.values()) - R),
        log_shadow_price=float(np.log(eura.price)),
    )
    return alloc, eura
