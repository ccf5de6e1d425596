"""Time-slotted experiments: UE churn and usage-weight changes.

A :class:`ScenarioScript` lists the UEs present at slot 1 and a sequence of
events, each applied at the start of its slot.  :func:`run_scenario` drives
either the centralized solver or the bidding session through the script,
logs every transmission, and keeps a full-information optimum for each
window between events so that error traces can be computed afterwards.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO, Union

from .centralized import allocate_centralized
from .distributed import BiddingSession, ProtocolConfig
from .overhead import Channel, MessageKind, MessageRecord, OverheadScenario, measure_overhead
from .utility import UEProfile, default_ue, default_ues, usage_row

CSV_COLUMNS = (
    "slot",
    "ue_id",
    "rate",
    "bid",
    "price",
    "overhead_cum",
    "rate_err",
    "bid_err",
    "price_err",
)

WINDOW_LENGTH = 100


@dataclass(frozen=True)
class JoinUE:
    profile: UEProfile
    initial_bid: Optional[float] = None


@dataclass(frozen=True)
class LeaveUE:
    ue_id: str


@dataclass(frozen=True)
class SetAlphas:
    ue_id: str
    alphas: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))


Action = Union[JoinUE, LeaveUE, SetAlphas]


@dataclass(frozen=True)
class Event:
    slot: int
    actions: tuple[Action, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))


@dataclass(frozen=True)
class ScenarioScript:
    initial_ues: tuple[UEProfile, ...]
    R: float
    events: tuple[Event, ...] = ()
    policy: str = "rebid"
    architecture: str = "distributed"
    cfg: ProtocolConfig = ProtocolConfig()
    horizon: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "initial_ues", tuple(self.initial_ues))
        object.__setattr__(self, "events", tuple(self.events))
        if not self.initial_ues:
            raise ValueError("script needs at least one initial UE")
        if not self.R > 0:
            raise ValueError(f"capacity R must be positive, got {self.R}")
        if self.policy not in ("rebid", "no-rebid"):
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.architecture not in ("centralized", "distributed"):
            raise ValueError(f"unknown architecture {self.architecture!r}")
        slots = [ev.slot for ev in self.events]
        if any(s < 2 for s in slots):
            raise ValueError("events must start at slot 2 or later (slot 1 is the initial allocation)")
        if any(b <= a for a, b in zip(slots, slots[1:])):
            raise ValueError(f"event slots must be strictly increasing, got {slots}")
        present = {ue.id for ue in self.initial_ues}
        if len(present) != len(self.initial_ues):
            raise ValueError("duplicate initial UE ids")
        for ev in self.events:
            for act in ev.actions:
                if isinstance(act, JoinUE):
                    if act.profile.id in present:
                        raise ValueError(f"slot {ev.slot}: UE {act.profile.id} joins twice")
                    present.add(act.profile.id)
                elif isinstance(act, LeaveUE):
                    if act.ue_id not in present:
                        raise ValueError(f"slot {ev.slot}: UE {act.ue_id} leaves but is not present")
                    present.discard(act.ue_id)
                elif isinstance(act, SetAlphas):
                    if act.ue_id not in present:
                        raise ValueError(f"slot {ev.slot}: UE {act.ue_id} is not present")
                else:
                    raise TypeError(f"unknown action {act!r}")
            if not present:
                raise ValueError(f"slot {ev.slot}: cell becomes empty")
        if self.horizon is not None and self.horizon < max(slots, default=1):
            raise ValueError("horizon ends before the last event")

    @property
    def n_slots(self) -> int:
        if self.horizon is not None:
            return self.horizon
        last = max((ev.slot for ev in self.events), default=1)
        return last + WINDOW_LENGTH - 1 if self.events else WINDOW_LENGTH

    def replace(self, **changes) -> "ScenarioScript":
        fields = dict(
            initial_ues=self.initial_ues,
            R=self.R,
            events=self.events,
            policy=self.policy,
            architecture=self.architecture,
            cfg=self.cfg,
            horizon=self.horizon,
        )
        fields.update(changes)
        return ScenarioScript(**fields)


@dataclass(frozen=True)
class OracleSnapshot:
    rates: dict[str, float]
    bids: dict[str, float]
    price: float


def oracle_optimal(ues: Sequence[UEProfile], R: float) -> OracleSnapshot:
    """Full-information optimum of the current cell, used as ground truth."""
    alloc = allocate_centralized(ues, R)
    return OracleSnapshot(dict(alloc.per_ue_rates), alloc.bids(), alloc.shadow_price)


@dataclass
class Window:
    """Slots ``start..end`` between two events (``start`` is the event slot)."""

    start: int
    end: int
    ue_ids: tuple[str, ...]
    oracle: OracleSnapshot
    changed: tuple[str, ...] = ()
    joined: tuple[str, ...] = ()
    left: tuple[str, ...] = ()
    converged: bool = False
    converged_at: Optional[int] = None
    rounds: int = 0
    overhead: int = 0
    steady_rates: Optional[dict[str, float]] = None
    steady_bids: Optional[dict[str, float]] = None
    steady_price: Optional[float] = None

    @property
    def prior(self) -> tuple[str, ...]:
        """UEs that were present before the event and did not change."""
        skip = set(self.changed) | set(self.joined)
        return tuple(uid for uid in self.ue_ids if uid not in skip)


@dataclass
class TimeSeriesResult:
    script: ScenarioScript
    slots: list[int] = field(default_factory=list)
    rates: list[dict[str, float]] = field(default_factory=list)
    bids: list[dict[str, float]] = field(default_factory=list)
    prices: list[float] = field(default_factory=list)
    overhead_cum: list[int] = field(default_factory=list)
    window_index: list[int] = field(default_factory=list)
    windows: list[Window] = field(default_factory=list)
    trace: tuple[MessageRecord, ...] = ()

    @property
    def all_converged(self) -> bool:
        return all(w.converged for w in self.windows)

    def window_overhead(self, i: int) -> int:
        w = self.windows[i]
        return measure_overhead(self.trace, (w.start, w.end))


def _has_effect(event: Event, ues: dict[str, UEProfile]) -> bool:
    for act in event.actions:
        if not isinstance(act, SetAlphas):
            return True
        if ues[act.ue_id].with_alphas(act.alphas).alphas != ues[act.ue_id].alphas:
            return True
    return False


def run_scenario(script: ScenarioScript) -> TimeSeriesResult:
    channel = Channel()
    ues: dict[str, UEProfile] = {ue.id: ue for ue in script.initial_ues}
    events = {ev.slot: ev for ev in script.events}
    result = TimeSeriesResult(script)
    distributed = script.architecture == "distributed"
    rebid = script.policy == "rebid"
    session = BiddingSession(script.R, script.cfg, channel) if distributed else None
    alloc = None

    def open_window(slot, joined=(), left=(), changed=()):
        snapshot = oracle_optimal(list(ues.values()), script.R)
        result.windows.append(
            Window(
                start=slot,
                end=slot,
                ue_ids=tuple(ues),
                oracle=snapshot,
                changed=tuple(changed),
                joined=tuple(joined),
                left=tuple(left),
            )
        )

    def centralized_solve(slot, uplink):
        nonlocal alloc
        for kind, uid in uplink:
            channel.unicast(kind, slot, uid)
        alloc = allocate_centralized(list(ues.values()), script.R)
        for uid in ues:
            channel.unicast(MessageKind.RATE_ASSIGNMENT, slot, uid)

    for slot in range(1, script.n_slots + 1):
        if slot == 1:
            if distributed:
                session.perturb(slot, joins=[(ue, None) for ue in ues.values()])
            else:
                centralized_solve(slot, [(MessageKind.UTILITY_PARAMS, uid) for uid in ues])
            open_window(slot, joined=tuple(ues))
        elif slot in events and _has_effect(events[slot], ues):
            joins, leaves, changes = [], [], []
            for act in events[slot].actions:
                if isinstance(act, JoinUE):
                    ues[act.profile.id] = act.profile
                    joins.append((act.profile, act.initial_bid))
                elif isinstance(act, LeaveUE):
                    del ues[act.ue_id]
                    leaves.append(act.ue_id)
                else:
                    new = ues[act.ue_id].with_alphas(act.alphas)
                    if new.alphas != ues[act.ue_id].alphas:
                        ues[act.ue_id] = new
                        changes.append(new)
            if distributed:
                session.perturb(slot, joins=joins, leaves=leaves, changes=changes, rebid=rebid)
            else:
                uplink = [(MessageKind.SERVICE_TERMINATION, uid) for uid in leaves]
                uplink += [(MessageKind.UTILITY_PARAMS, ue.id) for ue, _ in joins]
                uplink += [(MessageKind.UTILITY_PARAMS, ue.id) for ue in changes]
                centralized_solve(slot, uplink)
            open_window(
                slot,
                joined=[ue.id for ue, _ in joins],
                left=leaves,
                changed=[ue.id for ue in changes],
            )
        elif distributed:
            session.step(slot)

        win = result.windows[-1]
        win.end = slot
        if distributed:
            rates, bids, price = session.rates(), dict(session.bids), session.price
            if session.converged and not win.converged:
                win.converged, win.converged_at = True, slot
            win.rounds = session.rounds
        else:
            rates, price = dict(alloc.per_ue_rates), alloc.shadow_price
            bids = alloc.bids()
            if not win.converged:
                win.converged, win.converged_at = True, slot
        result.slots.append(slot)
        result.rates.append(rates)
        result.bids.append(bids)
        result.prices.append(price)
        result.overhead_cum.append(len(channel))
        result.window_index.append(len(result.windows) - 1)

    result.trace = channel.records
    for i, win in enumerate(result.windows):
        win.overhead = result.window_overhead(i)
        if win.converged:
            last = result.slots.index(win.end)
            win.steady_rates = dict(result.rates[last])
            win.steady_bids = dict(result.bids[last])
            win.steady_price = result.prices[last]
    return result


@dataclass(frozen=True)
class ErrorTrace:
    """Per-slot absolute errors against the window's oracle."""

    slots: list[int]
    rate_err: list[dict[str, float]]
    bid_err: list[dict[str, float]]
    price_err: list[float]
    price_err_pct: list[float]


def error_trace(result: TimeSeriesResult) -> ErrorTrace:
    rate_err, bid_err, price_err, price_pct = [], [], [], []
    for n, wi in enumerate(result.window_index):
        oracle = result.windows[wi].oracle
        rates, bids, p = result.rates[n], result.bids[n], result.prices[n]
        rate_err.append({uid: abs(r - oracle.rates[uid]) for uid, r in rates.items()})
        bid_err.append({uid: abs(w - oracle.bids[uid]) for uid, w in bids.items()})
        price_err.append(abs(p - oracle.price))
        price_pct.append(100.0 * abs(p - oracle.price) / oracle.price)
    return ErrorTrace(list(result.slots), rate_err, bid_err, price_err, price_pct)


def write_csv(result: TimeSeriesResult, fh: TextIO) -> None:
    """One row per slot per present UE, columns :data:`CSV_COLUMNS`."""
    errs = error_trace(result)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for n, slot in enumerate(result.slots):
        for uid in sorted(result.rates[n], key=_ue_sort_key):
            writer.writerow(
                [
                    slot,
                    uid,
                    repr(result.rates[n][uid]),
                    repr(result.bids[n][uid]),
                    repr(result.prices[n]),
                    result.overhead_cum[n],
                    repr(errs.rate_err[n][uid]),
                    repr(errs.bid_err[n][uid]),
                    repr(errs.price_err[n]),
                ]
            )


def to_csv_string(result: TimeSeriesResult) -> str:
    buf = io.StringIO()
    write_csv(result, buf)
    return buf.getvalue()


def _ue_sort_key(uid: str):
    digits = "".join(ch for ch in uid if ch.isdigit())
    return (int(digits) if digits else math.inf, uid)


# --------------------------------------------------------------------------
# preset scripts for the default six-UE cell


def usage_sweep_script(
    R: float = 180.0,
    policy: str = "rebid",
    architecture: str = "distributed",
    cfg: ProtocolConfig = ProtocolConfig(),
) -> ScenarioScript:
    """Usage rows alpha_1..alpha_5, each held for 100 slots (500 slots total)."""
    rows = ["alpha_1", "alpha_2", "alpha_3", "alpha_4", "alpha_5"]
    events = []
    for n, row in enumerate(rows[1:], start=1):
        pairs = usage_row(row)
        events.append(
            Event(n * WINDOW_LENGTH + 1, [SetAlphas(f"UE{i + 1}", pair) for i, pair in enumerate(pairs)])
        )
    return ScenarioScript(
        default_ues(rows[0]), R, events, policy, architecture, cfg, horizon=len(rows) * WINDOW_LENGTH
    )


def churn_script(
    M1: int = 5,
    M2: int = 6,
    R: float = 180.0,
    policy: str = "rebid",
    architecture: str = "distributed",
    cfg: ProtocolConfig = ProtocolConfig(),
) -> ScenarioScript:
    """``M1`` UEs for slots 1..100, ``M2`` from slot 101 on.

    The 5 -> 6 case is the alpha_a -> alpha_b schedule: UE6 is absent under
    alpha_a and joins with its alpha_b weights.
    """
    if M1 == M2:
        raise ValueError("churn needs M1 != M2")
    before = usage_row("alpha_a") if (M1, M2) == (5, 6) else usage_row("alpha_b")
    after = usage_row("alpha_b")
    initial = [default_ue(i, before[i]) for i in range(M1)]
    if M2 > M1:
        actions = [JoinUE(default_ue(i, after[i])) for i in range(M1, M2)]
    else:
        actions = [LeaveUE(f"UE{i + 1}") for i in range(M2, M1)]
    return ScenarioScript(
        initial, R, [Event(WINDOW_LENGTH + 1, actions)], policy, architecture, cfg, horizon=2 * WINDOW_LENGTH
    )


def usage_change_script(
    M: int = 6,
    M_prime: int = 2,
    R: float = 180.0,
    policy: str = "rebid",
    architecture: str = "distributed",
    cfg: ProtocolConfig = ProtocolConfig(),
) -> ScenarioScript:
    """``M_prime`` of ``M`` UEs switch from alpha_1 to alpha_2 weights at slot 101."""
    before, after = usage_row("alpha_1"), usage_row("alpha_2")
    initial = [default_ue(i, before[i]) for i in range(M)]
    actions = [SetAlphas(f"UE{i + 1}", after[i]) for i in range(M_prime)]
    return ScenarioScript(
        initial, R, [Event(WINDOW_LENGTH + 1, actions)], policy, architecture, cfg, horizon=2 * WINDOW_LENGTH
    )


def fresh_script(
    M: int = 6,
    R: float = 180.0,
    policy: str = "rebid",
    architecture: str = "distributed",
    cfg: ProtocolConfig = ProtocolConfig(),
) -> ScenarioScript:
    initial = [default_ue(i, pair) for i, pair in enumerate(usage_row("alpha_1")[:M])]
    return ScenarioScript(initial, R, (), policy, architecture, cfg, horizon=WINDOW_LENGTH)


def overhead_scenario_for(script: ScenarioScript, window: Window, n_iter: int = 1) -> OverheadScenario:
    """Closed-form scenario matching one window of a run."""
    common = dict(
        architecture=script.architecture,
        policy=script.policy,
        beta_location=script.cfg.beta_location,
        n_iter=n_iter,
    )
    after = len(window.ue_ids)
    if window.start == 1:
        return OverheadScenario("fresh", M=after, **common)
    if window.joined or window.left:
        if window.changed:
            raise ValueError("window mixes churn and usage changes; no closed form")
        before = after - len(window.joined) + len(window.left)
        return OverheadScenario("churn", M1=before, M2=after, **common)
    return OverheadScenario("usage", M=after, M_prime=len(window.changed), **common)
