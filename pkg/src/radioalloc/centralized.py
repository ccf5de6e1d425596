"""One-shot eNB solver for the weighted utility-proportional-fair problem.

Maximizes ``prod_i (prod_j U_ij(r_ij)^alpha_ij)^beta_i`` subject to
``sum r_ij <= R``.  In log form the objective is separable and concave, so the
KKT point is found by a single dual bisection: application ``(i, j)`` demands
``app_demand(u_ij, alpha_ij, p / beta_i)`` and ``p`` is tuned until the demands
fill ``R``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import kernels
from .utility import UEProfile, encode

STATIONARITY_TOL = 1e-5
FEASIBILITY_TOL = 1e-6


@dataclass(frozen=True)
class Allocation:
    per_app_rates: Mapping[tuple[str, int], float]
    per_ue_rates: Mapping[str, float]
    shadow_price: float
    iterations_or_bisections: int
    residual: float
    # ln of the shadow price; stays finite when the price itself underflows
    log_shadow_price: float = float("nan")

    @property
    def total(self) -> float:
        return float(sum(self.per_ue_rates.values()))

    def bids(self) -> dict[str, float]:
        """Bids ``p * r_i`` that would sustain this allocation."""
        return {uid: self.shadow_price * r for uid, r in self.per_ue_rates.items()}


def _stack(ues: Sequence[UEProfile]):
    kinds, p1s, p2s, alphas, scales, keys = [], [], [], [], [], []
    for ue in ues:
        kind, p1, p2, alpha = ue.arrays()
        kinds.append(kind)
        p1s.append(p1)
        p2s.append(p2)
        alphas.append(alpha)
        scales.append(np.full(kind.size, 1.0 / ue.beta))
        keys.extend((ue.id, j) for j in ue.active)
    cat = np.concatenate
    return cat(kinds), cat(p1s), cat(p2s), cat(alphas), cat(scales), keys


def allocate_centralized(ues: Sequence[UEProfile], R: float) -> Allocation:
    if not ues:
        raise ValueError("no UEs to allocate to")
    if not R > 0:
        raise ValueError(f"capacity R must be positive, got {R}")
    ids = [ue.id for ue in ues]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate UE ids: {ids}")

    kind, p1, p2, alpha, scale, keys = _stack(ues)
    price, log_price, rates, n_bisect = kernels.clearing_price(kind, p1, p2, alpha, scale, float(R))

    per_app = {key: float(r) for key, r in zip(keys, rates)}
    per_ue = {uid: 0.0 for uid in ids}
    for (uid, _), r in per_app.items():
        per_ue[uid] += r
    return Allocation(
        per_app_rates=per_app,
        per_ue_rates=per_ue,
        shadow_price=price,
        iterations_or_bisections=n_bisect,
        residual=abs(float(rates.sum()) - R),
        log_shadow_price=log_price,
    )


@dataclass(frozen=True)
class KKTReport:
    """Residuals of an allocation.

    ``stationarity`` is relative to the shadow price, ``feasibility`` is in
    rate units.
    """

    stationarity: float
    feasibility: float
    shadow_price: float
    R: float

    @property
    def stationarity_ok(self) -> bool:
        return self.stationarity <= STATIONARITY_TOL

    @property
    def feasibility_ok(self) -> bool:
        return self.feasibility <= FEASIBILITY_TOL * self.R

    @property
    def passed(self) -> bool:
        return self.stationarity_ok and self.feasibility_ok

    def as_dict(self) -> dict:
        return {
            "stationarity_residual_relative": self.stationarity,
            "stationarity_tolerance_relative": STATIONARITY_TOL,
            "feasibility_residual": self.feasibility,
            "feasibility_tolerance": FEASIBILITY_TOL * self.R,
            "shadow_price": self.shadow_price,
            "R": self.R,
            "passed": self.passed,
        }


def kkt_certificate(ues: Sequence[UEProfile], R: float, alloc: Allocation) -> KKTReport:
    """Stationarity and feasibility residuals of ``alloc``.

    Stationarity is ``max |beta_i * alpha_ij * dlnU_ij/dr (r_ij) / p - 1|``
    over active applications, evaluated in log space so that it stays
    meaningful when ``p`` or the marginals underflow.  Feasibility is
    ``|sum r - R|``.
    """
    by_id = {ue.id: ue for ue in ues}
    log_p = alloc.log_shadow_price
    if not np.isfinite(log_p):
        log_p = np.log(alloc.shadow_price) if alloc.shadow_price > 0 else -np.inf
    worst = 0.0
    for (uid, j), r in alloc.per_app_rates.items():
        ue = by_id[uid]
        app = ue.apps[j]
        if r <= 0 or not np.isfinite(log_p):
            worst = float("inf")
            continue
        ln_g = float(kernels.ln_marginal(*encode(app.utility), np.array([r]))[0])
        gap = np.log(ue.beta) + np.log(app.alpha) + ln_g - log_p
        worst = max(worst, abs(float(np.expm1(gap))))
    total = sum(alloc.per_app_rates.values())
    return KKTReport(stationarity=worst, feasibility=abs(total - R), shadow_price=alloc.shadow_price, R=float(R))
