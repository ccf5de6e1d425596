"""Application utility models, their log-marginals and demand curves.

Two QoS curves are supported:

* sigmoidal (real-time traffic)::

      U(r) = c * (1 / (1 + exp(-a (r - b))) - d)
      c = (1 + e^{ab}) / e^{ab},   d = 1 / (1 + e^{ab})

  which simplifies to ``sigma(r) * (1 - exp(-a r))``; that form is what the
  code evaluates because it has no cancellation near ``r = 0``.

* logarithmic (delay-tolerant traffic)::

      U(r) = log(1 + k_log r) / log(1 + k_log r_max)

Everything downstream works with the *log-marginal* ``alpha * d ln U / dr``
and its inverse, the demand curve.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import kernels
from .kernels import LOGARITHMIC, SIGMOID

ALPHA_SUM_TOL = 1e-9


@dataclass(frozen=True)
class SigmoidParams:
    """Sigmoidal utility with steepness ``a`` and inflection rate ``b``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"sigmoid parameters must be positive, got a={self.a}, b={self.b}")

    @property
    def c(self) -> float:
        # (1 + e^{ab}) / e^{ab}, written to avoid overflow for large ab
        return 1.0 + math.exp(-self.a * self.b)

    @property
    def d(self) -> float:
        return 1.0 / (1.0 + math.exp(self.a * self.b)) if self.a * self.b < 700 else 0.0

    @property
    def inflection(self) -> float:
        return self.b


@dataclass(frozen=True)
class LogParams:
    """Logarithmic utility reaching full satisfaction at ``r_max``."""

    k_log: float
    r_max: float

    def __post_init__(self):
        if not (self.k_log > 0 and self.r_max > 0):
            raise ValueError(
                f"log parameters must be positive, got k_log={self.k_log}, r_max={self.r_max}"
            )

    @property
    def inflection(self) -> float:
        return 0.0


UtilityFunction = Union[SigmoidParams, LogParams]


def encode(u: UtilityFunction) -> tuple[int, float, float]:
    """Kernel encoding ``(kind, p1, p2)`` of a utility function."""
    if isinstance(u, SigmoidParams):
        return SIGMOID, float(u.a), float(u.b)
    if isinstance(u, LogParams):
        return LOGARITHMIC, float(u.k_log), float(u.r_max)
    raise TypeError(f"not a utility function: {u!r}")


@dataclass(frozen=True)
class ApplicationProfile:
    utility: UtilityFunction
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"usage fraction must lie in [0, 1], got {self.alpha}")


@dataclass(frozen=True)
class UEProfile:
    """One UE: its applications, usage weights and subscriber weight.

    Usage weights are normalized on construction.  Applications whose weight
    is zero are kept in ``apps`` (so that a later usage change can revive
    them) but are ignored everywhere else; see :attr:`active`.
    """

    id: str
    apps: tuple[ApplicationProfile, ...]
    beta: float = 1.0
    _active: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"UE {self.id}: beta must be positive, got {self.beta}")
        apps = tuple(self.apps)
        if not apps:
            raise ValueError(f"UE {self.id}: needs at least one application")
        total = sum(app.alpha for app in apps)
        if total <= 0:
            raise ValueError(f"UE {self.id}: all usage fractions are zero")
        if abs(total - 1.0) > ALPHA_SUM_TOL:
            apps = tuple(ApplicationProfile(app.utility, app.alpha / total) for app in apps)
        object.__setattr__(self, "apps", apps)
        object.__setattr__(self, "_active", tuple(j for j, app in enumerate(apps) if app.alpha > 0))

    @classmethod
    def build(
        cls,
        id: str,
        utilities: Sequence[UtilityFunction],
        alphas: Sequence[float],
        beta: float = 1.0,
    ) -> "UEProfile":
        if len(utilities) != len(alphas):
            raise ValueError(f"UE {id}: {len(utilities)} utilities but {len(alphas)} usage fractions")
        return cls(id, tuple(ApplicationProfile(u, float(a)) for u, a in zip(utilities, alphas)), float(beta))

    @property
    def active(self) -> tuple[int, ...]:
        """Indices of applications with nonzero usage."""
        return self._active

    @property
    def alphas(self) -> tuple[float, ...]:
        return tuple(app.alpha for app in self.apps)

    def with_alphas(self, alphas: Sequence[float]) -> "UEProfile":
        return UEProfile.build(self.id, [app.utility for app in self.apps], alphas, self.beta)

    def with_beta(self, beta: float) -> "UEProfile":
        return UEProfile(self.id, self.apps, float(beta))

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Kernel encoding ``(kind, p1, p2, alpha)`` of the active applications."""
        enc = [encode(self.apps[j].utility) for j in self.active]
        kind = np.array([e[0] for e in enc], dtype=np.int64)
        p1 = np.array([e[1] for e in enc], dtype=np.float64)
        p2 = np.array([e[2] for e in enc], dtype=np.float64)
        alpha = np.array([self.apps[j].alpha for j in self.active], dtype=np.float64)
        return kind, p1, p2, alpha


def eval(u: UtilityFunction, r: float) -> float:
    """Satisfaction level ``U(r)``."""
    if r < 0:
        raise ValueError(f"rate must be nonnegative, got {r}")
    if isinstance(u, SigmoidParams):
        x = -u.a * (r - u.b)
        sigma = 1.0 / (1.0 + math.exp(x)) if x < 700 else 0.0
        return -math.expm1(-u.a * r) * sigma
    if isinstance(u, LogParams):
        return math.log1p(u.k_log * r) / math.log1p(u.k_log * u.r_max)
    raise TypeError(f"not a utility function: {u!r}")


def log_utility(u: UtilityFunction, r: float) -> float:
    """``ln U(r)``, evaluated without forming ``U`` first."""
    if r <= 0:
        raise ValueError(f"ln U is only finite for positive rates, got {r}")
    kind, p1, p2 = encode(u)
    return float(kernels.log_utility(kind, p1, p2, r))


def log_marginal(u: UtilityFunction, alpha: float, r: float) -> float:
    """``alpha * d ln U / dr`` at rate ``r > 0``."""
    if r <= 0:
        raise ValueError(f"log-marginal diverges at r <= 0, got {r}")
    kind, p1, p2 = encode(u)
    return alpha * float(kernels.log_marginal(kind, p1, p2, r))


def app_demand(u: UtilityFunction, alpha: float, price: float) -> float:
    """Rate at which the application's log-marginal equals ``price``."""
    if not price > 0:
        raise ValueError(f"price must be positive, got {price}")
    if not alpha > 0:
        raise ValueError(f"usage fraction must be positive, got {alpha}")
    kind, p1, p2 = encode(u)
    return float(kernels.demand(kind, p1, p2, alpha, price))


def ue_demand(ue: UEProfile, effective_price: float) -> float:
    """UE-level demand: the sum of its applications' demands at one price.

    At the optimal internal split every active application shares the same
    log-marginal, and by the envelope theorem that common value is the
    derivative of the UE's aggregate log-utility with respect to its budget.
    Inverting the aggregate therefore reduces to summing per-app demands.
    """
    if not effective_price > 0:
        raise ValueError(f"price must be positive, got {effective_price}")
    kind, p1, p2, alpha = ue.arrays()
    return float(kernels.demand(kind, p1, p2, alpha, np.full(kind.size, effective_price)).sum())


# Stand-in parameters for the six-UE cell; the original table of utility
# parameters is not available, so these only mirror its qualitative mix
# (VoIP / SD video / HD video against FTP-like downloads).
DEFAULT_SIGMOIDS = (SigmoidParams(5.0, 10.0), SigmoidParams(3.0, 20.0), SigmoidParams(1.0, 30.0))
DEFAULT_LOGS = (LogParams(15.0, 100.0), LogParams(3.0, 100.0), LogParams(0.5, 100.0))

# Usage-percentage rows.  Each row lists the delay-tolerant (log) weights of
# UE1..UE6 followed by the real-time (sigmoid) weights of UE1..UE6.
USAGE_TABLE = {
    "alpha_1": (0.1, 0.5, 0.9, 0.1, 0.5, 0.9, 0.9, 0.5, 0.1, 0.9, 0.5, 0.1),
    "alpha_2": (0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.7, 0.8, 0.5, 0.7, 0.8),
    "alpha_3": (0.5, 0.9, 0.8, 0.5, 0.9, 0.8, 0.5, 0.1, 0.2, 0.5, 0.1, 0.2),
    "alpha_4": (0.5, 0.3, 0.2, 0.5, 0.3, 0.2, 0.5, 0.7, 0.8, 0.5, 0.7, 0.8),
    "alpha_5": (0.5, 0.9, 0.8, 0.5, 0.9, 0.8, 0.5, 0.1, 0.2, 0.5, 0.1, 0.2),
    "alpha_a": (0.1, 0.5, 0.9, 0.1, 0.5, 0.0, 0.9, 0.5, 0.1, 0.9, 0.5, 0.0),
    "alpha_b": (0.1, 0.5, 0.9, 0.1, 0.5, 0.9, 0.9, 0.5, 0.1, 0.9, 0.5, 0.1),
}

N_DEFAULT_UES = 6


def usage_row(name: str) -> list[tuple[float, float]]:
    """Per-UE ``(sigmoid alpha, log alpha)`` pairs for a usage-table row."""
    row = USAGE_TABLE[name]
    m = len(row) // 2
    return [(row[m + i], row[i]) for i in range(m)]


def default_ue(i: int, alphas: Sequence[float] = (0.5, 0.5), beta: float = 1.0) -> UEProfile:
    """UE number ``i`` (0-based) of the default cell: one sigmoid app then one log app."""
    return UEProfile.build(
        f"UE{i + 1}",
        [DEFAULT_SIGMOIDS[i % 3], DEFAULT_LOGS[i % 3]],
        alphas,
        beta,
    )


def default_ues(row: str = "alpha_1", betas: Sequence[float] | None = None) -> list[UEProfile]:
    """The default six-UE cell under a usage-table row.

    UEs whose weights are all zero in ``row`` are not present in the cell.
    """
    betas = betas if betas is not None else [1.0] * N_DEFAULT_UES
    return [
        default_ue(i, pair, betas[i])
        for i, pair in enumerate(usage_row(row))
        if sum(pair) > 0
    ]
