"""Vectorized numpy implementation of the allocation kernels.

Every application is described by four parallel arrays: ``kind`` (0 for
sigmoidal, 1 for logarithmic), ``p1``/``p2`` (``a, b`` or ``k_log, r_max``)
and ``alpha``.  All routines here operate on whole arrays at once; the
numba backend in ``_numba`` runs the same algorithms one element at a time.
"""
import numpy as np

from ._common import (
    DEMAND_ABS_TOL,
    DEMAND_CAP,
    DEMAND_FLOOR,
    DEMAND_MAX_ITER,
    LN2,
    PRICE_MAX_BISECT,
    PRICE_MAX_EXPONENT,
    PRICE_REL_TOL,
    SIGMOID,
    KernelError,
)


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def log_utility(kind, p1, p2, r):
    kind, p1, p2, r = np.broadcast_arrays(kind, p1, p2, np.asarray(r, dtype=float))
    out = np.empty(r.shape)
    sig = kind == SIGMOID
    with np.errstate(divide="ignore"):
        a, b, rs = p1[sig], p2[sig], r[sig]
        out[sig] = np.log(-np.expm1(-a * rs)) - _softplus(-a * (rs - b))
        k, rmax, rl = p1[~sig], p2[~sig], r[~sig]
        out[~sig] = np.log(np.log1p(k * rl)) - np.log(np.log1p(k * rmax))
    return out


def log_marginal(kind, p1, p2, r):
    """d ln U / dr for every element (no usage weight applied)."""
    kind, p1, p2, r = np.broadcast_arrays(kind, p1, p2, np.asarray(r, dtype=float))
    out = np.empty(r.shape)
    sig = kind == SIGMOID
    with np.errstate(over="ignore", divide="ignore"):
        a, b, rs = p1[sig], p2[sig], r[sig]
        out[sig] = a / np.expm1(a * rs) + a / (1.0 + np.exp(a * (rs - b)))
        k, rl = p1[~sig], r[~sig]
        out[~sig] = k / ((1.0 + k * rl) * np.log1p(k * rl))
    return out


def ln_marginal(kind, p1, p2, r):
    """ln of :func:`log_marginal`, finite far past the point where that underflows."""
    kind, p1, p2, r = np.broadcast_arrays(kind, p1, p2, np.asarray(r, dtype=float))
    out = np.empty(r.shape)
    sig = kind == SIGMOID
    a, b, rs = p1[sig], p2[sig], r[sig]
    x = a * rs
    out[sig] = np.log(a) + np.logaddexp(-x - np.log(-np.expm1(-x)), -_softplus(a * (rs - b)))
    k, rl = p1[~sig], r[~sig]
    kr = np.log1p(k * rl)
    out[~sig] = np.log(k) - kr - np.log(kr)
    return out


def log_price(x, e_shift=0):
    """ln(x * 2**e_shift) in a form that only depends on that product."""
    f, e = np.frexp(x)
    with np.errstate(divide="ignore"):
        return np.log(f) + (e + e_shift) * LN2


def _ln_marginal_flat(sig, p1, p2, log_p1, r):
    """:func:`ln_marginal` on matching 1-D arrays without masking.

    Both closed forms are evaluated everywhere and selected afterwards; for
    the small arrays used here that is cheaper than boolean indexing.
    """
    x = p1 * r
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        la = -x - np.log(-np.expm1(-x))
        lb = -_softplus(p1 * (r - p2))
        s_val = log_p1 + np.logaddexp(la, lb)
        kr = np.log1p(x)
        l_val = log_p1 - kr - np.log(kr)
    return np.where(sig, s_val, l_val)


def demand_log(kind, p1, p2, alpha, lq):
    """Rate at which ``ln alpha + ln_marginal`` equals ``lq``, elementwise."""
    kind, p1, p2, alpha, lq = np.broadcast_arrays(kind, p1, p2, alpha, np.asarray(lq, dtype=float))
    shape = lq.shape
    kind, p1, p2, alpha, lq = (np.ascontiguousarray(x, dtype=float).ravel() for x in (kind, p1, p2, alpha, lq))
    sig = kind == SIGMOID
    log_p1 = np.log(p1)
    # compare ln g(r) against lq - ln alpha, which is ln alpha + ln g(r) vs lq
    la = np.log(alpha)

    def above(r):
        return la + _ln_marginal_flat(sig, p1, p2, log_p1, r) > lq

    lo = np.full(lq.size, DEMAND_FLOOR)
    hi = np.ones(lq.size)
    # prices beyond the marginal at the floor pin the demand to the floor
    pinned = ~above(lo)
    grow = ~pinned & (la + _ln_marginal_flat(sig, p1, p2, log_p1, hi) >= lq)
    while grow.any():
        hi = np.where(grow, hi * 2.0, hi)
        if (hi > DEMAND_CAP).any():
            raise KernelError("demand exceeds rate cap; price too small")
        grow &= la + _ln_marginal_flat(sig, p1, p2, log_p1, hi) >= lq
    lo = np.where(hi > 1.0, hi * 0.5, lo)

    active = ~pinned
    for _ in range(DEMAND_MAX_ITER):
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        up = above(mid)
        lo = np.where(active & up, mid, lo)
        hi = np.where(active & ~up, mid, hi)
        nxt = 0.5 * (lo + hi)
        done = (hi - lo <= DEMAND_ABS_TOL * np.minimum(1.0, lo)) | (nxt == lo) | (nxt == hi)
        active &= ~done
    else:
        if active.any():
            raise KernelError("demand bisection did not converge")

    out = np.where(pinned, DEMAND_FLOOR, 0.5 * (lo + hi))
    return out.reshape(shape)


def demand(kind, p1, p2, alpha, price):
    """Rate at which ``alpha * log_marginal`` equals ``price``, elementwise."""
    return demand_log(kind, p1, p2, alpha, log_price(np.asarray(price, dtype=float)))


def _demands(kind, p1, p2, alpha, scale, m, e_shift):
    return demand_log(kind, p1, p2, alpha, log_price(m * scale, e_shift))


def clearing_price(kind, p1, p2, alpha, scale, budget):
    """Find the price at which scaled demands sum to ``budget``.

    Element ``j`` sees the price ``price * scale[j]``.  The price is carried
    as ``m * 2**e`` so that clearing prices far below the smallest double
    are still found.  Returns ``(price, log_price, demands, n_bisect)``;
    ``price`` may underflow to 0 in that regime, ``log_price`` does not.
    """

    def total_at(m, e):
        return float(_demands(kind, p1, p2, alpha, scale, m, e).sum())

    # bracket 2**e (demand above budget) .. 2**(e + 1) by galloping over the exponent
    sign = 1 if total_at(1.0, 0) > budget else -1
    inner, step = 0, 1
    while True:
        outer = inner + sign * step
        if abs(outer) > PRICE_MAX_EXPONENT:
            raise KernelError("could not bracket the clearing price")
        if (total_at(1.0, outer) > budget) != (sign > 0):
            break
        inner, step = outer, step * 2
    while abs(outer - inner) > 1:
        mid = (inner + outer) // 2
        if (total_at(1.0, mid) > budget) == (sign > 0):
            inner = mid
        else:
            outer = mid
    e = min(inner, outer)

    lo, hi, m = 1.0, 2.0, 1.0
    total = total_at(m, e)
    n_bisect = 0
    while abs(total - budget) > PRICE_REL_TOL * budget and n_bisect < PRICE_MAX_BISECT:
        mid = np.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        m = mid
        total = total_at(m, e)
        if total > budget:
            lo = m
        else:
            hi = m
        n_bisect += 1
    if abs(total - budget) <= PRICE_REL_TOL * budget:
        rates = _demands(kind, p1, p2, alpha, scale, m, e)
        return float(np.ldexp(m, e)), float(log_price(m, e)), rates, n_bisect
    # A flat marginal makes some demand jump inside the final bracket; blend
    # the two bracket allocations so the budget is met exactly.
    d_lo = _demands(kind, p1, p2, alpha, scale, lo, e)
    d_hi = _demands(kind, p1, p2, alpha, scale, hi, e)
    s_lo, s_hi = d_lo.sum(), d_hi.sum()
    theta = (budget - s_hi) / (s_lo - s_hi) if s_lo > s_hi else 0.0
    m = np.sqrt(lo * hi)
    return float(np.ldexp(m, e)), float(log_price(m, e)), d_hi + theta * (d_lo - d_hi), n_bisect
