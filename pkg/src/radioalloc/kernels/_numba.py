"""Scalar-loop kernels compiled with numba.

Same algorithms and constants as ``_numpy``; every array routine loops over
elements and calls a scalar helper.
"""
import math

import numpy as np
from numba import njit

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
)

# numba cannot raise custom exception classes carrying state; failures are
# reported through status codes and re-raised by the dispatcher.
OK = 0
ERR_CAP = 1
ERR_ITER = 2
ERR_BRACKET = 3


@njit(cache=True)
def _softplus(x):
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


@njit(cache=True)
def _log_utility1(kind, p1, p2, r):
    if kind == SIGMOID:
        return math.log(-math.expm1(-p1 * r)) - _softplus(-p1 * (r - p2))
    return math.log(math.log1p(p1 * r)) - math.log(math.log1p(p1 * p2))


@njit(cache=True)
def _log_marginal1(kind, p1, p2, r):
    if kind == SIGMOID:
        x = p1 * r
        first = 0.0 if x > 700.0 else p1 / math.expm1(x)
        y = p1 * (r - p2)
        second = 0.0 if y > 700.0 else p1 / (1.0 + math.exp(y))
        return first + second
    return p1 / ((1.0 + p1 * r) * math.log1p(p1 * r))


@njit(cache=True)
def _ln_marginal1(kind, p1, p2, r):
    """ln of the log-marginal; finite far past the point where it underflows."""
    if kind == SIGMOID:
        x = p1 * r
        la = -x - math.log(-math.expm1(-x))
        lb = -_softplus(p1 * (r - p2))
        hi = max(la, lb)
        return math.log(p1) + hi + math.log1p(math.exp(min(la, lb) - hi))
    kr = math.log1p(p1 * r)
    return math.log(p1) - kr - math.log(kr)


@njit(cache=True)
def _log_price(x, e_shift):
    """ln(x * 2**e_shift) in a form that only depends on that product."""
    f, e = math.frexp(x)
    return math.log(f) + (e + e_shift) * LN2


@njit(cache=True)
def _demand_log1(kind, p1, p2, log_alpha, lq):
    lo = DEMAND_FLOOR
    if log_alpha + _ln_marginal1(kind, p1, p2, lo) <= lq:
        return lo, OK
    hi = 1.0
    while log_alpha + _ln_marginal1(kind, p1, p2, hi) >= lq:
        hi *= 2.0
        if hi > DEMAND_CAP:
            return hi, ERR_CAP
    if hi > 1.0:
        lo = 0.5 * hi
    for _ in range(DEMAND_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if log_alpha + _ln_marginal1(kind, p1, p2, mid) > lq:
            lo = mid
        else:
            hi = mid
        nxt = 0.5 * (lo + hi)
        if hi - lo <= DEMAND_ABS_TOL * min(1.0, lo) or nxt == lo or nxt == hi:
            return nxt, OK
    return 0.5 * (lo + hi), ERR_ITER


@njit(cache=True)
def log_utility(kind, p1, p2, r):
    out = np.empty(r.size)
    for j in range(r.size):
        out[j] = _log_utility1(kind[j], p1[j], p2[j], r[j])
    return out


@njit(cache=True)
def log_marginal(kind, p1, p2, r):
    out = np.empty(r.size)
    for j in range(r.size):
        out[j] = _log_marginal1(kind[j], p1[j], p2[j], r[j])
    return out


@njit(cache=True)
def _demands(kind, p1, p2, alpha, m, scale, e_shift):
    """Demands at price ``m * 2**e_shift`` seen through ``scale``."""
    out = np.empty(kind.size)
    for j in range(kind.size):
        lq = _log_price(m * scale[j], e_shift)
        r, status = _demand_log1(kind[j], p1[j], p2[j], math.log(alpha[j]), lq)
        if status != OK:
            return out, status
        out[j] = r
    return out, OK


@njit(cache=True)
def ln_marginal(kind, p1, p2, r):
    out = np.empty(r.size)
    for j in range(r.size):
        out[j] = _ln_marginal1(kind[j], p1[j], p2[j], r[j])
    return out


@njit(cache=True)
def demand(kind, p1, p2, alpha, price):
    out = np.empty(price.size)
    for j in range(price.size):
        r, status = _demand_log1(kind[j], p1[j], p2[j], math.log(alpha[j]), _log_price(price[j], 0))
        if status != OK:
            return out, status
        out[j] = r
    return out, OK


@njit(cache=True)
def _aggregate(kind, p1, p2, alpha, scale, m, e_shift):
    total = 0.0
    for j in range(kind.size):
        lq = _log_price(m * scale[j], e_shift)
        r, status = _demand_log1(kind[j], p1[j], p2[j], math.log(alpha[j]), lq)
        if status != OK:
            return total, status
        total += r
    return total, OK


@njit(cache=True)
def clearing_price(kind, p1, p2, alpha, scale, budget):
    empty = np.empty(0)
    # bracket 2**e_lo (demand above budget) .. 2**(e_lo + 1) by galloping over the exponent
    total, status = _aggregate(kind, p1, p2, alpha, scale, 1.0, 0)
    if status != OK:
        return 1.0, 0.0, empty, 0, status
    if total > budget:
        inner, outer, step, sign = 0, 0, 1, 1
    else:
        inner, outer, step, sign = 0, 0, 1, -1
    while True:
        outer = inner + sign * step
        if abs(outer) > PRICE_MAX_EXPONENT:
            return 1.0, 0.0, empty, 0, ERR_BRACKET
        t, status = _aggregate(kind, p1, p2, alpha, scale, 1.0, outer)
        if status != OK:
            return 1.0, 0.0, empty, 0, status
        if (t > budget) != (sign > 0):
            break
        inner = outer
        step *= 2
    while abs(outer - inner) > 1:
        mid = (inner + outer) // 2
        t, status = _aggregate(kind, p1, p2, alpha, scale, 1.0, mid)
        if status != OK:
            return 1.0, 0.0, empty, 0, status
        if (t > budget) == (sign > 0):
            inner = mid
        else:
            outer = mid
    e = min(inner, outer)
    total, status = _aggregate(kind, p1, p2, alpha, scale, 1.0, e)
    if status != OK:
        return 1.0, 0.0, empty, 0, status

    lo, hi, m = 1.0, 2.0, 1.0
    n_bisect = 0
    while abs(total - budget) > PRICE_REL_TOL * budget and n_bisect < PRICE_MAX_BISECT:
        mid = math.sqrt(lo * hi)
        if mid <= lo or mid >= hi:
            break
        m = mid
        total, status = _aggregate(kind, p1, p2, alpha, scale, m, e)
        if status != OK:
            return math.ldexp(m, e), 0.0, empty, n_bisect, status
        if total > budget:
            lo = m
        else:
            hi = m
        n_bisect += 1
    if abs(total - budget) <= PRICE_REL_TOL * budget:
        rates, status = _demands(kind, p1, p2, alpha, m, scale, e)
        return math.ldexp(m, e), _log_price(m, e), rates, n_bisect, status
    # demand jumps inside the collapsed bracket: blend the two end allocations
    d_lo, status = _demands(kind, p1, p2, alpha, lo, scale, e)
    if status != OK:
        return math.ldexp(m, e), 0.0, empty, n_bisect, status
    d_hi, status = _demands(kind, p1, p2, alpha, hi, scale, e)
    if status != OK:
        return math.ldexp(m, e), 0.0, empty, n_bisect, status
    s_lo = d_lo.sum()
    s_hi = d_hi.sum()
    theta = (budget - s_hi) / (s_lo - s_hi) if s_lo > s_hi else 0.0
    m = math.sqrt(lo * hi)
    return math.ldexp(m, e), _log_price(m, e), d_hi + theta * (d_lo - d_hi), n_bisect, OK
