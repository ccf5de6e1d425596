"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is picked once at import time.  Set ``RADIOALLOC_DISABLE_NUMBA=1``
to force the numpy implementation (also used automatically when numba is not
importable).  Both backends expose the same functions with the same
signatures and raise :class:`KernelError` on failure.
"""
import os

import numpy as np

from . import _numpy
from ._common import LOGARITHMIC, SIGMOID, KernelError

__all__ = [
    "BACKEND",
    "KernelError",
    "LOGARITHMIC",
    "SIGMOID",
    "clearing_price",
    "demand",
    "ln_marginal",
    "log_marginal",
    "log_utility",
    "numba_available",
]


def _env_disabled():
    return os.environ.get("RADIOALLOC_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


try:
    from . import _numba
except ImportError:  # pragma: no cover - numba is an optional speedup
    _numba = None


def numba_available():
    return _numba is not None


BACKEND = "numba" if (_numba is not None and not _env_disabled()) else "numpy"

_STATUS_MESSAGES = {
    1: "demand exceeds rate cap; price too small",
    2: "demand bisection did not converge",
    3: "could not bracket the clearing price",
}


def _prep(kind, p1, p2, r):
    r = np.asarray(r, dtype=np.float64)
    shape = r.shape
    n = r.size
    kind = np.ascontiguousarray(np.broadcast_to(np.asarray(kind, dtype=np.int64), shape).ravel())
    p1 = np.ascontiguousarray(np.broadcast_to(np.asarray(p1, dtype=np.float64), shape).ravel())
    p2 = np.ascontiguousarray(np.broadcast_to(np.asarray(p2, dtype=np.float64), shape).ravel())
    return kind, p1, p2, np.ascontiguousarray(r.ravel()), shape, n


def _check(status):
    if status:
        raise KernelError(_STATUS_MESSAGES[status])


def _make_api(backend):
    if backend == "numpy":
        return (_numpy.log_utility, _numpy.log_marginal, _numpy.demand, _numpy.clearing_price)

    def log_utility(kind, p1, p2, r):
        kind, p1, p2, r, shape, _ = _prep(kind, p1, p2, r)
        return _numba.log_utility(kind, p1, p2, r).reshape(shape)

    def log_marginal(kind, p1, p2, r):
        kind, p1, p2, r, shape, _ = _prep(kind, p1, p2, r)
        return _numba.log_marginal(kind, p1, p2, r).reshape(shape)

    def demand(kind, p1, p2, alpha, price):
        price = np.asarray(price, dtype=np.float64)
        alpha = np.ascontiguousarray(np.broadcast_to(np.asarray(alpha, dtype=np.float64), price.shape).ravel())
        kind, p1, p2, price, shape, _ = _prep(kind, p1, p2, price)
        out, status = _numba.demand(kind, p1, p2, alpha, price)
        _check(status)
        return out.reshape(shape)

    def clearing_price(kind, p1, p2, alpha, scale, budget):
        kind = np.ascontiguousarray(kind, dtype=np.int64)
        p1, p2, alpha, scale = (np.ascontiguousarray(x, dtype=np.float64) for x in (p1, p2, alpha, scale))
        price, log_price, rates, n_bisect, status = _numba.clearing_price(
            kind, p1, p2, alpha, scale, float(budget)
        )
        _check(status)
        return float(price), float(log_price), rates, int(n_bisect)

    return log_utility, log_marginal, demand, clearing_price


def _ln_marginal_numba(kind, p1, p2, r):
    kind, p1, p2, r, shape, _ = _prep(kind, p1, p2, r)
    return _numba.ln_marginal(kind, p1, p2, r).reshape(shape)


def get_backend(name):
    """Return ``(log_utility, log_marginal, demand, clearing_price)`` for ``name``.

    ``clearing_price`` returns ``(price, log_price, demands, n_bisect)``.
    """
    if name == "numba" and _numba is None:
        raise ImportError("numba backend requested but numba is not installed")
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    return _make_api(name)


log_utility, log_marginal, demand, clearing_price = _make_api(BACKEND)
ln_marginal = _ln_marginal_numba if BACKEND == "numba" else _numpy.ln_marginal
