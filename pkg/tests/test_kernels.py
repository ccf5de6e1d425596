import numpy as np
import pytest

from radioalloc import kernels
from radioalloc.kernels import LOGARITHMIC, SIGMOID, KernelError, get_backend

BACKENDS = ["numpy"] + (["numba"] if kernels.numba_available() else [])

KIND = np.array([SIGMOID, SIGMOID, SIGMOID, LOGARITHMIC, LOGARITHMIC, LOGARITHMIC])
P1 = np.array([5.0, 3.0, 1.0, 15.0, 3.0, 0.5])
P2 = np.array([10.0, 20.0, 30.0, 100.0, 100.0, 100.0])


@pytest.fixture(params=BACKENDS)
def api(request):
    return get_backend(request.param)


def test_backend_flag_is_reported():
    assert kernels.BACKEND in ("numba", "numpy")


def test_unknown_backend():
    with pytest.raises(ValueError):
        get_backend("fortran")


def test_log_demand_unit_price(api):
    _, _, demand, _ = api
    r = demand(np.array([LOGARITHMIC]), np.array([1.0]), np.array([50.0]), np.array([1.0]), np.array([1.0]))
    assert r[0] == pytest.approx(0.7632228343518967, abs=1e-9)


def test_marginal_far_tail_is_finite(api):
    _, log_marginal, _, _ = api
    g = log_marginal(np.array([SIGMOID]), np.array([5.0]), np.array([10.0]), np.array([1e4]))
    assert np.isfinite(g).all() and g[0] >= 0


def test_clearing_price_binds(api):
    *_, clearing_price = api
    alpha = np.full(6, 0.5)
    price, log_price, rates, n = clearing_price(KIND, P1, P2, alpha, np.ones(6), 180.0)
    assert price > 0 and n > 0
    assert log_price == pytest.approx(np.log(price), rel=1e-14)
    assert rates.sum() == pytest.approx(180.0, rel=1e-8)
    assert (rates > 0).all()


def test_bad_price_bracket(api):
    _, _, demand, _ = api
    with pytest.raises(KernelError):
        # price so small that the log demand overflows the rate cap
        demand(np.array([LOGARITHMIC]), np.array([1.0]), np.array([10.0]), np.array([1.0]), np.array([1e-14]))


@pytest.mark.skipif(len(BACKENDS) < 2, reason="numba not installed")
def test_backends_agree():
    a, b = get_backend("numpy"), get_backend("numba")
    rng = np.random.default_rng(7)
    r = rng.uniform(0.01, 200.0, 200)
    kind = rng.integers(0, 2, 200)
    p1 = rng.uniform(0.3, 6.0, 200)
    p2 = rng.uniform(10.0, 120.0, 200)
    np.testing.assert_allclose(a[0](kind, p1, p2, r), b[0](kind, p1, p2, r), rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(a[1](kind, p1, p2, r), b[1](kind, p1, p2, r), rtol=1e-12, atol=1e-300)
    price = rng.uniform(1e-3, 5.0, 200)
    alpha = rng.uniform(0.1, 1.0, 200)
    np.testing.assert_allclose(a[2](kind, p1, p2, alpha, price), b[2](kind, p1, p2, alpha, price), rtol=1e-9)
    alpha6 = rng.uniform(0.1, 1.0, 6)
    pa, _, ra, _ = a[3](KIND, P1, P2, alpha6, np.ones(6), 180.0)
    pb, _, rb, _ = b[3](KIND, P1, P2, alpha6, np.ones(6), 180.0)
    assert pa == pytest.approx(pb, rel=1e-9)
    np.testing.assert_allclose(ra, rb, rtol=1e-7)
