import io

import pytest

from radioalloc.distributed import ProtocolConfig
from radioalloc.overhead import (
    Channel,
    Direction,
    MessageKind,
    OverheadScenario,
    measure_overhead,
    predict_overhead,
    read_trace,
    write_trace,
)
from radioalloc.scenario import fresh_script, run_scenario


@pytest.mark.parametrize(
    "scenario, expected",
    [
        (OverheadScenario("fresh", "centralized", M=6), 12),
        (OverheadScenario("churn", "distributed", "rebid", "ue", M1=5, M2=6), 9),
        (OverheadScenario("churn", "distributed", "rebid", "enb", M1=5, M2=6), 19),
        (OverheadScenario("churn", "distributed", "no-rebid", "ue", M1=6, M2=4), 2),
        (OverheadScenario("usage", "distributed", "rebid", "ue", M=6, M_prime=2), 10),
        (OverheadScenario("usage", "distributed", "no-rebid", "ue", M=6, M_prime=2), 3),
        (OverheadScenario("usage", "centralized", M=6, M_prime=2), 8),
    ],
)
def test_reference_counts(scenario, expected):
    assert predict_overhead(scenario) == expected


@pytest.mark.parametrize(
    "M1, M2, expected",
    [(5, 6, 7), (6, 4, 6)],
)
def test_centralized_churn(M1, M2, expected):
    assert predict_overhead(OverheadScenario("churn", "centralized", M1=M1, M2=M2)) == expected


def test_no_rebid_growth():
    s = dict(kind="churn", policy="no-rebid", M1=3, M2=7, n_iter=2)
    assert predict_overhead(OverheadScenario(beta_location="ue", **s)) == 2 * 4 + 2
    assert predict_overhead(OverheadScenario(beta_location="enb", **s)) == 6 * 4


def test_rebid_minimum_exceeds_no_rebid():
    for where in ("ue", "enb"):
        for M1, M2 in ((5, 6), (6, 4), (2, 9)):
            rebid = predict_overhead(OverheadScenario("churn", policy="rebid", beta_location=where, M1=M1, M2=M2))
            lazy = predict_overhead(OverheadScenario("churn", policy="no-rebid", beta_location=where, M1=M1, M2=M2))
            assert rebid > lazy


def test_grows_with_rounds():
    counts = [predict_overhead(OverheadScenario("usage", M=6, M_prime=2, n_iter=k)) for k in (1, 2, 3)]
    assert counts[0] < counts[1] < counts[2]


@pytest.mark.parametrize(
    "kw",
    [
        dict(kind="teleport"),
        dict(kind="churn", M1=4, M2=4),
        dict(kind="churn", M1=4, M2=0),
        dict(kind="usage", M=3, M_prime=0),
        dict(kind="usage", M=3, M_prime=4),
        dict(kind="fresh", M=0),
        dict(kind="fresh", M=2, n_iter=0),
        dict(kind="fresh", M=2, beta_location="cloud"),
    ],
)
def test_invalid_scenarios(kw):
    with pytest.raises(ValueError):
        OverheadScenario(**kw)


def test_empty_trace():
    assert measure_overhead([]) == 0
    assert measure_overhead([], (1, 10)) == 0


def test_broadcast_counts_once():
    ch = Channel()
    ch.broadcast(MessageKind.PRICE, 1)
    ch.unicast(MessageKind.BID, 1, "a")
    ch.unicast(MessageKind.BID, 2, "b")
    assert measure_overhead(ch.records) == 3
    assert measure_overhead(ch.records, (2, 2)) == 1
    assert ch.records[1].direction == Direction.UPLINK
    assert ch.records[0].direction == Direction.DOWNLINK


def test_centralized_fresh_run_measures_twelve():
    result = run_scenario(fresh_script(architecture="centralized"))
    kinds = [m.kind for m in result.trace]
    assert measure_overhead(result.trace) == 12
    assert kinds.count(MessageKind.UTILITY_PARAMS) == 6
    assert kinds.count(MessageKind.RATE_ASSIGNMENT) == 6


def test_distributed_fresh_run_accounting():
    result = run_scenario(fresh_script())
    w = result.windows[0]
    k = w.rounds
    # M initial bids + first price, then k rounds of M bids and one price
    assert measure_overhead(result.trace) == 6 + 1 + k * (6 + 1)


def test_trace_round_trip():
    result = run_scenario(fresh_script(cfg=ProtocolConfig(beta_location="enb")))
    buf = io.StringIO()
    write_trace(result.trace, buf)
    buf.seek(0)
    assert tuple(read_trace(buf)) == tuple(result.trace)
