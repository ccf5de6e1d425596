import csv
import io
import json
from pathlib import Path

import pytest

from radioalloc.cli import ALLOCATION_COLUMNS, OVERHEAD_COLUMNS, main
from radioalloc.scenario import CSV_COLUMNS

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "default-cell.toml"


def run(*argv):
    return main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_allocate_default_config(tmp_path):
    assert run("allocate", "--config", CONFIG, "--out", tmp_path) == 0
    table = rows(tmp_path / "allocation.csv")
    assert tuple(table[0]) == ALLOCATION_COLUMNS
    assert abs(sum(float(r["rate"]) for r in table) - 180.0) <= 1e-4
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["passed"]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "allocate"
    assert manifest["resolved"]["network"]["R"] == 180.0
    assert set(manifest["outputs"]) == {"allocation.csv", "certificate.json", "manifest.json"}


def test_uniform_beta_scaling_keeps_rates(tmp_path):
    scaled = tmp_path / "scaled.toml"
    scaled.write_text(CONFIG.read_text().replace("beta = 1.0", "beta = 2.0"))
    assert run("allocate", "--config", CONFIG, "--out", tmp_path / "a") == 0
    assert run("allocate", "--config", scaled, "--out", tmp_path / "b") == 0
    assert (tmp_path / "a/allocation.csv").read_bytes() == (tmp_path / "b/allocation.csv").read_bytes()


def test_distributed_allocate(tmp_path):
    assert run("allocate", "--config", CONFIG, "--arch", "distributed", "--out", tmp_path) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["eura_converged"] and cert["architecture"] == "distributed"


@pytest.mark.parametrize(
    "text",
    [
        "[network]\nR = 180.0\n",
        "this is not toml ===",
        CONFIG.read_text().replace("R = 180.0", "R = -1.0"),
        CONFIG.read_text().replace('type = "log"', 'type = "cubic"'),
        CONFIG.read_text().replace("[run]", "[runn]"),
    ],
)
def test_malformed_config_writes_nothing(tmp_path, capsys, text):
    bad = tmp_path / "bad.toml"
    bad.write_text(text)
    out = tmp_path / "out"
    assert run("allocate", "--config", bad, "--out", out) == 2
    assert not out.exists()
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config"


def test_unknown_preset(tmp_path):
    assert run("simulate", "--preset", "nope", "--out", tmp_path / "x") == 2
    assert not (tmp_path / "x").exists()


def test_config_and_preset_are_exclusive(tmp_path):
    with pytest.raises(SystemExit):
        run("allocate", "--config", CONFIG, "--preset", "fresh-start", "--out", tmp_path)


def test_simulate_usage_sweep(tmp_path):
    assert run("simulate", "--preset", "usage-sweep", "--seedless", "--out", tmp_path) == 0
    table = rows(tmp_path / "timeseries.csv")
    assert tuple(table[0]) == CSV_COLUMNS
    assert {int(r["slot"]) for r in table} == set(range(1, 501))
    windows = json.loads((tmp_path / "windows.json").read_text())
    assert [w["start"] for w in windows] == [1, 101, 201, 301, 401]
    assert (tmp_path / "trace.jsonl").stat().st_size > 0


def test_simulate_churn_has_error_columns(tmp_path):
    assert run("simulate", "--preset", "churn-5-to-6", "--policy", "no-rebid", "--out", tmp_path) == 0
    table = rows(tmp_path / "timeseries.csv")
    late = [r for r in table if int(r["slot"]) == 200]
    assert len(late) == 6
    assert float(late[0]["price_err"]) > 0


def test_simulate_is_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert run("simulate", "--config", CONFIG, "--arch", "distributed", "--out", tmp_path / d) == 0
    for name in ("timeseries.csv", "trace.jsonl", "windows.json", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_overrides_change_hash(tmp_path):
    run("simulate", "--preset", "churn-6-to-4", "--out", tmp_path / "a")
    run("simulate", "--preset", "churn-6-to-4", "--delta", "1e-2", "--out", tmp_path / "b")
    ma = json.loads((tmp_path / "a/manifest.json").read_text())
    mb = json.loads((tmp_path / "b/manifest.json").read_text())
    assert ma["config_hash"] != mb["config_hash"]
    assert mb["resolved"]["run"]["delta"] == 1e-2


def test_overhead_grid(tmp_path):
    assert run("overhead", "--preset", "overhead-grid", "--out", tmp_path) == 0
    table = rows(tmp_path / "overhead.csv")
    assert tuple(table[0]) == OVERHEAD_COLUMNS
    for r in table:
        assert int(r["measured"]) >= int(r["predicted_min"])
        if r["architecture"] == "centralized":
            assert r["measured"] == r["predicted_min"]
    # centralized counts do not depend on delta
    cent = {}
    for r in table:
        if r["architecture"] == "centralized":
            key = (r["scenario"], r["window_start"], r["policy"], r["beta_location"])
            cent.setdefault(key, set()).add(r["measured"])
    assert all(len(v) == 1 for v in cent.values())


def test_overhead_workers_match_serial(tmp_path):
    cfg = tmp_path / "grid.toml"
    cfg.write_text(CONFIG.read_text() + '\n[overhead]\nscenarios = ["fresh", "churn-6-to-4"]\ndeltas = [1e-2, 1e-3]\n')
    assert run("overhead", "--config", cfg, "--out", tmp_path / "s") == 0
    assert run("overhead", "--config", cfg, "--workers", "2", "--out", tmp_path / "p") == 0
    assert (tmp_path / "s/overhead.csv").read_bytes() == (tmp_path / "p/overhead.csv").read_bytes()
    # 16 combinations per scenario; fresh has one window, churn two
    assert len(rows(tmp_path / "s/overhead.csv")) == 16 * (1 + 2)
