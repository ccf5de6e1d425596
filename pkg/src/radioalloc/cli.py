"""Command-line front end.

    radioalloc allocate  --preset fresh-start --out out/
    radioalloc simulate  --preset churn-5-to-6 --policy no-rebid --out out/
    radioalloc overhead  --preset overhead-grid --out out/

Every command writes its files plus ``manifest.json`` into ``--out``; files
are staged in a temporary directory and only moved into place once the
command has succeeded.  Failures print one JSON object to stderr and exit
with status 2 (bad input) or 3 (a verification check failed).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from importlib import metadata
from pathlib import Path
from typing import Optional

from . import kernels
from .centralized import allocate_centralized, kkt_certificate
from .config import OVERHEAD_SCENARIOS, ConfigError, RunConfig, load_config, preset
from .distributed import ProtocolConfig, allocate_distributed
from .kernels import KernelError
from .overhead import predict_overhead, write_trace
from .scenario import overhead_scenario_for, run_scenario, to_csv_string

EXIT_INPUT = 2
EXIT_CHECK = 3

ALLOCATION_COLUMNS = ("ue_id", "app_index", "rate", "ue_rate")
OVERHEAD_COLUMNS = (
    "scenario",
    "window_start",
    "event",
    "delta",
    "architecture",
    "policy",
    "beta_location",
    "predicted_min",
    "measured",
    "rounds",
    "converged",
)


def tool_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - running from a checkout
        from . import __version__

        return __version__


def _fmt(x: float) -> str:
    return repr(float(x))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# commands: each returns ({filename: text}, checks_passed)


def cmd_allocate(run: RunConfig) -> tuple[dict[str, str], bool]:
    script = run.script
    ues = list(script.initial_ues)
    eura = None
    if script.architecture == "centralized":
        alloc = allocate_centralized(ues, script.R)
    else:
        alloc, eura = allocate_distributed(ues, script.R, script.cfg)
    cert = kkt_certificate(ues, script.R, alloc)

    rows = [
        [uid, j, _fmt(r), _fmt(alloc.per_ue_rates[uid])]
        for (uid, j), r in alloc.per_app_rates.items()
    ]
    report = cert.as_dict()
    report["architecture"] = script.architecture
    if eura is not None:
        report["eura_converged"] = eura.converged
        report["eura_slots"] = eura.slots
    files = {"allocation.csv": _csv(ALLOCATION_COLUMNS, rows), "certificate.json": _json(report)}
    # bidding stops at the delta threshold, so only feasibility is binding there
    ok = cert.passed if eura is None else (eura.converged and cert.feasibility_ok)
    return files, ok


def cmd_simulate(run: RunConfig) -> tuple[dict[str, str], bool]:
    result = run_scenario(run.script)
    trace = io.StringIO()
    write_trace(result.trace, trace)
    windows = [
        {
            "start": w.start,
            "end": w.end,
            "ue_ids": list(w.ue_ids),
            "joined": list(w.joined),
            "left": list(w.left),
            "changed": list(w.changed),
            "converged": w.converged,
            "converged_at": w.converged_at,
            "rounds": w.rounds,
            "overhead": w.overhead,
            "steady_price": w.steady_price,
            "oracle_price": w.oracle.price,
        }
        for w in result.windows
    ]
    files = {
        "timeseries.csv": to_csv_string(result),
        "trace.jsonl": trace.getvalue(),
        "windows.json": _json(windows),
    }
    return files, result.all_converged


def _overhead_rows(job):
    name, delta, arch, policy, beta_location = job
    script = OVERHEAD_SCENARIOS[name](
        architecture=arch, policy=policy, cfg=ProtocolConfig(delta=delta, beta_location=beta_location)
    )
    result = run_scenario(script)
    rows = []
    for w in result.windows:
        s = overhead_scenario_for(script, w)
        event = s.kind if s.kind != "churn" else f"churn {s.M1}->{s.M2}"
        rows.append(
            [name, w.start, event, _fmt(delta), arch, policy, beta_location,
             predict_overhead(s), w.overhead, w.rounds, w.converged]
        )
    return rows


def cmd_overhead(run: RunConfig, workers: int = 1) -> tuple[dict[str, str], bool]:
    jobs = [
        (name, delta, arch, policy, bl)
        for name in run.overhead_scenarios
        for delta in run.deltas
        for arch in ("centralized", "distributed")
        for policy in ("rebid", "no-rebid")
        for bl in ("ue", "enb")
    ]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_overhead_rows, jobs))
    else:
        chunks = [_overhead_rows(job) for job in jobs]
    rows = [row for chunk in chunks for row in chunk]
    ok = all(row[8] >= row[7] and row[10] for row in rows)
    return {"overhead.csv": _csv(OVERHEAD_COLUMNS, rows)}, ok


# --------------------------------------------------------------------------
# plumbing


def _resolve(args) -> RunConfig:
    if args.config and args.preset:
        raise ConfigError("use either --config or --preset, not both")
    if args.config:
        run = load_config(args.config)
    else:
        run = preset(args.preset or DEFAULT_PRESET[args.command])
        if args.command == "allocate" and args.arch is None:
            args.arch = "centralized"
    try:
        return run.with_overrides(
            delta=args.delta,
            policy=args.policy,
            architecture=args.arch,
            beta_location=args.beta_location,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


DEFAULT_PRESET = {"allocate": "fresh-start", "simulate": "usage-sweep", "overhead": "overhead-grid"}


def manifest(args, run: RunConfig, outputs) -> dict:
    return {
        "command": args.command,
        "config_path": args.config,
        "preset": run.preset,
        "config_hash": run.content_hash(),
        "config_file_sha256": run.raw_hash,
        "resolved": run.resolved(),
        "outputs": sorted(outputs),
        "tool_version": tool_version(),
        "kernel_backend": kernels.BACKEND,
        "deterministic": True,
    }


def _write_atomically(out: Path, files: dict[str, str]) -> None:
    out.mkdir(parents=True, exist_ok=True)
    stage = Path(tempfile.mkdtemp(prefix=".stage-", dir=out))
    try:
        for name, text in files.items():
            (stage / name).write_text(text, encoding="utf-8")
        for name in files:
            os.replace(stage / name, out / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radioalloc", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "allocate": "one-shot allocation with KKT certificate",
        "simulate": "time-slotted scenario run with error traces",
        "overhead": "predicted vs measured transmission counts over a delta grid",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        src = p.add_mutually_exclusive_group()
        src.add_argument("--config", metavar="PATH", help="TOML run configuration")
        src.add_argument("--preset", metavar="NAME", help="built-in configuration")
        p.add_argument("--out", metavar="DIR", default="out", help="output directory (default: out)")
        p.add_argument("--delta", type=float, help="bid-change termination threshold")
        p.add_argument("--policy", choices=("rebid", "no-rebid"))
        p.add_argument("--arch", choices=("centralized", "distributed"))
        p.add_argument("--beta-location", dest="beta_location", choices=("ue", "enb"))
        p.add_argument(
            "--seedless",
            action="store_true",
            help="no-op: runs are always deterministic and use no random numbers",
        )
        if name == "overhead":
            p.add_argument("--workers", type=int, default=1, help="parallel scenario runs")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = _resolve(args)
        if args.command == "allocate":
            files, ok = cmd_allocate(run)
        elif args.command == "simulate":
            files, ok = cmd_simulate(run)
        else:
            files, ok = cmd_overhead(run, workers=args.workers)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_INPUT)
    except KernelError as exc:
        return _fail("solver", str(exc), EXIT_INPUT)
    except (ValueError, KeyError, TypeError) as exc:
        return _fail(type(exc).__name__, str(exc), EXIT_INPUT)

    files["manifest.json"] = _json(manifest(args, run, list(files) + ["manifest.json"]))
    _write_atomically(Path(args.out), files)
    if not ok:
        return _fail("check", f"{args.command}: verification failed, see outputs in {args.out}", EXIT_CHECK)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
