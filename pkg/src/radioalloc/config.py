"""Run configuration: TOML files and built-in presets.

A configuration file has four sections::

    [network]
    R = 180.0

    [run]
    architecture = "distributed"   # or "centralized"
    policy = "rebid"               # or "no-rebid"
    beta_location = "ue"           # or "enb"
    delta = 1e-3
    damping = 1.0
    max_slots = 10000
    horizon = 200                  # optional, slots to simulate

    [[ues]]
    id = "UE1"
    beta = 1.0
    apps = [
      { type = "sigmoid", a = 5.0, b = 10.0, alpha = 0.9 },
      { type = "log", k_log = 15.0, r_max = 100.0, alpha = 0.1 },
    ]

    [[events]]
    slot = 101
    join = { id = "UE6", beta = 1.0, apps = [ ... ] }
    # or: leave = "UE5"
    # or: set_alphas = { ue = "UE1", alphas = [0.5, 0.5] }

An optional ``[overhead]`` section lists preset scenario names and a delta
grid for the ``overhead`` command.  Rates are unitless.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .distributed import ProtocolConfig
from .scenario import (
    Event,
    JoinUE,
    LeaveUE,
    ScenarioScript,
    SetAlphas,
    churn_script,
    fresh_script,
    usage_change_script,
    usage_sweep_script,
)
from .utility import LogParams, SigmoidParams, UEProfile


class ConfigError(ValueError):
    """The configuration is malformed or inconsistent."""


DEFAULT_DELTAS = (1e-2, 1e-3, 1e-4)
DEFAULT_OVERHEAD_SCENARIOS = ("fresh", "churn-5-to-6", "churn-6-to-4", "usage-2-of-6")


@dataclass(frozen=True)
class RunConfig:
    script: ScenarioScript
    overhead_scenarios: tuple[str, ...] = DEFAULT_OVERHEAD_SCENARIOS
    deltas: tuple[float, ...] = DEFAULT_DELTAS
    source: Optional[str] = None
    preset: Optional[str] = None
    raw_hash: Optional[str] = field(default=None, compare=False)

    def with_overrides(
        self,
        delta: Optional[float] = None,
        policy: Optional[str] = None,
        architecture: Optional[str] = None,
        beta_location: Optional[str] = None,
    ) -> "RunConfig":
        cfg = self.script.cfg
        if delta is not None:
            cfg = replace(cfg, delta=delta)
        if beta_location is not None:
            cfg = replace(cfg, beta_location=beta_location)
        script = self.script.replace(
            cfg=cfg,
            policy=policy or self.script.policy,
            architecture=architecture or self.script.architecture,
        )
        deltas = (delta,) if delta is not None else self.deltas
        return replace(self, script=script, deltas=deltas)

    def resolved(self) -> dict:
        """Canonical, JSON-serializable description of everything the run uses."""
        d = script_to_dict(self.script)
        d["overhead"] = {"scenarios": list(self.overhead_scenarios), "deltas": list(self.deltas)}
        return d

    def content_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# --------------------------------------------------------------------------
# parsing


def _num(d: dict, key: str, where: str, default: Any = None) -> float:
    if key not in d:
        if default is None:
            raise ConfigError(f"{where}: missing '{key}'")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}: '{key}' must be a number, got {v!r}")
    return float(v)


def _parse_app(d: Any, where: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: application must be a table")
    kind = d.get("type")
    try:
        if kind == "sigmoid":
            u = SigmoidParams(_num(d, "a", where), _num(d, "b", where))
        elif kind == "log":
            u = LogParams(_num(d, "k_log", where), _num(d, "r_max", where))
        else:
            raise ConfigError(f"{where}: type must be 'sigmoid' or 'log', got {kind!r}")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{where}: {exc}") from None
    return u, _num(d, "alpha", where)


def _parse_ue(d: Any, where: str) -> UEProfile:
    if not isinstance(d, dict):
        raise ConfigError(f"{where}: UE must be a table")
    uid = d.get("id")
    if not isinstance(uid, str) or not uid:
        raise ConfigError(f"{where}: UE needs a string 'id'")
    apps = d.get("apps")
    if not isinstance(apps, list) or not apps:
        raise ConfigError(f"{where} ({uid}): 'apps' must be a non-empty list")
    parsed = [_parse_app(a, f"{where} ({uid}) app {j}") for j, a in enumerate(apps)]
    try:
        return UEProfile.build(uid, [u for u, _ in parsed], [a for _, a in parsed], _num(d, "beta", where, 1.0))
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _parse_events(items: list, where: str = "events") -> list[Event]:
    by_slot: dict[int, list] = {}
    for n, ev in enumerate(items):
        at = f"{where}[{n}]"
        if not isinstance(ev, dict):
            raise ConfigError(f"{at}: event must be a table")
        slot = ev.get("slot")
        if isinstance(slot, bool) or not isinstance(slot, int):
            raise ConfigError(f"{at}: 'slot' must be an integer")
        actions = by_slot.setdefault(slot, [])
        keys = [k for k in ("join", "leave", "set_alphas") if k in ev]
        if len(keys) != 1:
            raise ConfigError(f"{at}: exactly one of join / leave / set_alphas required")
        if "join" in ev:
            actions.append(JoinUE(_parse_ue(ev["join"], at)))
        elif "leave" in ev:
            if not isinstance(ev["leave"], str):
                raise ConfigError(f"{at}: 'leave' must be a UE id")
            actions.append(LeaveUE(ev["leave"]))
        else:
            sa = ev["set_alphas"]
            if not isinstance(sa, dict) or not isinstance(sa.get("ue"), str) or not isinstance(sa.get("alphas"), list):
                raise ConfigError(f"{at}: set_alphas needs 'ue' and 'alphas'")
            alphas = [_num({"a": a}, "a", at) for a in sa["alphas"]]
            actions.append(SetAlphas(sa["ue"], tuple(alphas)))
    return [Event(slot, acts) for slot, acts in sorted(by_slot.items())]


def parse_config(data: dict, source: Optional[str] = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a table")
    unknown = set(data) - {"network", "run", "ues", "events", "overhead"}
    if unknown:
        raise ConfigError(f"unknown sections: {sorted(unknown)}")
    network = data.get("network", {})
    run = data.get("run", {})
    if "R" not in network:
        raise ConfigError("[network] needs 'R'")
    R = _num(network, "R", "[network]")
    ues_raw = data.get("ues")
    if not isinstance(ues_raw, list) or not ues_raw:
        raise ConfigError("[[ues]] must list at least one UE")
    ues = [_parse_ue(u, f"ues[{n}]") for n, u in enumerate(ues_raw)]

    try:
        cfg = ProtocolConfig(
            delta=_num(run, "delta", "[run]", 1e-3),
            beta_location=run.get("beta_location", "ue"),
            damping=_num(run, "damping", "[run]", 1.0),
            max_slots=int(_num(run, "max_slots", "[run]", 10_000)),
        )
        horizon = run.get("horizon")
        if horizon is not None and (isinstance(horizon, bool) or not isinstance(horizon, int)):
            raise ConfigError("[run] horizon must be an integer")
        script = ScenarioScript(
            tuple(ues),
            R,
            tuple(_parse_events(data.get("events", []))),
            policy=run.get("policy", "rebid"),
            architecture=run.get("architecture", "distributed"),
            cfg=cfg,
            horizon=horizon,
        )
    except ConfigError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise ConfigError(str(exc)) from None

    ov = data.get("overhead", {})
    scenarios = tuple(ov.get("scenarios", DEFAULT_OVERHEAD_SCENARIOS))
    for name in scenarios:
        if name not in OVERHEAD_SCENARIOS:
            raise ConfigError(f"[overhead] unknown scenario {name!r}; choose from {sorted(OVERHEAD_SCENARIOS)}")
    deltas = tuple(_num({"d": d}, "d", "[overhead] deltas") for d in ov.get("deltas", DEFAULT_DELTAS))
    if not deltas or any(d <= 0 for d in deltas):
        raise ConfigError("[overhead] deltas must be positive")
    return RunConfig(script, scenarios, deltas, source=source)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(raw.decode("utf-8"))
    except (tomllib.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    cfg = parse_config(data, source=str(path))
    return replace(cfg, raw_hash=hashlib.sha256(raw).hexdigest())


# --------------------------------------------------------------------------
# serialization (used for manifests and content hashing)


def _utility_dict(u) -> dict:
    if isinstance(u, SigmoidParams):
        return {"type": "sigmoid", "a": u.a, "b": u.b}
    return {"type": "log", "k_log": u.k_log, "r_max": u.r_max}


def ue_to_dict(ue: UEProfile) -> dict:
    return {
        "id": ue.id,
        "beta": ue.beta,
        "apps": [dict(_utility_dict(app.utility), alpha=app.alpha) for app in ue.apps],
    }


def script_to_dict(script: ScenarioScript) -> dict:
    events = []
    for ev in script.events:
        for act in ev.actions:
            if isinstance(act, JoinUE):
                events.append({"slot": ev.slot, "join": ue_to_dict(act.profile)})
            elif isinstance(act, LeaveUE):
                events.append({"slot": ev.slot, "leave": act.ue_id})
            else:
                events.append({"slot": ev.slot, "set_alphas": {"ue": act.ue_id, "alphas": list(act.alphas)}})
    return {
        "network": {"R": script.R},
        "run": {
            "architecture": script.architecture,
            "policy": script.policy,
            "beta_location": script.cfg.beta_location,
            "delta": script.cfg.delta,
            "damping": script.cfg.damping,
            "max_slots": script.cfg.max_slots,
            "horizon": script.n_slots,
        },
        "ues": [ue_to_dict(ue) for ue in script.initial_ues],
        "events": events,
    }


# --------------------------------------------------------------------------
# presets

OVERHEAD_SCENARIOS = {
    "fresh": lambda **kw: fresh_script(6, **kw),
    "churn-5-to-6": lambda **kw: churn_script(5, 6, **kw),
    "churn-6-to-4": lambda **kw: churn_script(6, 4, **kw),
    "usage-2-of-6": lambda **kw: usage_change_script(6, 2, **kw),
    "usage-sweep": lambda **kw: usage_sweep_script(**kw),
}

PRESETS = {
    "fresh-start": "fresh",
    "usage-sweep": "usage-sweep",
    "churn-5-to-6": "churn-5-to-6",
    "churn-6-to-4": "churn-6-to-4",
    "usage-2-of-6": "usage-2-of-6",
    "overhead-grid": "usage-sweep",
}


def preset(name: str) -> RunConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    script = OVERHEAD_SCENARIOS[PRESETS[name]](cfg=ProtocolConfig(delta=1e-3))
    scenarios = DEFAULT_OVERHEAD_SCENARIOS + ("usage-sweep",) if name == "overhead-grid" else DEFAULT_OVERHEAD_SCENARIOS
    return RunConfig(script, scenarios, DEFAULT_DELTAS, preset=name)
