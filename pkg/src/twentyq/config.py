"""Run configuration: JSON file + dotted overrides, validated before any work."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .channels import ChannelModel
from .kinematics import SlotSchedule
from .montecarlo import AXES

DEFAULTS: dict = {
    "schedule": {"n": [20], "d": 1, "v_plus": 0.0},
    "channel": {"type": "bsc", "zeta": 0.2, "f": {"a": 2.0, "b": 0.5}},
    "design": {"M": 2, "p": "auto", "eta": None, "enumeration": "exact", "resolution_factor": 4,
               "cap": 10**7},
    "simulation": {"trials": 1000, "base_seed": 0, "states": "uniform", "decoder": "mi",
                   "axis": "M", "values": None},
    "bounds": {"eps": 0.1},
    "phase": {"n": [100, 200, 400], "eps": 0.1, "rate_min": 0.0, "rate_max": None, "points": 201},
    "output": {"csv_path": None, "json_path": None},
}


class ConfigError(ValueError):
    """Configuration does not parse or violates a module invariant."""


def deep_merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def parse_value(text: str):
    """JSON literal if it parses (numbers, lists, null, true), else the raw string."""
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    """Apply one ``a.b.c=value`` assignment in place."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for part in parts[:-1]:
        nxt = node.get(part)
        if nxt is None:
            nxt = node[part] = {}
        if not isinstance(nxt, dict):
            raise ConfigError(f"override {key!r}: {part!r} is not a section")
        node = nxt
    node[parts[-1]] = parse_value(raw)


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    sched: SlotSchedule
    channel: ChannelModel
    M: int

    @property
    def design(self) -> dict:
        return self.raw["design"]

    @property
    def simulation(self) -> dict:
        return self.raw["simulation"]

    def resolved_p(self) -> float:
        p = self.design["p"]
        if p == "auto":
            from .infodensity import capacity
            return capacity(self.channel).p_star
        return float(p)

    def config_hash(self) -> str:
        """sha256 over the canonical JSON of everything except output locations."""
        body = {k: v for k, v in self.raw.items() if k != "output"}
        blob = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def meta(self) -> dict:
        return {"config_hash": self.config_hash(), "version": __version__}


def _validate(raw: dict) -> RunConfig:
    try:
        s = raw["schedule"]
        n = s["n"] if isinstance(s["n"], list) else [s["n"]]
        sched = SlotSchedule(tuple(int(x) for x in n), int(s["d"]), float(s["v_plus"]))
        channel = ChannelModel.from_dict(raw["channel"])
        d = raw["design"]
        M = int(d["M"])
        if M < 1:
            raise ConfigError(f"design.M must be a positive integer, got {M}")
        p = d["p"]
        if p != "auto" and not 0 < float(p) < 1:
            raise ConfigError(f"design.p must be 'auto' or lie in (0, 1), got {p}")
        if d["enumeration"] not in ("exact", "grid"):
            raise ConfigError("design.enumeration must be 'exact' or 'grid'")
        if d["eta"] is not None and not float(d["eta"]) > 0:
            raise ConfigError(f"design.eta must be > 0, got {d['eta']}")
        sim = raw["simulation"]
        if int(sim["trials"]) < 1:
            raise ConfigError("simulation.trials must be positive")
        if sim["axis"] not in AXES:
            raise ConfigError(f"simulation.axis must be one of {AXES}")
        if sim["decoder"] not in ("mi", "nn"):
            raise ConfigError("simulation.decoder must be 'mi' or 'nn'")
        if sim["states"] not in ("uniform", "adversarial"):
            raise ConfigError("simulation.states must be 'uniform' or 'adversarial'")
        eps = float(raw["bounds"]["eps"])
        if not 0 < eps < 1:
            raise ConfigError(f"bounds.eps must lie in (0, 1), got {eps}")
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(raw, sched, channel, M)


def load_config(path: str | Path | None = None, overrides=()) -> RunConfig:
    raw = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            raw = deep_merge(raw, json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for ov in overrides:
        apply_override(raw, ov)
    return _validate(raw)
