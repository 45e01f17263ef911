"""Command-line entry point: ``twentyq <subcommand> [--config PATH] [--set k=v ...]``.

Exit codes: 0 success, 1 invalid configuration, 2 resource cap exceeded,
3 a verify check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import checks
from .bounds import (MODES, ZEROED_NOTE, BoundQuery, achievability_bound, best_eta, converse_bound,
                     phase_curve, second_order_rates)
from .config import ConfigError, RunConfig, load_config
from .infodensity import capacity
from .montecarlo import SweepConfig, TrialPlan, rows_to_csv, sweep
from .trajectories import EnumerationCapExceeded, enumerate_first_slot

EXIT_OK, EXIT_CONFIG, EXIT_CAP, EXIT_CHECK = 0, 1, 2, 3
SUBCOMMANDS = ("capacity", "bounds", "simulate", "phase", "trajectories", "verify")


def _json_default(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _finite(x):
    """JSON has no inf/nan; encode them as strings."""
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    if isinstance(x, dict):
        return {k: _finite(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_finite(v) for v in x]
    return x


def _out_path(cfg: RunConfig, out_dir: Path, key: str, default: str) -> Path:
    name = cfg.raw["output"].get(key) or default
    path = Path(name)
    return path if path.is_absolute() else out_dir / path


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_finite(payload), indent=2, sort_keys=True, default=_json_default) + "\n",
                    encoding="utf-8")


def _write_csv(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def cmd_capacity(cfg: RunConfig, args) -> int:
    rep = capacity(cfg.channel)
    path = _out_path(cfg, args.out, "json_path", "capacity.json")
    _write_json(path, {"meta": cfg.meta(), "channel": cfg.channel.to_dict(), "capacity": rep.to_dict()})
    print(f"C = {rep.C!r} nats at p = {list(rep.maximizers)} -> {path}")
    return EXIT_OK


def _achievability(cfg: RunConfig, p: float) -> dict:
    out = {}
    eta_cfg = cfg.design["eta"]
    for mode in MODES:
        if mode == "rcu_exact" and not cfg.channel.discrete:
            out[mode] = {"skipped": "rcu_exact needs a discrete channel"}
            continue
        eta = best_eta(cfg.sched, cfg.M, p, cfg.channel, mode) if eta_cfg is None else float(eta_cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = achievability_bound(BoundQuery(cfg.sched, cfg.M, p, eta, cfg.channel, mode))
        out[mode] = dict(res.to_dict(), eta=eta)
    return out


def cmd_bounds(cfg: RunConfig, args) -> int:
    p = cfg.resolved_p()
    eps = float(cfg.raw["bounds"]["eps"])
    payload = {"meta": dict(cfg.meta(), zeroed_terms=ZEROED_NOTE), "p": p, "M": cfg.M,
               "delta": (cfg.sched.num_slots + 1) / cfg.M, "achievability": _achievability(cfg, p)}
    try:
        conv = converse_bound(cfg.sched, eps, cfg.channel)
        payload["converse"] = {"eps": eps, "neg_log_delta_bound": conv.value, "rate": conv.rate(cfg.sched),
                               "q_star": conv.q_star, "beta": conv.beta, "kappa": conv.kappa}
    except ValueError as exc:
        payload["converse"] = {"eps": eps, "unavailable": str(exc)}
    try:
        payload["second_order"] = second_order_rates(cfg.sched, eps, cfg.channel, p=p).to_dict()
    except ValueError as exc:
        payload["second_order"] = {"unavailable": str(exc)}
    path = _out_path(cfg, args.out, "json_path", "bounds.json")
    _write_json(path, payload)
    for mode, r in payload["achievability"].items():
        print(f"{mode}: {r.get('bound', r.get('skipped'))}")
    print(f"-> {path}")
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    sim = cfg.simulation
    p = cfg.resolved_p()
    base = TrialPlan(cfg.sched, cfg.M, p, cfg.channel, int(sim["trials"]), int(sim["base_seed"]),
                     states=sim["states"], decoder=sim["decoder"],
                     resolution_factor=int(cfg.design["resolution_factor"]), cap=float(cfg.design["cap"]),
                     enumeration=cfg.design["enumeration"])
    axis = sim["axis"]
    values = sim["values"]
    if values is None:
        values = [cfg.M] if axis == "M" else None
    if values is None:
        raise ConfigError(f"simulation.values is required when sweeping axis {axis!r}")
    eta = cfg.design["eta"]
    sc = SweepConfig(base, axis, tuple(values), None if eta is None else float(eta))
    per_trial: list[dict] = []
    rows = sweep(sc, args.threads, per_trial)
    path = _out_path(cfg, args.out, "csv_path", "simulate.csv")
    _write_csv(path, rows_to_csv(rows, extra=cfg.meta()))
    trial_cols = list(per_trial[0]) if per_trial else []
    margin_cols = sorted({k for r in per_trial for k in r if k.startswith("margin_")})
    trial_cols = [c for c in trial_cols if not c.startswith("margin_")] + margin_cols
    filled = [{c: r.get(c, "") for c in trial_cols} for r in per_trial]
    tpath = path.with_name(path.stem + ".trials.csv")
    _write_csv(tpath, rows_to_csv(filled, columns=trial_cols, extra=cfg.meta()))
    for r in rows:
        print(f"{axis}={r['value']}: p_hat={r['p_hat']:.4g} [{r['ci_lo']:.4g}, {r['ci_hi']:.4g}] "
              f"bound_rcu={r['bound_rcu']:.4g}")
    print(f"-> {path}, {tpath}")
    return EXIT_OK


PHASE_COLUMNS = ("n", "rate", "epsilon_star", "threshold")


def cmd_phase(cfg: RunConfig, args) -> int:
    ph = cfg.raw["phase"]
    ns = ph["n"] if isinstance(ph["n"], list) else [ph["n"]]
    d = cfg.sched.dimension
    cap = capacity(cfg.channel)
    rate_max = cap.C / d if ph["rate_max"] is None else float(ph["rate_max"])
    grid = np.linspace(float(ph["rate_min"]), rate_max, int(ph["points"]))
    rows = []
    threshold = None
    for n in ns:
        curve = phase_curve(int(n), d, cfg.channel, float(ph["eps"]), grid, cap=cap)
        threshold = curve.threshold
        rows += [{"n": int(n), "rate": float(r), "epsilon_star": float(e), "threshold": curve.threshold}
                 for r, e in zip(curve.rates, curve.eps_star)]
    rows.append({"n": "threshold", "rate": threshold, "epsilon_star": 0.5, "threshold": threshold})
    path = _out_path(cfg, args.out, "csv_path", "phase.csv")
    _write_csv(path, rows_to_csv(rows, columns=PHASE_COLUMNS, extra=cfg.meta()))
    print(f"{len(ns)} curves, threshold C/(2d) = {threshold!r} -> {path}")
    return EXIT_OK


def cmd_trajectories(cfg: RunConfig, args) -> int:
    tset = enumerate_first_slot(cfg.sched, cfg.M, int(cfg.design["resolution_factor"]),
                                float(cfg.design["cap"]), cfg.design["enumeration"])
    n, d = tset.slot_length, tset.dimension
    cell_cols = [f"cell_t{t + 1}" + (f"_x{k + 1}" if d > 1 else "") for t in range(n) for k in range(d)]
    s_cols = [f"witness_s{k + 1}" for k in range(d)]
    v_cols = [f"witness_v{k + 1}" for k in range(d)]
    cols = cell_cols + s_cols + v_cols
    flat = tset.flat()
    rows = []
    for i in range(len(tset)):
        row = dict(zip(cell_cols, (int(c) for c in flat[i])))
        row.update(zip(s_cols, (float(x) for x in tset.witness_s[i])))
        row.update(zip(v_cols, (float(x) for x in tset.witness_v[i])))
        rows.append(row)
    path = _out_path(cfg, args.out, "csv_path", "trajectories.csv")
    _write_csv(path, rows_to_csv(rows, columns=cols, extra=cfg.meta()))
    print(f"{len(tset)} first-slot trajectories -> {path}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, args) -> int:
    results = checks.run_all(cfg.sched, cfg.M, cfg.resolved_p(), cfg.channel, float(cfg.design["cap"]),
                             int(cfg.simulation["base_seed"]))
    for r in results:
        print(r.line())
    path = _out_path(cfg, args.out, "json_path", "verify.json")
    _write_json(path, {"meta": cfg.meta(),
                       "checks": [{"name": r.name, "passed": r.passed, "detail": r.detail} for r in results]})
    return EXIT_CHECK if checks.any_failed(results) else EXIT_OK


COMMANDS = {"capacity": cmd_capacity, "bounds": cmd_bounds, "simulate": cmd_simulate,
            "phase": cmd_phase, "trajectories": cmd_trajectories, "verify": cmd_verify}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="twentyq", description="Noisy search for a moving target.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, default=None, help="JSON config file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                    help="dotted-path override, e.g. design.M=4 (repeatable)")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("."), help="output directory")
    ap.add_argument("--n", default=None, help="phase: comma-separated n list (same as --set phase.n=[...])")
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.n is not None:
        overrides.append("phase.n=[" + args.n + "]")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.subcommand](cfg, args)
    except (EnumerationCapExceeded, MemoryError) as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValueError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())
