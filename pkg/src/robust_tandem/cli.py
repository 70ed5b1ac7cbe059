"""Command-line entry point ``robust-tandem``."""

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from importlib import metadata

import numpy as np

from . import config as cfgmod
from .config import ExperimentConfig, fmt
from .engine import phi_delta_scheme, propagate, social_trajectory
from .exceptions import ClassesNotDisjointError, ConfigError, RobustTandemError
from .lfd import UncertaintySpec, solve_breakpoints
from .models import model_from_dict
from .optimize import (
    FATOL,
    GRID_SIZE,
    VERIFY_TOL,
    XATOL,
    optimize_asymptotic_dd,
    optimize_finite_dd,
    optimize_unknown_sl,
    unknown_sl_terms,
)
from .rules import RelayRule, first_agent_rule, FirstAgentRule
from .simulation import ContaminationSpec, simulate_chain

COMMANDS = ("lfd", "chain", "optimize", "simulate", "figure")


def _threads():
    env = os.environ.get("RT_THREADS")
    return max(1, int(env)) if env else 1


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if hasattr(o, "to_dict"):
        return o.to_dict()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats by strings so the JSON stays standard."""
    if isinstance(o, dict):
        return {k: _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, (float, np.floating)):
        o = float(o)
        if math.isinf(o):
            return "inf" if o > 0 else "-inf"
        if math.isnan(o):
            return "nan"
    return o


class Writer:
    def __init__(self, prefix):
        self.prefix = prefix
        self.outputs = []

    def path(self, name):
        p = f"{self.prefix}_{name}" if not self.prefix.endswith(os.sep) else f"{self.prefix}{name}"
        parent = os.path.dirname(p)
        if parent:
            os.makedirs(parent, exist_ok=True)
        self.outputs.append(p)
        return p

    def csv(self, name, header, rows):
        with open(self.path(name), "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])

    def json(self, name, obj):
        with open(self.path(name), "w", encoding="utf-8") as fh:
            json.dump(_clean(json.loads(json.dumps(obj, default=_json_default))), fh, indent=2)
            fh.write("\n")


# --- rule resolution -----------------------------------------------------------------------


def _token(value, lfd):
    if value == "lower":
        return lfd.lower
    if value == "upper":
        return lfd.upper
    return value


def explicit_rules(spec: dict, cfg: ExperimentConfig):
    lfds = cfg.chain.lfds()
    first = FirstAgentRule(spec["first"]) if "first" in spec else first_agent_rule(cfg.priors)
    relays = [
        RelayRule(_token(spec["t1"], lfd), _token(spec["t0"], lfd), spec.get("p", 0.0), spec.get("q", 0.0))
        for lfd in lfds[1:]
    ]
    return first, relays, lfds


def resolve_rules(cfg: ExperimentConfig, rule=None):
    """``(first, relays, lfds, info)`` for the configured rule spec."""
    rule = cfg.rule if rule is None else rule
    chain, priors = cfg.chain, cfg.priors
    info = {}
    if isinstance(rule, dict):
        first, relays, lfds = explicit_rules(rule, cfg)
        return first, relays, lfds, info
    lfds = chain.lfds()
    if rule == "social":
        _, relays = social_trajectory(chain)
        return first_agent_rule(priors), relays, lfds, info
    if rule.startswith("optimize:"):
        report = _optimize(cfg, rule.split(":", 1)[1])
        info["optimization"] = report.to_dict()
        if report.objective.value == "FiniteDD":
            return report.best_rule.first, list(report.best_rule.relays), lfds, info
        return first_agent_rule(priors), [report.best_rule] * (chain.N - 1), lfds, info
    if rule.startswith("phi-delta:"):
        scheme = phi_delta_scheme(chain.spec(1), float(rule.split(":", 1)[1]), priors)
        first, relays = scheme.rules(chain.N)
        info["phi_delta"] = {"t": scheme.t, "N_star": scheme.N_star, "lower_bound": scheme.lower_bound,
                             "upper_bound": scheme.upper_bound, "P_F_inf": scheme.P_F,
                             "P_M_inf": scheme.P_M, "P_e_inf": scheme.P_e}
        return first, relays, lfds, info
    raise ConfigError(f"field 'rule': unknown rule spec {rule!r}")


def _optimize(cfg: ExperimentConfig, objective: str):
    if objective == "finite-dd":
        return optimize_finite_dd(cfg.chain, seed=cfg.seed)
    if not cfg.schedule.is_constant:
        raise ConfigError("field 'eps': shared-rule objectives need a constant contamination pair")
    lfd = cfg.chain.lfd(1)
    if objective == "asymptotic-dd":
        return optimize_asymptotic_dd(lfd, cfg.priors)
    return optimize_unknown_sl(lfd, cfg.priors)


# --- commands ------------------------------------------------------------------------------


def cmd_lfd(cfg, out: Writer, args):
    seen, rows = {}, []
    for k in range(1, cfg.chain.N + 1):
        pair = cfg.schedule.pair(k)
        if pair not in seen:
            seen[pair] = cfg.chain.lfd(k).to_dict()
            rows.append({"first_agent": k, **seen[pair], "lower": cfg.chain.lfd(k).lower,
                         "upper": cfg.chain.lfd(k).upper})
    out.json("lfd.json", {"model": cfg.chain.model.to_dict(), "lfds": rows})


def _chain_rows(stages):
    return [s.as_row() for s in stages]


def cmd_chain(cfg, out: Writer, args):
    header = ("k", "P_F", "P_M", "P_e")
    named = cfg.extras.get("rules")
    if named and isinstance(cfg.rule, dict) and cfg.preset:
        for name, spec in named.items():
            first, relays, lfds, _ = resolve_rules(cfg, spec)
            out.csv(f"chain_{name}.csv", header, _chain_rows(propagate(first, relays, lfds, cfg.priors)))
        return
    first, relays, lfds, info = resolve_rules(cfg)
    stages = propagate(first, relays, lfds, cfg.priors, N=cfg.chain.N)
    out.csv("chain.csv", header, _chain_rows(stages))
    if info:
        out.json("chain_info.json", info)


def cmd_optimize(cfg, out: Writer, args):
    objective = args.objective or cfg.objective
    report = _optimize(cfg, objective)
    out.json("optimize.json", report.to_dict())


def _contamination(cfg):
    c = cfg.contamination
    if c is None:
        return None
    try:
        if isinstance(c, dict):
            spec = ContaminationSpec.from_dict(c)
            return (spec, spec)
        if len(c) == 2 and all(isinstance(v, dict) for v in c):
            return tuple(ContaminationSpec.from_dict(v) for v in c)
        return [tuple(ContaminationSpec.from_dict(v) for v in pair) for pair in c]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field 'contamination': {exc}") from None


def cmd_simulate(cfg, out: Writer, args):
    first, relays, lfds, _ = resolve_rules(cfg)
    specs = [lfd.spec for lfd in lfds]
    res = simulate_chain(first, relays, specs, _contamination(cfg), cfg.priors, cfg.chain.N,
                         cfg.n_samples, cfg.seed, threads=_threads())
    exact = propagate(first, relays, lfds, cfg.priors, N=cfg.chain.N)
    out.csv("simulate.csv", ("k", "P_F_hat", "P_M_hat", "P_e_hat", "se"), res.rows())
    summary = res.to_dict()
    summary["lfd_P_e"] = [s.P_e for s in exact]
    summary["max_abs_z_vs_lfd"] = float(
        np.max(np.abs((res.P_e_hat - summary["lfd_P_e"]) / np.where(res.se_e > 0, res.se_e, np.inf)))
    )
    out.json("simulate.json", summary)


def _sweep_point(task):
    kind, value, cfg = task
    model_d = dict(cfg.raw["model"])
    eps = dict(cfg.raw["eps"])
    if kind == "m1":
        model_d["m1"] = float(value)
    else:
        eps = {"eps0": float(value), "eps1": float(value)}
    model = model_from_dict(model_d)
    try:
        lfd = solve_breakpoints(UncertaintySpec(model, eps["eps0"], eps["eps1"]))
    except ClassesNotDisjointError:
        # overlapping classes: the adversary can make both hypotheses identical
        v = min(cfg.priors.pi0, cfg.priors.pi1)
        return (value, v, v, 0)
    sl = optimize_unknown_sl(lfd, cfg.priors).value
    dd = optimize_asymptotic_dd(lfd, cfg.priors).value
    return (value, sl, dd, 1)


def cmd_figure(cfg, out: Writer, args):
    name = cfg.preset
    if name is None:
        raise ConfigError("figure needs --preset (fig-rules, fig-mean or fig-eps)")
    if name == "fig-rules":
        summary = {}
        lfd = cfg.chain.lfd(1)
        for rname, spec in cfg.extras["rules"].items():
            first, relays, lfds, _ = resolve_rules(cfg, spec)
            stages = propagate(first, relays, lfds, cfg.priors)
            out.csv(f"{rname}.csv", ("k", "P_F", "P_M", "P_e"), _chain_rows(stages))
            bound, p2, pinf = unknown_sl_terms(relays[0], lfd, cfg.priors)
            summary[rname] = {"rule": relays[0].to_dict(), "P_e2": p2, "P_inf": pinf,
                              "sup_attained_at": "k=2" if p2 >= pinf else "asymptote"}
        out.json("summary.json", summary)
        return
    sweep = cfg.extras["sweep"]
    grid = np.linspace(sweep["start"], sweep["stop"], int(sweep["num"]))
    tasks = [(sweep["param"], round(float(v), 12), cfg) for v in grid]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        rows = list(pool.map(_sweep_point, tasks))
    label = "mean" if sweep["param"] == "m1" else "eps"
    out.csv(f"{name}.csv", (label, "unknown_sl", "asymptotic_dd", "disjoint"), rows)


HANDLERS = {"lfd": cmd_lfd, "chain": cmd_chain, "optimize": cmd_optimize,
            "simulate": cmd_simulate, "figure": cmd_figure}


def _version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "unknown"


def write_manifest(cfg: ExperimentConfig, out: Writer, command, extra=None):
    manifest = {
        "command": command,
        "config": cfg.raw,
        "tolerances": {"normalization_residual": 1e-10, "grid": GRID_SIZE, "xatol": XATOL,
                       "fatol": FATOL, "verify_tol": VERIFY_TOL},
        "versions": {"artifact": _version(), "numpy": np.__version__,
                     "scipy": metadata.version("scipy"), "python": sys.version.split()[0]},
        "outputs": list(out.outputs),
    }
    if extra:
        manifest.update(extra)
    out.json("manifest.json", manifest)


def build_parser():
    p = argparse.ArgumentParser(prog="robust-tandem", description="Robust detection and learning in tandem chains.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--preset", choices=sorted(cfgmod.PRESETS))
    p.add_argument("--out", default="results/run", help="output path prefix")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--objective", choices=cfgmod.OBJECTIVES, help="optimize: objective override")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg = cfgmod.load(args.config, args.preset, args.seed)
        if args.objective:
            cfg.raw["objective"] = args.objective
            cfg = replace(cfg, objective=args.objective)
        out = Writer(args.out)
        HANDLERS[args.command](cfg, out, args)
        write_manifest(cfg, out, args.command)
    except ConfigError as exc:
        print(f"robust-tandem: config error: {exc}", file=sys.stderr)
        return 2
    except (RobustTandemError, ValueError, ArithmeticError) as exc:
        print(f"robust-tandem: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for p in out.outputs:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
