"""Numerical design of relay rules.

Three objectives are supported:

* ``FiniteDD``: per-agent thresholds minimising the last agent's error on a
  chain of known length N.
* ``AsymptoticDD``: one shared relay rule minimising the limiting error.
* ``UnknownSL``: one shared relay rule minimising ``max{P_e,2, P_inf}``,
  the worst error over unknown positions k >= 2.

The shared-rule problems are searched over the Q0-masses of the two halves
of a randomised LRT, ``d = Q0(phi(Y,1)=0)`` and ``a = Q0(phi(Y,0)=1)``,
which makes the objective continuous across l* atoms and absorbs the
randomisation parameters.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from ._validation import check_random_state
from .engine import ChainConfig, propagate, social_trajectory
from .exceptions import DegeneratePosteriorError, VerificationError
from .lfd import LFDPair, mass_quantile, support_bounds
from .rules import FirstAgentRule, Priors, RelayRule, first_agent_rule

GRID_SIZE = 64
GRID_MIN_MASS = 1e-9
XATOL = 1e-8
FATOL = 1e-9
VERIFY_HORIZON = 500
VERIFY_TOL = 1e-9
SWEEP_TOL = 1e-10
MIN_STARTS = 8


class Objective(str, Enum):
    FINITE_DD = "FiniteDD"
    ASYMPTOTIC_DD = "AsymptoticDD"
    UNKNOWN_SL = "UnknownSL"


@dataclass
class OptimizationReport:
    best_rule: object
    value: float
    objective: Objective
    trace: list = field(default_factory=list)
    restarts: int = 0
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        rule = self.best_rule.to_dict() if hasattr(self.best_rule, "to_dict") else self.best_rule
        return {
            "objective": self.objective.value,
            "value": self.value,
            "best_rule": rule,
            "restarts": self.restarts,
            "diagnostics": self.diagnostics,
            "trace": [[list(p), v] for p, v in self.trace],
        }


# --- shared-rule objectives -------------------------------------------------------------


def _half_masses(rule: RelayRule, lfd: LFDPair):
    k0, k1 = rule.kernel(lfd, 0), rule.kernel(lfd, 1)
    # a, d, m, f
    return k0[0, 1], k0[1, 0], k1[1, 0], k1[0, 1]


def _limit(num, other, fallback):
    den = num + other
    return fallback if den <= 0.0 else num / den


def stage_one(lfd: LFDPair, priors: Priors):
    first = first_agent_rule(priors)
    p_f = first.prob_one(lfd, 0)
    return p_f, 1.0 - first.prob_one(lfd, 1)


def asymptotic_value(rule: RelayRule, lfd: LFDPair, priors: Priors) -> float:
    """Limiting error of the shared-rule chain.

    A component whose recurrence does not contract (``a + d = 0`` or
    ``m + f = 0``) never moves, so it keeps the agent-1 value.
    """
    a, d, m, f = _half_masses(rule, lfd)
    pf1, pm1 = stage_one(lfd, priors)
    return priors.error(_limit(a, d, pf1), _limit(m, f, pm1))


def unknown_sl_terms(rule: RelayRule, lfd: LFDPair, priors: Priors):
    """``(max{P_e,2, P_inf}, P_e,2, P_inf)`` for a shared relay after the minimax agent 1."""
    a, d, m, f = _half_masses(rule, lfd)
    pf1, pm1 = stage_one(lfd, priors)
    p2 = priors.error(pf1 * (1.0 - d) + (1.0 - pf1) * a, pm1 * (1.0 - f) + (1.0 - pm1) * m)
    pinf = priors.error(_limit(a, d, pf1), _limit(m, f, pm1))
    return max(p2, pinf), p2, pinf


def unknown_sl_value(rule: RelayRule, lfd: LFDPair, priors: Priors) -> float:
    return unknown_sl_terms(rule, lfd, priors)[0]


def rule_from_masses(lfd: LFDPair, d: float, a: float) -> RelayRule:
    """Randomised relay with ``Q0(phi(Y,1)=0) = d`` and ``Q0(phi(Y,0)=1) = a``."""
    if d + a > 1.0:
        raise ValueError("need d + a <= 1")
    t1, p = mass_quantile(lfd, d, "lower", 0)
    t0, q = mass_quantile(lfd, a, "upper", 0)
    if t1 > t0:  # bisection round-off on a merged threshold
        t0 = t1
    return RelayRule(t1, t0, p, q)


class _HalfTable:
    """Per-grid-mass half rules and their Q0/Q1 masses, shared across objectives."""

    def __init__(self, lfd, masses):
        self.masses = masses
        lows = [mass_quantile(lfd, x, "lower", 0) for x in masses]
        ups = [mass_quantile(lfd, y, "upper", 0) for y in masses]
        self.lows, self.ups = lows, ups
        self.d = np.empty(len(masses))
        self.m = np.empty(len(masses))
        self.a = np.empty(len(masses))
        self.f = np.empty(len(masses))
        for j, ((t1, p), (t0, q)) in enumerate(zip(lows, ups)):
            lo_rule = RelayRule(t1, max(t1, lfd.upper), p, 0.0)
            up_rule = RelayRule(min(t0, lfd.lower), t0, 0.0, q)
            _, self.d[j], self.m[j], _ = _half_masses(lo_rule, lfd)
            self.a[j], _, _, self.f[j] = _half_masses(up_rule, lfd)


_TABLES = {}


def _table(lfd):
    key = lfd
    if key not in _TABLES:
        masses = np.concatenate(([0.0], np.logspace(math.log10(GRID_MIN_MASS), 0.0, GRID_SIZE - 1)))
        _TABLES[key] = _HalfTable(lfd, masses)
    return _TABLES[key]


def _grid_values(table, lfd, priors, objective):
    pf1, pm1 = stage_one(lfd, priors)
    d, m = table.d[:, None], table.m[:, None]
    a, f = table.a[None, :], table.f[None, :]
    with np.errstate(invalid="ignore", divide="ignore"):
        pf_inf = np.where(a + d > 0, a / (a + d), pf1)
        pm_inf = np.where(m + f > 0, m / (m + f), pm1)
    vals = priors.error(pf_inf, pm_inf)
    if objective is Objective.UNKNOWN_SL:
        p2 = priors.error(pf1 * (1.0 - d) + (1.0 - pf1) * a, pm1 * (1.0 - f) + (1.0 - pm1) * m)
        vals = np.maximum(vals, p2)
    feasible = table.masses[:, None] + table.masses[None, :] <= 1.0 + 1e-15
    return np.where(feasible, vals, np.inf)


def _to_log(x):
    return math.log10(max(x, GRID_MIN_MASS))


def _shared_rule_search(lfd: LFDPair, priors: Priors, objective: Objective, n_refine=4):
    value_of = asymptotic_value if objective is Objective.ASYMPTOTIC_DD else unknown_sl_value
    table = _table(lfd)
    vals = _grid_values(table, lfd, priors, objective)
    order = np.lexsort((np.arange(vals.size), vals.ravel()))
    trace = []
    best_rule, best_val, best_x = None, math.inf, None

    def consider(rule, x):
        nonlocal best_rule, best_val, best_x
        v = value_of(rule, lfd, priors)
        trace.append((tuple(x), v))
        if v < best_val - 1e-15:
            best_rule, best_val, best_x = rule, v, x
        return v

    pass_through = RelayRule.pass_through()
    consider(pass_through, (0.0, 0.0))

    starts = []
    for flat in order[: max(1, n_refine)]:
        i, j = np.unravel_index(flat, vals.shape)
        if not np.isfinite(vals[i, j]):
            break
        x = (float(table.masses[i]), float(table.masses[j]))
        (t1, p), (t0, q) = table.lows[i], table.ups[j]
        consider(RelayRule(t1, max(t0, t1), p, q), x)
        starts.append(x)

    def penalised(z):
        d, a = 10.0 ** z[0], 10.0 ** z[1]
        excess = max(0.0, d + a - 1.0) + max(0.0, z[0]) + max(0.0, z[1])
        if excess > 0.0:
            return 1.0 + excess
        lo_bound = math.log10(GRID_MIN_MASS)
        if z[0] < lo_bound or z[1] < lo_bound:
            return 1.0 + (lo_bound - min(z[0], z[1]))
        return value_of(rule_from_masses(lfd, d, a), lfd, priors)

    for x in starts:
        z0 = np.array([_to_log(x[0]), _to_log(x[1])])
        res = minimize(
            penalised,
            z0,
            method="Nelder-Mead",
            options={"xatol": XATOL, "fatol": FATOL, "maxiter": 400, "initial_simplex": _simplex(z0)},
        )
        d, a = 10.0 ** res.x[0], 10.0 ** res.x[1]
        if d + a <= 1.0:
            consider(rule_from_masses(lfd, d, a), (d, a))

    diagnostics = {"grid_best": float(vals[np.unravel_index(order[0], vals.shape)])}
    if best_rule == pass_through:
        diagnostics["boundary"] = "pass-through rule is optimal; chain does not contract"
    return best_rule, best_val, trace, len(starts), diagnostics


def _simplex(z0, step=0.25):
    pts = [z0, z0 + np.array([step, 0.0]), z0 + np.array([0.0, step])]
    if z0[0] + step > 0:
        pts[1] = z0 - np.array([step, 0.0])
    if z0[1] + step > 0:
        pts[2] = z0 - np.array([0.0, step])
    return np.array(pts)


def optimize_asymptotic_dd(lfd: LFDPair, priors: Priors = None) -> OptimizationReport:
    """Shared relay rule minimising the limiting error of the chain."""
    priors = priors or Priors()
    rule, _, trace, n, diag = _shared_rule_search(lfd, priors, Objective.ASYMPTOTIC_DD)
    value = asymptotic_value(rule, lfd, priors)
    return OptimizationReport(rule, value, Objective.ASYMPTOTIC_DD, trace, n, diag)


def verify_unknown_sl(rule: RelayRule, lfd: LFDPair, priors: Priors, horizon=VERIFY_HORIZON):
    """Check that no stage in ``[2, horizon]`` exceeds ``max{P_e,2, P_inf}``.

    Returns ``(sup_k P_e,k, argmax k)``.
    """
    stages = propagate(first_agent_rule(priors), rule, lfd, priors, N=horizon)
    tail = [s.P_e for s in stages[1:]]
    k_best = int(np.argmax(tail)) + 2
    sup = float(tail[k_best - 2])
    bound, p2, pinf = unknown_sl_terms(rule, lfd, priors)
    if sup > bound + VERIFY_TOL:
        raise VerificationError(
            f"stage {k_best} error {sup!r} exceeds max(P_e2={p2!r}, P_inf={pinf!r}) "
            f"by {sup - bound:.3e}"
        )
    return sup, k_best


def optimize_unknown_sl(lfd: LFDPair, priors: Priors = None) -> OptimizationReport:
    """Shared relay rule minimising the worst error over unknown positions k >= 2."""
    priors = priors or Priors()
    rule, _, trace, n, diag = _shared_rule_search(lfd, priors, Objective.UNKNOWN_SL)
    value, p2, pinf = unknown_sl_terms(rule, lfd, priors)
    sup, k = verify_unknown_sl(rule, lfd, priors)
    diag.update({"P_e2": p2, "P_inf": pinf, "sup_to_horizon": sup, "argmax_k": k,
                 "attained_at": "k=2" if p2 >= pinf else "asymptote"})
    return OptimizationReport(rule, value, Objective.UNKNOWN_SL, trace, n, diag)


# --- finite-N decentralised detection -------------------------------------------------------------


@dataclass(frozen=True)
class ChainRules:
    """Agent 1's threshold plus the N-1 relay rules that follow it."""

    first: FirstAgentRule
    relays: tuple

    def to_dict(self):
        return {"first": self.first.to_dict(), "relays": [r.to_dict() for r in self.relays]}


def finite_dd_value(rules: ChainRules, lfds, priors: Priors) -> float:
    N = len(lfds)
    return propagate(rules.first, list(rules.relays), list(lfds), priors, N=N)[-1].P_e


class _ChainState:
    """Threshold vector with fast single-coordinate re-evaluation.

    The final error is affine in any stage's (P_F, P_M), so a coordinate
    change at agent j only needs the prefix state at j-1 and the suffix map.
    """

    def __init__(self, lfds, priors, first_t, relay_ts):
        self.lfds, self.priors = lfds, priors
        self.first_t = first_t
        self.relay_ts = [list(t) for t in relay_ts]  # [t1, t0] for agents 2..N

    def rules(self):
        return ChainRules(
            FirstAgentRule(self.first_t), tuple(RelayRule(t1, t0) for t1, t0 in self.relay_ts)
        )

    def _stage_maps(self):
        maps = []
        for (t1, t0), lfd in zip(self.relay_ts, self.lfds[1:]):
            r = RelayRule(t1, t0)
            k0, k1 = r.kernel(lfd, 0), r.kernel(lfd, 1)
            maps.append((k0[1, 1] - k0[0, 1], k0[0, 1], k1[0, 0] - k1[1, 0], k1[1, 0]))
        return maps

    def coordinate_objective(self, j):
        """Objective of agent j's parameters (j = 0 is agent 1) with others fixed."""
        maps = self._stage_maps()
        # prefix up to agent j-1
        pf = pm = None
        if j > 0:
            first = FirstAgentRule(self.first_t)
            pf, pm = first.prob_one(self.lfds[0], 0), 1.0 - first.prob_one(self.lfds[0], 1)
            for sF, cF, sM, cM in maps[: j - 1]:
                pf, pm = pf * sF + cF, pm * sM + cM
        # suffix affine map from agent j's output to agent N
        aF, bF, aM, bM = 1.0, 0.0, 1.0, 0.0
        for sF, cF, sM, cM in maps[j:]:
            aF, bF = sF * aF, sF * bF + cF
            aM, bM = sM * aM, sM * bM + cM
        lfd, priors = self.lfds[j], self.priors

        def final(pf_j, pm_j):
            return priors.error(aF * pf_j + bF, aM * pm_j + bM)

        if j == 0:
            def obj(t):
                r = FirstAgentRule(t)
                return final(r.prob_one(lfd, 0), 1.0 - r.prob_one(lfd, 1))
            return obj

        def obj_pair(t1, t0):
            r = RelayRule(t1, t0)
            k0, k1 = r.kernel(lfd, 0), r.kernel(lfd, 1)
            return final(pf * k0[1, 1] + (1 - pf) * k0[0, 1], pm * k1[0, 0] + (1 - pm) * k1[1, 0])

        return obj_pair

    def value(self):
        return finite_dd_value(self.rules(), self.lfds, self.priors)


def _golden(f, lo, hi, tol=XATOL):
    """Bounded scalar minimum of ``f`` on ``[lo, hi]``, searched in log coordinates."""
    if not (0.0 < lo < hi) or not math.isfinite(hi):
        return None
    res = minimize_scalar(lambda z: f(math.exp(z)), bounds=(math.log(lo), math.log(hi)),
                          method="bounded", options={"xatol": tol})
    return math.exp(res.x)


def _candidates(lfd, lo, hi):
    atoms = list(lfd.atoms())
    pts = set(atoms)
    srt = sorted(atoms)
    for u, v in zip(srt, srt[1:]):
        pts.add(math.sqrt(u * v) if u > 0 else 0.5 * (u + v))
    if srt:
        pts.add(srt[0] * 0.5 if srt[0] > 0 else lo)
        pts.add(srt[-1] * 2.0)
    pts.update(np.geomspace(lo, hi, GRID_SIZE).tolist())
    return sorted(p for p in pts if p > 0.0 and math.isfinite(p))


def _line_search(f, current, cands, lo_lim=0.0, hi_lim=math.inf):
    """Best of ``current`` and candidates within limits, then golden refinement."""
    cands = [c for c in cands if lo_lim <= c <= hi_lim]
    if current not in cands:
        cands = sorted(cands + [current])
    vals = [f(c) for c in cands]
    best = min(range(len(cands)), key=lambda i: (vals[i], i))
    x_best, f_best = cands[best], vals[best]
    cur_val = vals[cands.index(current)]
    if cur_val <= f_best + 1e-15:
        x_best, f_best = current, cur_val
    left = cands[best - 1] if best > 0 else None
    right = cands[best + 1] if best + 1 < len(cands) else None
    if left is not None and right is not None:
        x = _golden(f, left, right)
        if x is not None and lo_lim <= x <= hi_lim:
            fx = f(x)
            if fx < f_best - 1e-15:
                x_best, f_best = x, fx
    return x_best, f_best


def _coordinate_descent(state: _ChainState, cand_lists, max_sweeps=200):
    value = state.value()
    history = [value]
    for _ in range(max_sweeps):
        start = value
        obj = state.coordinate_objective(0)
        state.first_t, value = _line_search(obj, state.first_t, cand_lists[0])
        for j in range(1, len(state.lfds)):
            obj = state.coordinate_objective(j)
            t1, t0 = state.relay_ts[j - 1]
            t1, value = _line_search(lambda t: obj(t, t0), t1, cand_lists[j], hi_lim=t0)
            t0, value = _line_search(lambda t: obj(t1, t), t0, cand_lists[j], lo_lim=t1)
            state.relay_ts[j - 1] = [t1, t0]
        history.append(value)
        if start - value < SWEEP_TOL:
            break
    return state.value(), history


def optimize_finite_dd(config: ChainConfig, n_starts: int = MIN_STARTS, seed=0) -> OptimizationReport:
    """Per-agent thresholds minimising the agent-N minimax error.

    Cyclic coordinate descent over agent 1's threshold and each relay's
    ``(t1, t0)`` (deterministic ties), multi-started from the social-learning
    chain and ``n_starts`` random threshold vectors.
    """
    if config.N < 1:
        raise ValueError("N must be >= 1")
    n_starts = max(int(n_starts), MIN_STARTS)
    priors, lfds = config.priors, config.lfds()
    rng = check_random_state(seed)
    bounds = [support_bounds(lfd) for lfd in lfds]
    cand_lists = [_candidates(lfd, max(lo, 1e-300), hi) for lfd, (lo, hi) in zip(lfds, bounds)]

    starts = []
    try:
        _, social = social_trajectory(config)
        starts.append((priors.ratio, [[r.t1, r.t0] for r in social]))
    except DegeneratePosteriorError:
        pt = RelayRule.pass_through()
        starts.append((priors.ratio, [[pt.t1, pt.t0] for _ in range(config.N - 1)]))
    for _ in range(n_starts):
        lo, hi = bounds[0]
        first_t = math.exp(rng.uniform(math.log(max(lo, 1e-12)), math.log(hi)))
        relays = []
        for lo, hi in bounds[1:]:
            pair = np.exp(rng.uniform(math.log(max(lo, 1e-12)), math.log(hi), size=2))
            relays.append(sorted(pair.tolist()))
        starts.append((first_t, relays))

    trace, best = [], None
    for idx, (first_t, relay_ts) in enumerate(starts):
        state = _ChainState(lfds, priors, first_t, relay_ts)
        value, history = _coordinate_descent(state, cand_lists)
        trace.append(((idx, len(history) - 1), value))
        if best is None or value < best[0] - 1e-14:
            best = (value, state.rules(), idx)

    value, rules, idx = best
    value = finite_dd_value(rules, lfds, priors)
    diag = {"best_start": idx, "start_values": [v for _, v in trace]}
    return OptimizationReport(rules, value, Objective.FINITE_DD, trace, len(starts), diag)


def optimize(objective, *, config: Optional[ChainConfig] = None, lfd: Optional[LFDPair] = None,
             priors: Optional[Priors] = None, **kw) -> OptimizationReport:
    """Dispatch by objective name (``finite-dd``, ``asymptotic-dd``, ``unknown-sl``)."""
    name = str(objective).lower().replace("_", "-")
    if name in ("finite-dd", "finitedd"):
        return optimize_finite_dd(config, **kw)
    if lfd is None and config is not None:
        lfd, priors = config.lfd(1), priors or config.priors
    if name in ("asymptotic-dd", "asymptoticdd"):
        return optimize_asymptotic_dd(lfd, priors)
    if name in ("unknown-sl", "unknownsl"):
        return optimize_unknown_sl(lfd, priors)
    raise ValueError(f"unknown objective {objective!r}")
