"""Monte Carlo validation of tandem chains under members of the contamination classes.

Observations are simulated directly on the nominal likelihood-ratio scale
``L = p1*/p0*``; every rule in this package only looks at ``l* = b * clamp(L)``.
Each (replicate, agent, hypothesis, purpose) tuple gets its own seeded stream,
so adding agents or candidates never perturbs earlier draws.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .engine import propagate
from .exceptions import DominanceViolationError, DomainError
from .lfd import (
    LFDPair,
    UncertaintySpec,
    clip_lr_values,
    lfd_event_prob,
    nominal_event_prob,
    sample_lfd,
    solve_breakpoints,
    support_bounds,
)
from .models import DiscretePMF, ExponentialMeans
from .rules import FirstAgentRule, Priors, RelayRule

CHUNK = 1 << 17
SIGMA_BAND = 4.0
ORDER_TOL = 1e-9

KINDS = ("none", "point_mass", "shifted_nominal", "swap_nominal", "two_point", "least_favorable")

# stream purposes
_COIN, _NOMINAL, _CONTAM, _TIE = range(4)


@dataclass(frozen=True)
class ContaminationSpec:
    """Contaminating law R for one hypothesis.

    ``params`` by kind: ``point_mass`` {y}; ``shifted_nominal`` {shift};
    ``two_point`` {y_a, y_b, w}; the rest take none. ``least_favorable``
    draws directly from the LFD (the contamination that realises it).
    """

    kind: str = "none"
    applies_to: Optional[int] = None
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown contamination kind {self.kind!r}; expected one of {KINDS}")
        params = self.params
        if isinstance(params, dict):
            params = tuple(sorted(params.items()))
        object.__setattr__(self, "params", tuple(params))
        p = self.param_dict
        need = {"point_mass": {"y"}, "shifted_nominal": {"shift"}, "two_point": {"y_a", "y_b", "w"}}
        missing = need.get(self.kind, set()) - set(p)
        if missing:
            raise ValueError(f"{self.kind} contamination needs parameters {sorted(missing)}")
        if self.kind == "two_point" and not 0.0 <= p["w"] <= 1.0:
            raise ValueError("two_point weight w must lie in [0, 1]")
        if self.applies_to not in (None, 0, 1):
            raise ValueError("applies_to must be 0, 1 or None")

    @property
    def param_dict(self):
        return dict(self.params)

    def to_dict(self):
        return {"kind": self.kind, "applies_to": self.applies_to, "params": self.param_dict}

    @classmethod
    def from_dict(cls, d):
        return cls(d.get("kind", "none"), d.get("applies_to"), d.get("params", {}))


NO_CONTAMINATION = ContaminationSpec()


def _check_in_support(model, y):
    if isinstance(model, ExponentialMeans) and float(y) < 0:
        raise DomainError(f"observation {y!r} lies outside the support [0, inf)")
    if isinstance(model, DiscretePMF):
        model.lr_value(y)  # raises DomainError when y is not a label


def _validate_against(c: ContaminationSpec, model):
    p = c.param_dict
    if c.kind == "point_mass":
        _check_in_support(model, p["y"])
    elif c.kind == "two_point":
        _check_in_support(model, p["y_a"])
        _check_in_support(model, p["y_b"])
    elif c.kind == "shifted_nominal":
        if isinstance(model, DiscretePMF):
            raise DomainError("shifted_nominal is not defined for discrete observation spaces")
        if isinstance(model, ExponentialMeans) and p["shift"] < 0:
            raise DomainError("a negative shift leaves the exponential support")


def _draw_contamination(c: ContaminationSpec, i, lfd: LFDPair, rng, n):
    """n draws of l* under R (least_favorable: under Q_i itself)."""
    model, p = lfd.model, c.param_dict
    if c.kind == "least_favorable":
        return sample_lfd(lfd, i, rng, n)
    if c.kind == "point_mass":
        lr = np.full(n, model.lr_value(p["y"]))
    elif c.kind == "two_point":
        pick = rng.random(n) < p["w"]
        lr = np.where(pick, model.lr_value(p["y_a"]), model.lr_value(p["y_b"]))
    elif c.kind == "swap_nominal":
        lr = np.asarray(model.sample_lr(1 - i, rng, n), dtype=float)
    elif c.kind == "shifted_nominal":
        y = np.asarray(model.sample(i, rng, n), dtype=float) + p["shift"]
        lr = model.lr_values(y)
    else:  # none: R = nominal, so the mixture is the nominal itself
        lr = np.asarray(model.sample_lr(i, rng, n), dtype=float)
    return clip_lr_values(lfd, lr)


@dataclass
class SimResult:
    k: np.ndarray
    P_F_hat: np.ndarray
    P_M_hat: np.ndarray
    P_e_hat: np.ndarray
    se_F: np.ndarray
    se_M: np.ndarray
    se_e: np.ndarray
    n_samples: int
    seed: int

    def rows(self):
        for j in range(len(self.k)):
            yield (int(self.k[j]), self.P_F_hat[j], self.P_M_hat[j], self.P_e_hat[j], self.se_e[j])

    def to_dict(self):
        return {
            "n_samples": self.n_samples,
            "seed": self.seed,
            "P_F_hat": self.P_F_hat.tolist(),
            "P_M_hat": self.P_M_hat.tolist(),
            "P_e_hat": self.P_e_hat.tolist(),
            "se_F": self.se_F.tolist(),
            "se_M": self.se_M.tolist(),
            "se_e": self.se_e.tolist(),
        }


def _threads():
    env = os.environ.get("RT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"RT_THREADS must be an integer, got {env!r}") from None
    return min(8, os.cpu_count() or 1)


def _stream(seed, r, k, i, purpose):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r, k, i, purpose)))


def _normalise_contamination(contamination, N):
    """Accept None, one (R0, R1) pair, or a per-agent list of pairs."""
    if contamination is None:
        return [(NO_CONTAMINATION, NO_CONTAMINATION)] * N
    if isinstance(contamination, ContaminationSpec):
        return [(contamination, contamination)] * N
    seq = list(contamination)
    if len(seq) == 2 and all(isinstance(c, ContaminationSpec) for c in seq):
        return [tuple(seq)] * N
    if len(seq) != N:
        raise ValueError(f"expected {N} per-agent contamination pairs, got {len(seq)}")
    return [tuple(p) for p in seq]


def _run_chunk(args):
    first, relays, lfds, pairs, n, seed, r = args
    N = len(lfds)
    ones = np.zeros((2, N), dtype=np.int64)
    for i in (0, 1):
        u = None
        for k in range(N):
            lfd = lfds[k]
            eps = lfd.eps1 if i else lfd.eps0
            r_spec = pairs[k][i]
            lr = np.asarray(lfd.model.sample_lr(i, _stream(seed, r, k, i, _NOMINAL), n), dtype=float)
            l_star = clip_lr_values(lfd, lr)
            if eps > 0.0 and r_spec.kind != "none":
                mask = _stream(seed, r, k, i, _COIN).random(n) < eps
                if r_spec.kind == "least_favorable":
                    # whole draw from Q_i, which already mixes nominal and R
                    l_star = sample_lfd(lfd, i, _stream(seed, r, k, i, _CONTAM), n)
                else:
                    cont = _draw_contamination(r_spec, i, lfd, _stream(seed, r, k, i, _CONTAM), n)
                    l_star = np.where(mask, cont, l_star)
            if k == 0:
                u = first.decide(l_star)
            else:
                u = relays[k - 1].decide(l_star, u, _stream(seed, r, k, i, _TIE))
            ones[i, k] += int(u.sum())
    return ones


def simulate_chain(
    first: FirstAgentRule,
    relays,
    spec,
    contamination=None,
    priors: Priors = None,
    N: int = None,
    n_samples: int = 100_000,
    seed: int = 0,
    threads: Optional[int] = None,
) -> SimResult:
    """Empirical stage errors of a chain observing contaminated data.

    ``spec`` is an :class:`UncertaintySpec` (shared) or one per agent;
    ``relays`` a shared :class:`RelayRule` or a list of N-1 rules;
    ``contamination`` None, a ``(R0, R1)`` pair, or per-agent pairs.
    Both hypotheses are simulated with ``n_samples`` draws each.
    """
    priors = priors or Priors()
    if int(n_samples) < 1:
        raise ValueError("n_samples must be >= 1")
    n_samples = int(n_samples)
    if N is None:
        if isinstance(relays, RelayRule):
            raise ValueError("N is required with a shared relay rule")
        N = len(relays) + 1
    relays = [relays] * (N - 1) if isinstance(relays, RelayRule) else list(relays)
    if len(relays) != N - 1:
        raise ValueError(f"expected {N - 1} relay rules, got {len(relays)}")
    specs = [spec] * N if isinstance(spec, UncertaintySpec) else list(spec)
    if len(specs) != N:
        raise ValueError(f"expected {N} uncertainty specs, got {len(specs)}")
    lfds = [solve_breakpoints(s) for s in specs]
    pairs = _normalise_contamination(contamination, N)
    for k, (c0, c1) in enumerate(pairs):
        _validate_against(c0, lfds[k].model)
        _validate_against(c1, lfds[k].model)

    sizes = [CHUNK] * (n_samples // CHUNK)
    if n_samples % CHUNK:
        sizes.append(n_samples % CHUNK)
    jobs = [(first, relays, lfds, pairs, n, seed, r) for r, n in enumerate(sizes)]
    workers = threads or _threads()
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(j) for j in jobs]
    ones = np.sum(parts, axis=0)

    n = float(n_samples)
    pf = ones[0] / n
    pm = 1.0 - ones[1] / n
    pe = priors.pi0 * pf + priors.pi1 * pm
    se_f = np.sqrt(pf * (1 - pf) / n)
    se_m = np.sqrt(pm * (1 - pm) / n)
    se_e = np.sqrt((priors.pi0 * se_f) ** 2 + (priors.pi1 * se_m) ** 2)
    return SimResult(np.arange(1, N + 1), pf, pm, pe, se_f, se_m, se_e, n_samples, seed)


# --- adversarial search --------------------------------------------------------------------------


def _observation_grid(model, n):
    """Deterministic observation grid covering both nominals."""
    if isinstance(model, DiscretePMF):
        return list(model.support)
    rng = np.random.default_rng(12345)
    ys = np.concatenate([model.sample(0, rng, 20_000), model.sample(1, rng, 20_000)])
    qs = np.quantile(ys, np.linspace(0.0005, 0.9995, n))
    if isinstance(model, ExponentialMeans):
        qs = np.concatenate(([0.0], qs[:-1]))
    return [float(v) for v in qs]


def default_family(spec: UncertaintySpec, budget: int = 200):
    """At least ``budget`` (R0, R1) candidates, point masses first.

    The menu pairs point masses over an observation grid under both
    hypotheses, plus swapped and shifted nominals, two-point laws, the
    least-favorable contamination, and no contamination.
    """
    model = spec.model
    side = max(2, int(math.ceil(math.sqrt(budget))))
    grid = _observation_grid(model, side)
    fam = [
        (NO_CONTAMINATION, NO_CONTAMINATION),
        (ContaminationSpec("least_favorable", 0), ContaminationSpec("least_favorable", 1)),
        (ContaminationSpec("swap_nominal", 0), ContaminationSpec("swap_nominal", 1)),
    ]
    lo, hi = grid[0], grid[-1]
    fam.append((ContaminationSpec("two_point", 0, {"y_a": hi, "y_b": lo, "w": 0.5}),
                ContaminationSpec("two_point", 1, {"y_a": lo, "y_b": hi, "w": 0.5})))
    if not isinstance(model, DiscretePMF):
        for s in (0.5, 2.0):
            fam.append((ContaminationSpec("shifted_nominal", 0, {"shift": s}),
                        ContaminationSpec("shifted_nominal", 1, {"shift": s})))
    for y0 in grid:
        for y1 in grid:
            fam.append((ContaminationSpec("point_mass", 0, {"y": y0}),
                        ContaminationSpec("point_mass", 1, {"y": y1})))
    while len(fam) < budget:  # tiny discrete grids: pad with two-point mixtures
        w = len(fam) / (budget + 1.0)
        fam.append((ContaminationSpec("two_point", 0, {"y_a": hi, "y_b": lo, "w": w}),
                    ContaminationSpec("two_point", 1, {"y_a": lo, "y_b": hi, "w": w})))
    return fam


@dataclass
class AdversarialResult:
    worst_found: float
    argmax: tuple
    bound: float
    evaluated: int
    max_excess_sigma: float
    records: list = field(default_factory=list, repr=False)


def adversarial_search(
    first: FirstAgentRule,
    relays,
    spec: UncertaintySpec,
    priors: Priors = None,
    N: int = None,
    family: Optional[Sequence] = None,
    budget: int = 200,
    n_samples: int = 100_000,
    seed: int = 0,
    band: float = SIGMA_BAND,
) -> AdversarialResult:
    """Search contaminations for a chain error above the least-favorable one.

    Every candidate's empirical P_F and P_M are compared stage by stage with
    the exact LFD values; an excess beyond ``band`` standard errors raises
    :class:`DominanceViolationError` carrying the full report.
    """
    priors = priors or Priors()
    if N is None:
        N = len(relays) + 1
    lfd = solve_breakpoints(spec)
    exact = propagate(first, relays, lfd, priors, N=N)
    ex_f = np.array([s.P_F for s in exact])
    ex_m = np.array([s.P_M for s in exact])
    fam = list(family) if family is not None else default_family(spec, budget)
    fam = fam[: max(budget, 1)] if family is None else fam

    records, worst, arg, worst_sigma = [], -math.inf, None, -math.inf
    violations = []
    for idx, pair in enumerate(fam):
        res = simulate_chain(first, relays, spec, pair, priors, N, n_samples, seed)
        with np.errstate(divide="ignore", invalid="ignore"):
            zf = np.where(res.se_F > 0, (res.P_F_hat - ex_f) / res.se_F, np.where(res.P_F_hat > ex_f + 1e-12, np.inf, -np.inf))
            zm = np.where(res.se_M > 0, (res.P_M_hat - ex_m) / res.se_M, np.where(res.P_M_hat > ex_m + 1e-12, np.inf, -np.inf))
        z = float(max(zf.max(), zm.max()))
        records.append({"candidate": [c.to_dict() for c in pair], "P_e_N": float(res.P_e_hat[-1]), "max_z": z})
        worst_sigma = max(worst_sigma, z)
        if res.P_e_hat[-1] > worst:
            worst, arg = float(res.P_e_hat[-1]), pair
        if z > band:
            violations.append(records[-1])
    result = AdversarialResult(worst, arg, exact[-1].P_e, len(fam), worst_sigma, records)
    if violations:
        raise DominanceViolationError(
            f"{len(violations)} contamination(s) exceed the least-favorable chain error by more "
            f"than {band} standard errors",
            report={"violations": violations, "result": result},
        )
    return result


# --- closed-form property checks -------------------------------------------------------------------


@dataclass
class PropertyReport:
    t_grid: np.ndarray
    max_violation: float
    violations: list
    values: dict = field(default_factory=dict, repr=False)

    @property
    def ok(self):
        return self.max_violation <= ORDER_TOL


def _t_grid(lfd: LFDPair, n_grid: int):
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    lo, hi = lfd.lower, lfd.upper
    s_lo, s_hi = support_bounds(lfd, 1e-12)
    lo = lo if lo > 0 else s_lo
    hi = hi if math.isfinite(hi) else s_hi
    if hi <= lo:  # eps = 0 for both with an unbounded LR still has lo < hi
        hi = lo * 2.0
    return np.geomspace(lo, hi, n_grid)


def ordering_check(lfd: LFDPair, n_grid: int = 100) -> PropertyReport:
    """``P0*(l* > t) <= Q0(l* > t) <= Q1(l* > t) <= P1*(l* > t)`` on a t-grid."""
    grid = _t_grid(lfd, n_grid)
    rows = []
    worst, bad = 0.0, []
    for t in grid:
        vals = (
            nominal_event_prob(lfd, 0, ">", t),
            lfd_event_prob(lfd, 0, ">", t),
            lfd_event_prob(lfd, 1, ">", t),
            nominal_event_prob(lfd, 1, ">", t),
        )
        rows.append(vals)
        for j in range(3):
            v = vals[j] - vals[j + 1]
            worst = max(worst, v)
            if v > ORDER_TOL:
                bad.append({"t": float(t), "pair": j, "excess": v, "values": vals})
    arr = np.array(rows)
    return PropertyReport(grid, worst, bad, {"P0": arr[:, 0], "Q0": arr[:, 1], "Q1": arr[:, 2], "P1": arr[:, 3]})


def tail_bound_check(lfd: LFDPair, n_grid: int = 100) -> PropertyReport:
    """Mean-type tail inequalities linking Q0 and Q1 through ``dQ1 = l* dQ0``.

    Checked at every grid t, in weak and strict form::

        Q1(l* <= t) <= t Q0(l* <= t) - (t/2) Q0(l* <= t/2)
        Q0(l* >= t) <= Q1(l* >= t)/t - Q1(l* >= 2t)/(2t)
        Q0(l* >= t) <= Q1(l* >= t)/t
    """
    grid = _t_grid(lfd, n_grid)
    worst, bad = 0.0, []

    def q(i, ev, t):
        return lfd_event_prob(lfd, i, ev, t)

    for t in grid:
        checks = []
        for le, ge in (("<=", ">="), ("<", ">")):
            checks.append((f"lower{le}", q(1, le, t) - (t * q(0, le, t) - 0.5 * t * q(0, le, t / 2))))
            checks.append((f"upper{ge}", q(0, ge, t) - (q(1, ge, t) / t - q(1, ge, 2 * t) / (2 * t))))
        checks.append(("roc-slope", q(0, ">=", t) - q(1, ">=", t) / t))
        for name, v in checks:
            worst = max(worst, v)
            if v > ORDER_TOL:
                bad.append({"t": float(t), "check": name, "excess": v})
    return PropertyReport(grid, worst, bad)


__all__ = [
    "AdversarialResult",
    "ContaminationSpec",
    "PropertyReport",
    "SimResult",
    "adversarial_search",
    "default_family",
    "ordering_check",
    "simulate_chain",
    "tail_bound_check",
]
