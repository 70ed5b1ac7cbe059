import itertools
import math

import numpy as np
import pytest
from scipy import optimize as sopt

from robust_tandem import (
    ChainConfig,
    ConstantEps,
    DiscretePMF,
    ExponentialMeans,
    Priors,
    RelayRule,
    first_agent_rule,
    lfd_event_prob,
    lfd_from,
    optimize_asymptotic_dd,
    optimize_finite_dd,
    optimize_unknown_sl,
    propagate,
    social_trajectory,
)
from robust_tandem.optimize import (
    Objective,
    asymptotic_value,
    optimize,
    rule_from_masses,
    unknown_sl_terms,
    unknown_sl_value,
    verify_unknown_sl,
)

EXP = ExponentialMeans(1.0, 2.0)
PR = Priors(0.5)
LFD = lfd_from(EXP, 0.01, 0.01)
TRI = DiscretePMF((0, 1, 2), (0.6, 0.3, 0.1), (0.1, 0.3, 0.6))


def exhaustive_finite_dd(lfd, N, priors):
    """Minimum agent-N error over every deterministic LRT chain (kernel enumeration)."""
    ls = sorted({round(float(lfd.b * min(max(v, lfd.c_lo), lfd.c_hi)), 12) for v in lfd.model.lr_atoms()})
    q = [[lfd_event_prob(lfd, i, "=", v) for v in ls] for i in (0, 1)]
    n = len(ls)
    firsts = [f for f in itertools.product((0, 1), repeat=n) if list(f) == sorted(f)]
    # relay maps each l* value to 0, "keep" or 1, monotonically
    order = {0: 0, 2: 1, 1: 2}
    relays = [f for f in itertools.product((0, 2, 1), repeat=n) if [order[x] for x in f] == sorted(order[x] for x in f)]
    best = 1.0
    for f1 in firsts:
        for rs in itertools.product(relays, repeat=N - 1):
            err = []
            for i in (0, 1):
                one = sum(w for w, d in zip(q[i], f1) if d == 1)
                for r in rs:
                    to1 = sum(w for w, d in zip(q[i], r) if d == 1)
                    keep = sum(w for w, d in zip(q[i], r) if d == 2)
                    one = to1 + one * keep
                err.append(one if i == 0 else 1 - one)
            best = min(best, priors.error(*err))
    return best


@pytest.mark.parametrize("eps", [(0.0, 0.0), (0.05, 0.05), (0.1, 0.02)])
@pytest.mark.parametrize("N", [1, 2, 3])
def test_finite_dd_matches_enumeration(eps, N):
    cfg = ChainConfig(TRI, N, PR, ConstantEps(*eps))
    rep = optimize_finite_dd(cfg)
    assert abs(rep.value - exhaustive_finite_dd(cfg.lfd(1), N, PR)) < 1e-10


def test_finite_dd_report_reevaluates():
    cfg = ChainConfig(EXP, 4, PR, ConstantEps(0.01, 0.01))
    rep = optimize_finite_dd(cfg)
    st = propagate(rep.best_rule.first, list(rep.best_rule.relays), cfg.lfds(), PR)
    assert abs(st[-1].P_e - rep.value) < 1e-12
    assert rep.restarts >= 8
    assert rep.objective is Objective.FINITE_DD


def test_finite_dd_dominance_and_monotone():
    vals = []
    for N in (1, 2, 3, 4):
        cfg = ChainConfig(EXP, N, PR, ConstantEps(0.01, 0.01))
        v = optimize_finite_dd(cfg).value
        social = social_trajectory(cfg)[0][-1].P_e
        assert v <= social + 1e-12
        vals.append(v)
    assert vals[0] == pytest.approx(0.38125, abs=1e-9)
    assert all(b <= a + 1e-12 for a, b in zip(vals, vals[1:]))


def test_finite_dd_deterministic_given_seed():
    cfg = ChainConfig(EXP, 3, PR, ConstantEps(0.01, 0.01))
    a, b = optimize_finite_dd(cfg, seed=4), optimize_finite_dd(cfg, seed=4)
    assert a.value == b.value and a.best_rule == b.best_rule


def test_shared_rule_objectives_ordering():
    dd = optimize_asymptotic_dd(LFD, PR)
    sl = optimize_unknown_sl(LFD, PR)
    p1 = propagate(first_agent_rule(PR), RelayRule.pass_through(), LFD, PR, N=1)[0].P_e
    assert dd.value <= sl.value + 1e-12 <= p1 + 2e-12
    assert asymptotic_value(dd.best_rule, LFD, PR) == pytest.approx(dd.value, abs=1e-12)
    assert unknown_sl_value(sl.best_rule, LFD, PR) == pytest.approx(sl.value, abs=1e-12)


def test_asymptotic_dd_corner_closed_form():
    # near the pass-through corner only the ratio of switching masses matters;
    # the limit there is pi0 r/(1+r) + pi1 c'/(c' + c'' r) minimised over r
    c_lo, c_hi = LFD.c_lo, LFD.c_hi

    def corner(z):
        r = math.exp(z)
        return 0.5 * r / (1 + r) + 0.5 * c_lo / (c_lo + c_hi * r)

    ref = sopt.minimize_scalar(corner, bounds=(-20, 20), method="bounded", options={"xatol": 1e-12}).fun
    assert optimize_asymptotic_dd(LFD, PR).value == pytest.approx(ref, abs=1e-7)


def test_unknown_sl_beats_dense_grid():
    rep = optimize_unknown_sl(LFD, PR)
    best = math.inf
    for d in np.linspace(0, 1, 61):
        for a in np.linspace(0, 1 - d, 31):
            best = min(best, unknown_sl_value(rule_from_masses(LFD, d, a), LFD, PR))
    assert rep.value <= best + 1e-12
    verify_unknown_sl(rep.best_rule, LFD, PR)
    assert rep.diagnostics["sup_to_horizon"] <= rep.value + 1e-9


def test_unknown_sl_terms_structure():
    rule = RelayRule(LFD.lower, 1.1, 1.0, 0.0)
    mx, p2, pinf = unknown_sl_terms(rule, LFD, PR)
    assert mx == max(p2, pinf)
    st = propagate(first_agent_rule(PR), rule, LFD, PR, N=2)
    assert p2 == pytest.approx(st[1].P_e, abs=1e-15)


def test_dispatcher():
    cfg = ChainConfig(EXP, 2, PR, ConstantEps(0.01, 0.01))
    assert optimize("finite-dd", config=cfg).value == pytest.approx(optimize_finite_dd(cfg).value)
    assert optimize("unknown-sl", lfd=LFD, priors=PR).value == pytest.approx(optimize_unknown_sl(LFD, PR).value)
    with pytest.raises(ValueError):
        optimize("bogus", lfd=LFD)
