import math

import numpy as np
import pytest
from oracles import Exp12LFD, exp12_breakpoints, huber_discrete

from robust_tandem import (
    ClassesNotDisjointError,
    DiscretePMF,
    ExponentialMeans,
    GaussianShift,
    UncertaintySpec,
    clipped_lr,
    lfd_density,
    lfd_event_prob,
    lfd_from,
    nominal_event_prob,
    sample_lfd,
    solve_breakpoints,
)
from robust_tandem.lfd import mass_quantile, overlap_pair, solve_or_overlap

EXP = ExponentialMeans(1.0, 2.0)
COIN = DiscretePMF((0, 1), (0.8, 0.2), (0.2, 0.8))


@pytest.mark.parametrize("eps", [(0.01, 0.01), (0.05, 0.0), (0.0, 0.05), (0.1, 0.02), (0.15, 0.15)])
def test_exponential_breakpoints_closed_form(eps):
    lfd = lfd_from(EXP, *eps)
    c_lo, c_hi = exp12_breakpoints(*eps)
    if eps[1] == 0:
        # any c' at or below the LR floor 1/2 gives the same clipping
        assert lfd.c_lo <= c_lo
    else:
        assert lfd.c_lo == pytest.approx(c_lo, rel=1e-10)
    if math.isinf(c_hi):
        assert math.isinf(lfd.c_hi)
    else:
        assert lfd.c_hi == pytest.approx(c_hi, rel=1e-10)
    assert max(abs(r) for r in lfd.residuals) < 1e-10


@pytest.mark.parametrize("model", [EXP, GaussianShift(0, 1, 1), COIN])
@pytest.mark.parametrize("eps", [(0.0, 0.0), (0.01, 0.01), (0.1, 0.05)])
def test_residuals_small(model, eps):
    lfd = lfd_from(model, *eps)
    assert max(abs(r) for r in lfd.residuals) < 1e-10
    assert lfd.b == pytest.approx((1 - eps[1]) / (1 - eps[0]))


def test_discrete_example_exact():
    lfd = lfd_from(COIN, 0.1, 0.1)
    assert abs(lfd.c_lo - 7 / 18) < 1e-12
    assert abs(lfd.c_hi - 18 / 7) < 1e-12
    q0 = [lfd_density(lfd, 0, y) for y in (0, 1)]
    q1 = [lfd_density(lfd, 1, y) for y in (0, 1)]
    assert q0 == pytest.approx([0.72, 0.28], abs=1e-12)
    assert q1 == pytest.approx([0.28, 0.72], abs=1e-12)
    ref0, ref1 = huber_discrete((0.8, 0.2), (0.2, 0.8), 0.1, 0.1, 7 / 18, 18 / 7)
    assert q0 + q1 == pytest.approx(ref0 + ref1, abs=1e-15)


def test_event_probs_match_closed_form():
    lfd = lfd_from(EXP, 0.01, 0.01)
    ref = Exp12LFD(0.01, 0.01)
    for t in np.geomspace(lfd.lower * 1.0001, lfd.upper * 0.999, 25):
        for i in (0, 1):
            assert lfd_event_prob(lfd, i, ">=", t) == pytest.approx(ref.ge(i, t), abs=1e-12)
    for i in (0, 1):
        assert lfd_event_prob(lfd, i, "=", lfd.lower) == pytest.approx(ref.atom(i, "lo"), abs=1e-12)
        assert lfd_event_prob(lfd, i, "=", lfd.upper) == pytest.approx(ref.atom(i, "hi"), abs=1e-12)


def test_event_complements():
    lfd = lfd_from(COIN, 0.1, 0.1)
    for t in (0.1, 7 / 18, 1.0, 18 / 7, 5.0):
        for i in (0, 1):
            gt, eq, lt = (lfd_event_prob(lfd, i, e, t) for e in (">", "=", "<"))
            assert gt + eq + lt == pytest.approx(1.0, abs=1e-15)
            assert lfd_event_prob(lfd, i, "<=", t) == pytest.approx(lt + eq)


def test_unknown_event_rejected():
    with pytest.raises(ValueError):
        lfd_event_prob(lfd_from(EXP, 0.01, 0.01), 0, "!=", 1.0)


def test_overlapping_classes_raise():
    with pytest.raises(ClassesNotDisjointError) as exc:
        solve_breakpoints(UncertaintySpec(EXP, 0.25, 0.25))
    assert exc.value.c_lo >= exc.value.c_hi


def test_overlap_pair_is_uninformative():
    spec = UncertaintySpec(GaussianShift(0, 1, 1), 0.5, 0.5)
    pair = solve_or_overlap(spec)
    assert pair.overlap and pair.atoms() == (1.0,)
    for i in (0, 1):
        assert lfd_event_prob(pair, i, "=", 1.0) == 1.0
    assert solve_or_overlap(UncertaintySpec(EXP, 0.01, 0.01)) == solve_breakpoints(UncertaintySpec(EXP, 0.01, 0.01))
    assert overlap_pair(spec).to_dict()["overlap"] is True
    with pytest.raises(ValueError):
        lfd_density(pair, 0, 0.0)


def test_clipping():
    lfd = lfd_from(EXP, 0.01, 0.01)
    assert clipped_lr(lfd, 0.0) == pytest.approx(lfd.lower)
    assert clipped_lr(lfd, 50.0) == pytest.approx(lfd.upper)
    y = 1.3
    assert clipped_lr(lfd, y) == pytest.approx(lfd.b * 0.5 * math.exp(y / 2))


def test_density_ratio_is_clipped_lr():
    lfd = lfd_from(GaussianShift(0, 1, 1), 0.05, 0.02)
    for y in np.linspace(-4, 5, 19):
        ratio = lfd_density(lfd, 1, y) / lfd_density(lfd, 0, y)
        assert ratio == pytest.approx(clipped_lr(lfd, y), rel=1e-12)


def test_eps_zero_is_nominal():
    lfd = lfd_from(GaussianShift(0, 1, 1), 0.0, 0.0)
    for t in (0.2, 1.0, 3.0):
        for i in (0, 1):
            assert lfd_event_prob(lfd, i, ">", t) == pytest.approx(nominal_event_prob(lfd, i, ">", t), abs=1e-15)


@pytest.mark.parametrize("i", [0, 1])
def test_sample_lfd_matches_exact_law(i):
    lfd = lfd_from(EXP, 0.05, 0.05)
    rng = np.random.default_rng(11)
    n = 400_000
    draws = sample_lfd(lfd, i, rng, n)
    for t in (lfd.lower, 1.0, 2.0, lfd.upper):
        p = lfd_event_prob(lfd, i, ">=", t)
        emp = np.mean(draws >= t * (1 - 1e-12))
        assert abs(emp - p) < 4 * math.sqrt(p * (1 - p) / n) + 1e-12


@pytest.mark.parametrize("mass", [0.0, 0.1, 0.3, 0.7, 1.0])
def test_mass_quantile_inverts(mass):
    lfd = lfd_from(COIN, 0.1, 0.1)
    t, p = mass_quantile(lfd, mass, "lower", 0)
    got = lfd_event_prob(lfd, 0, "<", t) + p * lfd_event_prob(lfd, 0, "=", t)
    assert got == pytest.approx(mass, abs=1e-12)
    t, q = mass_quantile(lfd, mass, "upper", 0)
    got = lfd_event_prob(lfd, 0, ">", t) + (1 - q) * lfd_event_prob(lfd, 0, "=", t)
    assert got == pytest.approx(mass, abs=1e-12)


def test_spec_validation():
    with pytest.raises(ValueError):
        UncertaintySpec(EXP, 1.0, 0.0)
    with pytest.raises(ValueError):
        UncertaintySpec(EXP, -0.1, 0.0)
    with pytest.raises(TypeError):
        UncertaintySpec("exp", 0.1, 0.1)
