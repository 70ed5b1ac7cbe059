"""Randomised invariants (hypothesis)."""

import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_tandem import (
    DiscretePMF,
    ExponentialMeans,
    FirstAgentRule,
    GaussianShift,
    Priors,
    RelayRule,
    lfd_event_prob,
    lfd_from,
    ordering_check,
    propagate,
)
from robust_tandem.lfd import mass_quantile

eps_small = st.floats(0.0, 0.08)
models = st.one_of(
    st.builds(ExponentialMeans, st.just(1.0), st.floats(1.5, 5.0)),
    st.builds(GaussianShift, st.just(0.0), st.floats(0.8, 3.0), st.just(1.0)),
    st.just(DiscretePMF((0, 1, 2), (0.6, 0.3, 0.1), (0.1, 0.3, 0.6))),
)


@settings(max_examples=40, deadline=None)
@given(models, eps_small, eps_small)
def test_normalisation_and_ordering(model, e0, e1):
    lfd = lfd_from(model, e0, e1)
    assert max(abs(r) for r in lfd.residuals) < 1e-10
    assert lfd.c_lo < lfd.c_hi
    assert ordering_check(lfd, 15).ok


@st.composite
def relay_rules(draw):
    t1 = draw(st.floats(0.0, 6.0))
    t0 = draw(st.one_of(st.floats(t1, 8.0), st.just(math.inf)))
    return RelayRule(t1, t0, draw(st.floats(0, 1)), draw(st.floats(0, 1)))


@settings(max_examples=60, deadline=None)
@given(relay_rules(), eps_small, eps_small)
def test_kernel_rows_sum_to_one(rule, e0, e1):
    lfd = lfd_from(ExponentialMeans(1.0, 2.0), e0, e1)
    for i in (0, 1):
        K = rule.kernel(lfd, i)
        assert np.all((K >= 0) & (K <= 1))
        np.testing.assert_allclose(K.sum(axis=1), 1.0, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.lists(relay_rules(), min_size=1, max_size=15), st.floats(0.2, 5.0), st.floats(0.05, 0.95))
def test_chain_rates_valid_and_detection_dominates(relays, t, pi0):
    pr = Priors(pi0)
    lfd = lfd_from(GaussianShift(0.0, 1.0, 1.0), 0.03, 0.01)
    for s in propagate(FirstAgentRule(t), relays, lfd, pr):
        assert 0.0 <= s.P_F <= 1.0 and 0.0 <= s.P_M <= 1.0
        assert 1.0 - s.P_M >= s.P_F - 1e-14
        assert abs(s.P_e - (pi0 * s.P_F + (1 - pi0) * s.P_M)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), st.sampled_from([0, 1]))
def test_mass_quantile_round_trip(mass, i):
    lfd = lfd_from(ExponentialMeans(1.0, 2.0), 0.02, 0.03)
    t, p = mass_quantile(lfd, mass, "lower", i)
    got = lfd_event_prob(lfd, i, "<", t) + p * lfd_event_prob(lfd, i, "=", t)
    assert abs(got - mass) < 1e-9
