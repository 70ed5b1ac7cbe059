"""Agent decision rules on the clipped likelihood ratio l*.

Agent 1 runs a plain threshold test. Every later agent runs a randomised
relay test that looks at its own l* and the bit ``u`` received from its
predecessor::

    l* < t1            -> 0
    l* = t1            -> 0 w.p. p, else u
    t1 < l* < t0       -> u
    l* = t0            -> u w.p. q, else 1
    l* > t0            -> 1
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_bit, check_hypothesis, check_probability
from .exceptions import DegeneratePosteriorError
from .lfd import LFDPair, l_star_masses
from .models import ATOM_RTOL


@dataclass(frozen=True)
class Priors:
    pi0: float = 0.5

    def __post_init__(self):
        object.__setattr__(
            self, "pi0", check_probability(self.pi0, "pi0", open_left=True, open_right=True)
        )

    @property
    def pi1(self):
        return 1.0 - self.pi0

    @property
    def ratio(self):
        return self.pi0 / self.pi1

    def error(self, p_false_alarm, p_miss):
        return self.pi0 * p_false_alarm + self.pi1 * p_miss


def _parse_threshold(value, name):
    if isinstance(value, str):
        if value.lower() in ("inf", "+inf", "infinity"):
            return math.inf
        raise ValueError(f"{name}: cannot parse threshold {value!r}")
    value = float(value)
    if math.isnan(value) or value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return value


def _ser(x):
    return "inf" if math.isinf(x) else x


@dataclass(frozen=True)
class FirstAgentRule:
    """Decide 1 iff ``l*(Y1) >= threshold``."""

    threshold: float

    def __post_init__(self):
        t = _parse_threshold(self.threshold, "threshold")
        if t <= 0:
            raise ValueError("first-agent threshold must be > 0")
        object.__setattr__(self, "threshold", t)

    def prob_one(self, lfd: LFDPair, i: int, under="lfd") -> float:
        gt, eq = l_star_masses(lfd, i, self.threshold, under)
        return min(1.0, gt + eq)

    def decide(self, l_star, rng=None):
        l_star = np.asarray(l_star, dtype=float)
        return ((l_star >= self.threshold) | _isclose(l_star, self.threshold)).astype(np.int8)

    def to_dict(self):
        return {"threshold": _ser(self.threshold)}


@dataclass(frozen=True)
class RelayRule:
    """Randomised likelihood-ratio relay test ``(t1, t0, p, q)``.

    ``t1 = 0`` or ``t0 = inf`` are allowed so that pure OR / pass-through
    relays can be written down directly.
    """

    t1: float
    t0: float
    p: float = 0.0
    q: float = 0.0

    def __post_init__(self):
        t1 = _parse_threshold(self.t1, "t1")
        t0 = _parse_threshold(self.t0, "t0")
        if t1 > t0:
            raise ValueError(f"relay rule needs t1 <= t0, got t1={t1}, t0={t0}")
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t0", t0)
        object.__setattr__(self, "p", check_probability(self.p, "p"))
        object.__setattr__(self, "q", check_probability(self.q, "q"))

    @classmethod
    def pass_through(cls):
        """Relay that always forwards its predecessor's bit."""
        return cls(0.0, math.inf, 0.0, 1.0)

    @classmethod
    def from_dict(cls, d):
        return cls(d["t1"], d["t0"], d.get("p", 0.0), d.get("q", 0.0))

    def to_dict(self):
        return {"t1": _ser(self.t1), "t0": _ser(self.t0), "p": self.p, "q": self.q}

    def kernel(self, lfd: LFDPair, i: int, under="lfd"):
        """2x2 array ``K[u, v] = P(phi(Y, u) = v)`` with ``Y ~ Q_i`` (or ``P_i*``)."""
        gt1, eq1 = l_star_masses(lfd, i, self.t1, under)
        gt0, eq0 = l_star_masses(lfd, i, self.t0, under)
        lt1 = max(0.0, 1.0 - gt1 - eq1)
        lt0 = max(0.0, 1.0 - gt0 - eq0)
        # both columns built directly so that small switching masses keep precision
        return np.array(
            [
                [min(1.0, lt0 + self.q * eq0), min(1.0, gt0 + (1.0 - self.q) * eq0)],
                [min(1.0, lt1 + self.p * eq1), min(1.0, gt1 + (1.0 - self.p) * eq1)],
            ]
        )

    def decide(self, l_star, u_prev, rng):
        """Vectorised application; ``rng`` supplies the tie-breaking coins."""
        l_star = np.asarray(l_star, dtype=float)
        u_prev = np.asarray(u_prev)
        coin = rng.random(l_star.shape)
        at1 = _isclose(l_star, self.t1)
        at0 = _isclose(l_star, self.t0)
        to_zero = ((l_star < self.t1) & ~at1) | (at1 & (coin < self.p))
        to_one = ((l_star > self.t0) & ~at0) | (at0 & (coin >= self.q))
        out = np.where(u_prev == 1, np.where(to_zero, 0, 1), np.where(to_one, 1, 0))
        return out.astype(np.int8)


def _isclose(x, t):
    if math.isinf(t):
        return np.zeros(np.shape(x), dtype=bool)
    return np.abs(x - t) <= ATOM_RTOL * max(1.0, abs(t))


def first_agent_rule(priors: Priors) -> FirstAgentRule:
    """Minimax single-agent rule: decide 1 iff ``l* >= pi0 / pi1``."""
    return FirstAgentRule(priors.ratio)


def kernel_prob(rule: RelayRule, lfd: LFDPair, i: int, u_prev: int, v: int, under="lfd") -> float:
    """``Q_i(phi(Y, u_prev) = v)`` for a relay rule."""
    i = check_hypothesis(i)
    return float(rule.kernel(lfd, i, under)[check_bit(u_prev, "u_prev"), check_bit(v, "v")])


def social_rule(priors: Priors, prev, lfd_k: LFDPair = None) -> RelayRule:
    """Myopic Bayes relay given the predecessor's LFD error probabilities.

    ``prev`` is anything with ``P_F`` and ``P_M`` attributes (a ``StageError``).
    Ties follow the weak/strict pattern of the myopic rule: at ``l* = t1`` the
    incoming bit is kept (``p = 0``) and at ``l* = t0`` the agent says 1 (``q = 0``).
    ``lfd_k`` is accepted for interface symmetry; thresholds do not depend on it.
    """
    qf, qm = float(prev.P_F), float(prev.P_M)
    if abs(qf + qm - 1.0) <= 1e-15:
        # incoming bit is independent of the hypothesis: decide on l* alone
        return RelayRule(priors.ratio, priors.ratio, 0.0, 0.0)
    if not (0.0 < qf < 1.0 and 0.0 < qm < 1.0):
        raise DegeneratePosteriorError(
            f"predecessor error probabilities collapsed (P_F={qf!r}, P_M={qm!r}); "
            "social thresholds are undefined"
        )
    t1 = priors.pi0 * qf / (priors.pi1 * (1.0 - qm))
    t0 = priors.pi0 * (1.0 - qf) / (priors.pi1 * qm)
    if t1 > t0:
        # predecessor is anti-informative (Q_F + Q_M > 1); the Bayes rule then
        # ignores the incoming bit, which the relay form expresses as t1 = t0
        t1 = t0 = priors.ratio
    return RelayRule(t1, t0, 0.0, 0.0)
