"""Exact error propagation along a tandem of agents.

Conditioned on the hypothesis, agent k's decision depends on the past only
through ``U_{k-1}``, so the false-alarm and miss probabilities obey affine
recurrences driven by the 2x2 decision kernels of each relay rule.
"""

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from ._validation import check_probability
from .exceptions import (
    DegeneratePosteriorError,
    NoContractionError,
    SchemeInapplicableError,
)
from .lfd import (
    LFDPair,
    UncertaintySpec,
    l_star_masses,
    lfd_event_prob,
    solve_breakpoints,
    solve_or_overlap,
)
from .models import NominalPair
from .rules import FirstAgentRule, Priors, RelayRule, first_agent_rule, social_rule


@dataclass(frozen=True)
class StageError:
    k: int
    P_F: float
    P_M: float
    P_e: float

    @classmethod
    def from_rates(cls, k, p_f, p_m, priors):
        return cls(k, p_f, p_m, priors.error(p_f, p_m))

    def as_row(self):
        return (self.k, self.P_F, self.P_M, self.P_e)


# --- contamination schedules --------------------------------------------------


class EpsSchedule:
    """Per-agent contamination pairs ``(eps0_k, eps1_k)``, k = 1, 2, ..."""

    def pair(self, k: int):
        raise NotImplementedError

    @property
    def vanishes(self):
        """Whether (eps0_k, eps1_k) have subsequences tending to zero."""
        raise NotImplementedError

    @property
    def is_constant(self):
        return False

    def to_dict(self):
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantEps(EpsSchedule):
    eps0: float = 0.0
    eps1: float = 0.0

    def __post_init__(self):
        check_probability(self.eps0, "eps0", open_right=True)
        check_probability(self.eps1, "eps1", open_right=True)

    def pair(self, k):
        return (self.eps0, self.eps1)

    @property
    def vanishes(self):
        return (self.eps0 == 0.0, self.eps1 == 0.0)

    @property
    def is_constant(self):
        return True

    def to_dict(self):
        return {"eps0": self.eps0, "eps1": self.eps1}


@dataclass(frozen=True)
class HarmonicEps(EpsSchedule):
    """``eps_{i,k} = a_i / (k + offset)``."""

    a0: float
    a1: float
    offset: float = 0.0

    def __post_init__(self):
        if self.a0 < 0 or self.a1 < 0:
            raise ValueError("harmonic schedule coefficients must be >= 0")
        if 1 + self.offset <= max(self.a0, self.a1):
            raise ValueError("harmonic schedule gives eps >= 1 at k = 1")

    def pair(self, k):
        return (self.a0 / (k + self.offset), self.a1 / (k + self.offset))

    @property
    def vanishes(self):
        return (True, True)

    def to_dict(self):
        off = f"+{self.offset:g}" if self.offset else ""
        den = f"(k{off})" if off else "k"
        return {"eps0": f"{self.a0:g}/{den}", "eps1": f"{self.a1:g}/{den}"}


@dataclass(frozen=True)
class ExplicitEps(EpsSchedule):
    """A finite list of pairs; the last pair is held for agents beyond the list."""

    pairs: tuple

    def __post_init__(self):
        pairs = tuple((float(a), float(b)) for a, b in self.pairs)
        if not pairs:
            raise ValueError("explicit schedule must contain at least one pair")
        for a, b in pairs:
            check_probability(a, "eps0", open_right=True)
            check_probability(b, "eps1", open_right=True)
        object.__setattr__(self, "pairs", pairs)

    def pair(self, k):
        return self.pairs[min(k, len(self.pairs)) - 1]

    @property
    def vanishes(self):
        last = self.pairs[-1]
        return (last[0] == 0.0, last[1] == 0.0)

    @property
    def is_constant(self):
        return len(set(self.pairs)) == 1

    def to_dict(self):
        return {"schedule": [list(p) for p in self.pairs]}


_HARMONIC = re.compile(r"^\s*([0-9.eE+-]+)\s*/\s*(?:k|\(\s*k\s*\+\s*([0-9.eE+-]+)\s*\))\s*$")


def parse_eps(value):
    """Parse one contamination entry: a number, ``"a/k"`` or ``"a/(k+c)"``.

    Returns either a float or ``(a, offset)`` for the harmonic form.
    """
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        m = _HARMONIC.match(value)
        if m:
            return (float(m.group(1)), float(m.group(2) or 0.0))
        try:
            return float(value)
        except ValueError:
            pass
    raise ValueError(f"cannot parse contamination value {value!r}")


def schedule_from_dict(d):
    if "schedule" in d:
        return ExplicitEps(tuple(tuple(p) for p in d["schedule"]))
    e0 = parse_eps(d.get("eps0", 0.0))
    e1 = parse_eps(d.get("eps1", 0.0))
    if isinstance(e0, float) and isinstance(e1, float):
        return ConstantEps(e0, e1)
    if isinstance(e0, tuple) and isinstance(e1, tuple):
        if e0[1] != e1[1]:
            raise ValueError("harmonic schedules for eps0 and eps1 must share the offset")
        return HarmonicEps(e0[0], e1[0], e0[1])
    raise ValueError("eps0 and eps1 must both be constants or both harmonic")


@dataclass(frozen=True)
class ChainConfig:
    model: NominalPair
    N: int
    priors: Priors = field(default_factory=Priors)
    eps_schedule: EpsSchedule = field(default_factory=ConstantEps)

    def __post_init__(self):
        if isinstance(self.eps_schedule, tuple):
            object.__setattr__(self, "eps_schedule", ConstantEps(*self.eps_schedule))
        if not isinstance(self.N, int) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")

    def spec(self, k):
        return UncertaintySpec(self.model, *self.eps_schedule.pair(k))

    def lfd(self, k) -> LFDPair:
        """Agent k's least-favorable pair; intersecting classes give the uninformative pair."""
        return solve_or_overlap(self.spec(k))

    def lfds(self):
        return [self.lfd(k) for k in range(1, self.N + 1)]


# --- exact propagation ----------------------------------------------------------


def _broadcast(item, n, name, kind):
    if isinstance(item, kind):
        return [item] * n
    items = list(item)
    if len(items) != n:
        raise ValueError(f"{name} has length {len(items)}, expected {n}")
    return items


def propagate(
    first: FirstAgentRule,
    relays: Union[RelayRule, Sequence[RelayRule]],
    lfds: Union[LFDPair, Sequence[LFDPair]],
    priors: Priors,
    N: Optional[int] = None,
    under: str = "lfd",
):
    """Stage errors for agents 1..N, computed exactly.

    ``relays`` and ``lfds`` may be shared (single objects) or per-agent
    sequences of length N-1 and N. ``under="nominal"`` evaluates the same
    rules with observations drawn from the nominals instead of the LFDs.
    """
    if N is None:
        if not isinstance(relays, RelayRule):
            N = len(relays) + 1
        elif not isinstance(lfds, LFDPair):
            N = len(lfds)
        else:
            raise ValueError("N is required when relays and lfds are both shared")
    relays = _broadcast(relays, N - 1, "relays", RelayRule)
    lfds = _broadcast(lfds, N, "lfds", LFDPair)

    p_f = first.prob_one(lfds[0], 0, under)
    p_m = 1.0 - first.prob_one(lfds[0], 1, under)
    out = [StageError.from_rates(1, p_f, p_m, priors)]
    cache = {}
    for k in range(2, N + 1):
        rule, lfd = relays[k - 2], lfds[k - 1]
        key = (rule, lfd)
        if key not in cache:
            cache[key] = (rule.kernel(lfd, 0, under), rule.kernel(lfd, 1, under))
        k0, k1 = cache[key]
        p_f = p_f * k0[1, 1] + (1.0 - p_f) * k0[0, 1]
        p_m = p_m * k1[0, 0] + (1.0 - p_m) * k1[1, 0]
        out.append(StageError.from_rates(k, p_f, p_m, priors))
    return out


@dataclass(frozen=True)
class AsymptoticError:
    P_F: float
    P_M: float
    P_e: float
    rho_F: float
    rho_M: float


def asymptotic_error(rule: RelayRule, lfd: LFDPair, priors: Priors) -> AsymptoticError:
    """Fixed point of the shared-relay recurrence, with its linear rates.

    ``P_F -> a / (a + d)`` and ``P_M -> m / (m + f)`` where ``a = Q0(phi(Y,0)=1)``,
    ``d = Q0(phi(Y,1)=0)``, ``m = Q1(phi(Y,1)=0)``, ``f = Q1(phi(Y,0)=1)``.
    """
    k0, k1 = rule.kernel(lfd, 0), rule.kernel(lfd, 1)
    a, d = k0[0, 1], k0[1, 0]
    m, f = k1[1, 0], k1[0, 1]
    if a + d <= 0.0 or m + f <= 0.0:
        raise NoContractionError(
            "relay rule never overrides its input under one hypothesis "
            f"(a+d={a + d!r}, m+f={m + f!r}); the chain error stays at its stage-1 value"
        )
    p_f, p_m = a / (a + d), m / (m + f)
    return AsymptoticError(
        P_F=p_f,
        P_M=p_m,
        P_e=priors.error(p_f, p_m),
        rho_F=abs(k0[1, 1] - k0[0, 1]),
        rho_M=abs(k1[1, 1] - k1[0, 1]),
    )


def social_trajectory(config: ChainConfig):
    """Myopic (social-learning) rules and their exact stage errors.

    Returns ``(stages, relays)``. Raises :class:`DegeneratePosteriorError`
    carrying the partial trajectory if some agent's error probabilities
    collapse to 0 or 1.
    """
    priors = config.priors
    first = first_agent_rule(priors)
    lfd1 = config.lfd(1)
    p_f = first.prob_one(lfd1, 0)
    p_m = 1.0 - first.prob_one(lfd1, 1)
    stages = [StageError.from_rates(1, p_f, p_m, priors)]
    rules = []
    for k in range(2, config.N + 1):
        lfd = config.lfd(k)
        try:
            rule = social_rule(priors, stages[-1], lfd)
        except DegeneratePosteriorError as exc:
            raise DegeneratePosteriorError(f"agent {k}: {exc}", stages, rules) from None
        k0, k1 = rule.kernel(lfd, 0), rule.kernel(lfd, 1)
        p_f = p_f * k0[1, 1] + (1.0 - p_f) * k0[0, 1]
        p_m = p_m * k1[0, 0] + (1.0 - p_m) * k1[1, 0]
        stages.append(StageError.from_rates(k, p_f, p_m, priors))
        rules.append(rule)
    return stages, rules


# --- asymptotic learning scheme ---------------------------------------------------

PHI_DELTA_T_CAP = 2.0**60


@dataclass(frozen=True)
class PhiDeltaResult:
    t: float
    N_star: int
    lower_bound: float
    upper_bound: float
    P_F: float
    P_M: float
    P_e: float
    lfd: LFDPair = field(repr=False)

    @property
    def predicted(self):
        return StageError(math.inf, self.P_F, self.P_M, self.P_e)

    def rules(self, N: int):
        """First-agent rule and N-1 relays realising the scheme on a chain of N agents.

        Agents 1..N* declare 1 once any of them sees ``l* >= t``; later agents relay.
        """
        first = FirstAgentRule(self.t)
        or_relay = RelayRule(0.0, self.t, 0.0, 0.0)
        relays = [or_relay if k <= self.N_star else RelayRule.pass_through() for k in range(2, N + 1)]
        return first, relays


def phi_delta_scheme(spec: UncertaintySpec, delta: float, priors: Priors = None) -> PhiDeltaResult:
    """OR-then-relay scheme driving both asymptotic error types below ``delta``.

    Searches ``t = 2, 4, 8, ...`` until an integer ``N*`` fits strictly between
    ``log(delta) / log(1 - Q1(l* >= t))`` and ``log(1 - delta) / log(1 - Q1(l* >= t)/t)``,
    and returns the smallest such ``N*`` with closed-form limiting errors.
    """
    priors = priors or Priors()
    delta = check_probability(delta, "delta", open_left=True, open_right=True)
    if spec.eps0 != 0.0:
        raise SchemeInapplicableError("the scheme needs eps0 = 0 (uncontaminated H0 class)")
    if not spec.model.llr_unbounded_above:
        raise SchemeInapplicableError(
            "the scheme needs a nominal log-likelihood ratio unbounded from above"
        )
    lfd = solve_breakpoints(spec)
    t = 2.0
    while t <= PHI_DELTA_T_CAP:
        x = lfd_event_prob(lfd, 1, ">=", t)
        if 0.0 < x < 1.0:
            lower = math.log(delta) / math.log1p(-x)
            upper = math.log1p(-delta) / math.log1p(-x / t)
            n_star = math.floor(lower) + 1
            if n_star < upper:
                p_m = (1.0 - x) ** n_star
                p_f = -math.expm1(n_star * math.log1p(-lfd_event_prob(lfd, 0, ">=", t)))
                if p_m < delta and p_f < delta:
                    return PhiDeltaResult(
                        t, n_star, lower, upper, p_f, p_m, priors.error(p_f, p_m), lfd
                    )
        t *= 2.0
    raise RuntimeError(f"no admissible (t, N*) found for t <= 2^60 (delta={delta})")


# --- learnability verdicts -------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    learnable: Optional[bool]
    clause: str
    reason: str

    @property
    def label(self):
        return {True: "learnable", False: "not_learnable", None: "undetermined"}[self.learnable]


def learnability_check(config: ChainConfig, mode: str) -> Verdict:
    """Structural asymptotic-learning verdict for a chain with known positions.

    ``mode`` is ``"DD"`` (decentralized detection) or ``"SL"`` (social learning).
    """
    mode = mode.upper()
    if mode not in ("DD", "SL"):
        raise ValueError("mode must be 'DD' or 'SL'")
    model, sched = config.model, config.eps_schedule
    above, below = model.llr_unbounded_above, model.llr_unbounded_below
    v0, v1 = sched.vanishes

    if sched.is_constant:
        e0, e1 = sched.pair(1)
        if mode == "DD":
            if e0 == 0.0 and above:
                return Verdict(True, "dd-1", "eps0 = 0 and the nominal LLR is unbounded above")
            if e1 == 0.0 and below:
                return Verdict(True, "dd-2", "eps1 = 0 and the nominal LLR is unbounded below")
            return Verdict(
                False,
                "dd-none",
                "neither (eps0 = 0, LLR unbounded above) nor (eps1 = 0, LLR unbounded below) holds",
            )
        if e0 == 0.0 and e1 == 0.0 and above and below:
            return Verdict(True, "sl-identical", "eps0 = eps1 = 0 and the nominal LLR is unbounded")
        if e0 > 0.0 or e1 > 0.0:
            return Verdict(False, "sl-identical", "identical classes with nonzero contamination")
        return Verdict(False, "sl-identical", "the nominal LLR is bounded")

    # varying contamination
    if not (above and below):
        return Verdict(False, "sl-varying", "the nominal LLR is bounded")
    if v0 and v1:
        return Verdict(
            True,
            "sl-varying",
            "eps0_k and eps1_k both have subsequences converging to zero",
        )
    if mode == "SL":
        return Verdict(False, "sl-varying", "eps0_k or eps1_k is bounded away from zero")
    return Verdict(None, "dd-varying", "no structural criterion covers this schedule")


__all__ = [
    "AsymptoticError",
    "ChainConfig",
    "ConstantEps",
    "EpsSchedule",
    "ExplicitEps",
    "HarmonicEps",
    "PhiDeltaResult",
    "StageError",
    "Verdict",
    "asymptotic_error",
    "learnability_check",
    "l_star_masses",
    "parse_eps",
    "phi_delta_scheme",
    "propagate",
    "schedule_from_dict",
    "social_trajectory",
]
