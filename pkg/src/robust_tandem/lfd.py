"""Huber least-favorable pairs for epsilon-contamination classes.

For contamination levels ``eps0``, ``eps1`` the least-favorable densities are

    q0 = (1 - eps0) * max(p0, p1 / c_hi)
    q1 = (1 - eps1) * max(p1, c_lo * p0)

with ``c_lo < c_hi`` fixed by normalisation. Their ratio is the clipped
likelihood ratio ``l*(y) = b * clamp(L(y), c_lo, c_hi)``, ``b = (1-eps1)/(1-eps0)``.
Everything here works on the distribution of ``L(Y)``, using the closed-form
tails supplied by the nominal model.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._validation import check_hypothesis, check_probability, check_random_state
from .exceptions import ClassesNotDisjointError
from .models import ATOM_RTOL, NominalPair

NORMALIZATION_TOL = 1e-10
_MAX_BISECT = 400

EVENTS = (">", ">=", "=", "<", "<=")


@dataclass(frozen=True)
class UncertaintySpec:
    model: NominalPair
    eps0: float = 0.0
    eps1: float = 0.0

    def __post_init__(self):
        if not isinstance(self.model, NominalPair):
            raise TypeError("model must be a NominalPair")
        object.__setattr__(self, "eps0", check_probability(self.eps0, "eps0", open_right=True))
        object.__setattr__(self, "eps1", check_probability(self.eps1, "eps1", open_right=True))


@dataclass(frozen=True)
class LFDPair:
    """Solved least-favorable pair. ``c_hi`` may be ``math.inf``; ``c_lo`` may be 0.

    ``overlap=True`` marks the degenerate pair used when the two classes
    intersect: both hypotheses can then share one law, so ``l* = 1`` a.s.
    """

    spec: UncertaintySpec
    c_lo: float
    c_hi: float
    b: float
    overlap: bool = False

    @property
    def model(self):
        return self.spec.model

    @property
    def eps0(self):
        return self.spec.eps0

    @property
    def eps1(self):
        return self.spec.eps1

    @property
    def lower(self):
        """Smallest value of l*, ``b * c_lo``."""
        return self.b * self.c_lo

    @property
    def upper(self):
        """Largest value of l*, ``b * c_hi`` (infinite when eps0 = 0)."""
        return math.inf if math.isinf(self.c_hi) else self.b * self.c_hi

    @property
    def residuals(self):
        """Normalisation residuals ``(int q0 - 1, int q1 - 1)``."""
        return _normalization_residuals(self)

    def atoms(self):
        """Sorted values of l* that carry positive LFD mass."""
        if self.overlap:
            return (1.0,)
        cands = {self.lower}
        if math.isfinite(self.c_hi):
            cands.add(self.upper)
        for lr in self.model.lr_atoms():
            if self.c_lo < lr < self.c_hi:
                cands.add(self.b * lr)
        out = [s for s in cands if _l_star_masses(self, _lfd_measure(self, 0), s)[1] > 0.0]
        return tuple(sorted(out))

    def to_dict(self):
        r0, r1 = self.residuals
        return {
            "overlap": self.overlap,
            "c_lo": self.c_lo,
            "c_hi": "inf" if math.isinf(self.c_hi) else self.c_hi,
            "b": self.b,
            "eps0": self.eps0,
            "eps1": self.eps1,
            "residual_q0": r0,
            "residual_q1": r1,
        }


# --- normalisation equations ---------------------------------------------------


def _excess0(model, c):
    # int max(p0, p1/c) - 1 = P1(L >= c)/c - P0(L >= c); decreasing in c
    t0, a0 = model.lr_tail(0, c)
    t1, a1 = model.lr_tail(1, c)
    return (t1 + a1) / c - (t0 + a0)


def _excess1(model, c):
    # int max(p1, c p0) - 1 = c P0(L <= c) - P1(L <= c); increasing in c
    t0, _ = model.lr_tail(0, c)
    t1, _ = model.lr_tail(1, c)
    return c * (1.0 - t0) - (1.0 - t1)


def _bisect_log(f, target, increasing):
    """Solve ``f(c) = target`` for monotone ``f`` on (0, inf) by bisection in log c."""

    def above(c):
        v = f(c) - target
        return v > 0 if increasing else v < 0

    lo = hi = 1.0
    if above(1.0):
        while above(lo):
            lo *= 0.5
            if lo < 1e-300:
                raise RuntimeError("failed to bracket breakpoint from below")
    else:
        while not above(hi):
            hi *= 2.0
            if hi > 1e300:
                raise RuntimeError("failed to bracket breakpoint from above")
    # invariant: not above(lo), above(hi)
    for _ in range(_MAX_BISECT):
        mid = math.sqrt(lo * hi)
        if not lo < mid < hi:
            break
        if above(mid):
            hi = mid
        else:
            lo = mid
    return lo if abs(f(lo) - target) <= abs(f(hi) - target) else hi


@lru_cache(maxsize=4096)
def solve_breakpoints(spec: UncertaintySpec) -> LFDPair:
    """Solve for ``(c_lo, c_hi)`` and return the least-favorable pair.

    Raises :class:`ClassesNotDisjointError` when the solved breakpoints do not
    satisfy ``c_lo < c_hi``.
    """
    model, eps0, eps1 = spec.model, spec.eps0, spec.eps1
    c_hi = math.inf
    c_lo = 0.0
    if eps0 > 0:
        c_hi = _bisect_log(lambda c: _excess0(model, c), eps0 / (1.0 - eps0), increasing=False)
    if eps1 > 0:
        c_lo = _bisect_log(lambda c: _excess1(model, c), eps1 / (1.0 - eps1), increasing=True)
    if not c_lo < c_hi:
        raise ClassesNotDisjointError(
            f"contamination classes overlap for eps0={eps0}, eps1={eps1}: "
            f"c'={c_lo:.6g} >= c''={c_hi:.6g}",
            c_lo=c_lo,
            c_hi=c_hi,
        )
    lfd = LFDPair(spec=spec, c_lo=c_lo, c_hi=c_hi, b=(1.0 - eps1) / (1.0 - eps0))
    r0, r1 = _normalization_residuals(lfd)
    if max(abs(r0), abs(r1)) > NORMALIZATION_TOL:
        raise RuntimeError(f"breakpoint normalisation residuals too large: {r0!r}, {r1!r}")
    return lfd


def overlap_pair(spec: UncertaintySpec) -> LFDPair:
    """Degenerate pair for intersecting classes (uninformative observation)."""
    return LFDPair(spec=spec, c_lo=1.0, c_hi=1.0, b=1.0, overlap=True)


def solve_or_overlap(spec: UncertaintySpec) -> LFDPair:
    """Like :func:`solve_breakpoints`, but overlapping classes give :func:`overlap_pair`."""
    try:
        return solve_breakpoints(spec)
    except ClassesNotDisjointError:
        return overlap_pair(spec)


def lfd_from(model, eps0=0.0, eps1=0.0):
    """Convenience wrapper: ``solve_breakpoints(UncertaintySpec(model, eps0, eps1))``."""
    return solve_breakpoints(UncertaintySpec(model, eps0, eps1))


def _normalization_residuals(lfd):
    if lfd.overlap:
        return 0.0, 0.0
    model = lfd.model
    r0 = 0.0 if math.isinf(lfd.c_hi) else (1 - lfd.eps0) * _excess0(model, lfd.c_hi) - lfd.eps0
    r1 = 0.0 if lfd.c_lo == 0.0 else (1 - lfd.eps1) * _excess1(model, lfd.c_lo) - lfd.eps1
    return r0, r1


# --- distributions of L under the nominals and the LFDs ---------------------------


class _Measure:
    """Probability measure on the values of L, given by ``gt(u) = M(L > u)``, ``eq(u) = M(L = u)``."""

    def __init__(self, gt, eq):
        self.gt = gt
        self.eq = eq


def _nominal_measure(model, i):
    return _Measure(lambda u: model.lr_tail(i, u)[0], lambda u: model.lr_tail(i, u)[1])


def _lfd_measure(lfd, i):
    model, c_lo, c_hi = lfd.model, lfd.c_lo, lfd.c_hi
    if i == 0:
        w = 1.0 - lfd.eps0
        if math.isinf(c_hi):
            return _Measure(lambda u: w * model.lr_tail(0, u)[0], lambda u: w * model.lr_tail(0, u)[1])
        t0h, a0h = model.lr_tail(0, c_hi)
        t1h, a1h = model.lr_tail(1, c_hi)
        upper_mass = (t1h + a1h) / c_hi  # P1(L >= c'')/c''
        p0_ge_hi = t0h + a0h

        def gt(u):
            if u < c_hi:
                return w * (model.lr_tail(0, u)[0] - p0_ge_hi + upper_mass)
            return w * model.lr_tail(1, u)[0] / c_hi

        def eq(u):
            if u < c_hi:
                return w * model.lr_tail(0, u)[1]
            return w * model.lr_tail(1, u)[1] / c_hi

        return _Measure(gt, eq)

    w = 1.0 - lfd.eps1
    if c_lo == 0.0:
        return _Measure(lambda u: w * model.lr_tail(1, u)[0], lambda u: w * model.lr_tail(1, u)[1])
    t1l, _ = model.lr_tail(1, c_lo)
    t0l, _ = model.lr_tail(0, c_lo)

    def gt(u):
        if u >= c_lo:
            return w * model.lr_tail(1, u)[0]
        return w * (t1l + c_lo * (model.lr_tail(0, u)[0] - t0l))

    def eq(u):
        if u > c_lo:
            return w * model.lr_tail(1, u)[1]
        return w * c_lo * model.lr_tail(0, u)[1]

    return _Measure(gt, eq)


def _close(a, b):
    if math.isinf(a) or math.isinf(b):
        return a == b
    return abs(a - b) <= ATOM_RTOL * max(1.0, abs(a), abs(b))


def _l_star_masses(lfd, measure, s):
    """``(M(l* > s), M(l* = s))`` for ``l* = b * clamp(L, c_lo, c_hi)``."""
    if lfd.overlap:
        return (0.0, 1.0) if _close(s, 1.0) else ((1.0, 0.0) if s < 1.0 else (0.0, 0.0))
    lo, hi = lfd.lower, lfd.upper
    if _close(s, lo):
        gt = measure.gt(lfd.c_lo)
        return _clip01(gt), _clip01(1.0 - gt)
    if s < lo:
        return 1.0, 0.0
    if _close(s, hi):
        return 0.0, _clip01(measure.gt(lfd.c_hi) + measure.eq(lfd.c_hi))
    if s > hi:
        return 0.0, 0.0
    u = s / lfd.b
    return _clip01(measure.gt(u)), _clip01(measure.eq(u))


def _clip01(x):
    return min(1.0, max(0.0, x))


def _event(gt, eq, event):
    if event == ">":
        return gt
    if event == ">=":
        return min(1.0, gt + eq)
    if event == "=":
        return eq
    if event == "<":
        return max(0.0, 1.0 - gt - eq)
    if event == "<=":
        return max(0.0, 1.0 - gt)
    raise ValueError(f"unknown event {event!r}; expected one of {EVENTS}")


def _check_threshold(t):
    t = float(t)
    if not t >= 0.0:
        raise ValueError(f"threshold must be >= 0, got {t!r}")
    return t


def l_star_masses(lfd: LFDPair, i: int, t: float, under: str = "lfd"):
    """``(P(l* > t), P(l* = t))`` with ``Y ~ Q_i`` (``under="lfd"``) or ``Y ~ P_i*`` (``"nominal"``)."""
    i = check_hypothesis(i)
    t = _check_threshold(t)
    if under == "lfd":
        measure = _lfd_measure(lfd, i)
    elif under == "nominal":
        measure = _nominal_measure(lfd.model, i)
    else:
        raise ValueError(f"under must be 'lfd' or 'nominal', got {under!r}")
    return _l_star_masses(lfd, measure, t)


def lfd_event_prob(lfd: LFDPair, i: int, event: str, t: float) -> float:
    """Exact ``Q_i(l* <event> t)`` for ``event`` in ``{'>', '>=', '=', '<', '<='}``."""
    return _event(*l_star_masses(lfd, i, t, "lfd"), event)


def nominal_event_prob(lfd: LFDPair, i: int, event: str, t: float) -> float:
    """``P_i*(l* <event> t)``: the same clipped statistic under the nominal."""
    return _event(*l_star_masses(lfd, i, t, "nominal"), event)


def clipped_lr(lfd: LFDPair, y) -> float:
    """``l*(y) = b * clamp(L(y), c_lo, c_hi)``."""
    lr = lfd.model.lr_value(y)
    return lfd.b * min(max(lr, lfd.c_lo), lfd.c_hi)


def clip_lr_values(lfd: LFDPair, lr):
    """Vectorised clamp of nominal LR values into l* values."""
    lr = np.asarray(lr, dtype=float)
    out = lfd.b * np.clip(lr, lfd.c_lo, lfd.c_hi)
    return out


def lfd_density(lfd: LFDPair, i: int, y) -> float:
    """Least-favorable density ``q_i(y)`` w.r.t. the nominals' base measure."""
    i = check_hypothesis(i)
    if lfd.overlap:
        raise ValueError("no unique least-favorable density when the classes overlap")
    p0, p1 = lfd.model.pdf(0, y), lfd.model.pdf(1, y)
    if i == 0:
        alt = 0.0 if math.isinf(lfd.c_hi) else p1 / lfd.c_hi
        return (1.0 - lfd.eps0) * max(p0, alt)
    return (1.0 - lfd.eps1) * max(p1, lfd.c_lo * p0)


def sample_lfd(lfd: LFDPair, i: int, rng, size=None):
    """Draw ``l*(Y)`` with ``Y ~ Q_i``.

    Uses the mixture form of the least-favorable law: with probability
    ``1 - eps_i`` a nominal draw whose LR lies on the unclipped side of the
    relevant breakpoint, otherwise the clip atom.
    """
    i = check_hypothesis(i)
    rng = check_random_state(rng)
    n = 1 if size is None else size
    lr = np.asarray(lfd.model.sample_lr(i, rng, n), dtype=float)
    keep = rng.random(n) < (1.0 - (lfd.eps1 if i else lfd.eps0))
    clipped = clip_lr_values(lfd, lr)
    if i == 0:
        out = np.where(keep & (lr < lfd.c_hi), clipped, lfd.upper)
    else:
        out = np.where(keep & (lr > lfd.c_lo), clipped, lfd.lower)
    return float(out[0]) if size is None else out


def mass_quantile(lfd: LFDPair, mass: float, side: str, i: int = 0):
    """Randomised threshold carrying ``Q_i``-mass ``mass`` on one side of l*.

    ``side="lower"`` returns ``(t, p)`` with ``Q_i(l* < t) + p Q_i(l* = t) = mass``;
    ``side="upper"`` returns ``(t, q)`` with ``Q_i(l* > t) + (1-q) Q_i(l* = t) = mass``.
    These are the two halves of a randomised LRT.
    """
    mass = check_probability(mass, "mass")
    if side == "upper":
        # upper set of mass m is the complement of a lower set of mass 1 - m,
        # with the atom split reversed: (1 - q) = 1 - p'
        t, p = mass_quantile(lfd, 1.0 - mass, "lower", i)
        return t, p
    if side != "lower":
        raise ValueError("side must be 'lower' or 'upper'")
    lo_val, hi_val = _support_bounds(lfd, i)

    def below(t):  # Q_i(l* < t)
        return lfd_event_prob(lfd, i, "<", t)

    if mass <= 0.0:
        return lo_val, 0.0
    if mass >= 1.0:
        t = hi_val
        m_lt, m_eq = below(t), lfd_event_prob(lfd, i, "=", t)
        return t, (1.0 if m_eq <= 0 else _clip01((mass - m_lt) / m_eq))
    for a in lfd.atoms():
        m_lt, m_eq = below(a), lfd_event_prob(lfd, i, "=", a)
        if m_lt <= mass <= m_lt + m_eq and m_eq > 0:
            return a, _clip01((mass - m_lt) / m_eq)
    # continuous stretch: bisection in log t on Q_i(l* < t)
    lo, hi = lo_val, hi_val
    for _ in range(200):
        mid = math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if below(mid) < mass:
            lo = mid
        else:
            hi = mid
    t = hi if abs(below(hi) - mass) <= abs(below(lo) - mass) else lo
    return t, 0.0


def _support_bounds(lfd, i, tol=1e-15):
    """Finite interval carrying all but ``tol`` of the l* mass under Q_i."""
    lo, hi = lfd.lower, lfd.upper
    if lo <= 0.0:
        lo = 1.0
        while lfd_event_prob(lfd, i, "<", lo) > tol:
            lo *= 0.5
            if lo < 1e-300:
                break
    if math.isinf(hi):
        hi = max(1.0, lo * 2.0)
        while lfd_event_prob(lfd, i, ">", hi) > tol:
            hi *= 2.0
            if hi > 1e300:
                break
    return lo, hi


def support_bounds(lfd: LFDPair, tol: float = 1e-15):
    """Finite threshold range ``[lo, hi]`` covering l* under both LFDs up to ``tol``."""
    lo0, hi0 = _support_bounds(lfd, 0, tol)
    lo1, hi1 = _support_bounds(lfd, 1, tol)
    return min(lo0, lo1), max(hi0, hi1)
