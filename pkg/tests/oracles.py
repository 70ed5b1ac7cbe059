"""Independent reference computations used by the tests.

Nothing here calls into robust_tandem: closed forms for the exponential pair,
exact rational arithmetic for small discrete chains, and plain path
enumeration.
"""

import itertools
import math
from fractions import Fraction


# --- exponential means (1, m1) ------------------------------------------------------------
# L(y) = (1/m1) exp(y (1 - 1/m1)); for m1 = 2: L = exp(y/2)/2, y = 2 log(2 s) at L = s.


def exp12_breakpoints(eps0, eps1):
    """Closed-form c', c'' for Exp(1) vs Exp(2).

    Normalisation of q0: (1-eps0)(1 + 1/(4 c''^2)) = 1.
    Normalisation of q1: (1-eps1)(c' + 1/(4 c')) = 1.
    """
    c_hi = math.inf if eps0 == 0 else 0.5 / math.sqrt(1.0 / (1.0 - eps0) - 1.0)
    if eps1 == 0:
        c_lo = 0.5  # lower end of the LR range
    else:
        s = 1.0 / (1.0 - eps1)
        c_lo = (s + math.sqrt(s * s - 1.0)) / 2.0  # root above the LR floor 1/2
    return c_lo, c_hi


def _p0_L_ge(s):  # P0(L >= s), s >= 1/2
    return 1.0 if s <= 0.5 else 1.0 / (4.0 * s * s)


def _p1_L_ge(s):  # P1(L >= s)
    return 1.0 if s <= 0.5 else 1.0 / (2.0 * s)


def _same(t, atom):
    return math.isfinite(atom) and abs(t - atom) <= 1e-12 * atom


class Exp12LFD:
    """Exact Q0, Q1 laws of l* for Exp(1) vs Exp(2)."""

    def __init__(self, eps0, eps1):
        self.e0, self.e1 = eps0, eps1
        self.c_lo, self.c_hi = exp12_breakpoints(eps0, eps1)
        self.b = (1.0 - eps1) / (1.0 - eps0)

    # atoms
    def atom(self, i, where):
        c_lo, c_hi = self.c_lo, self.c_hi
        if where == "lo":
            if self.e1 == 0:
                return 0.0
            p0_below = 1.0 - _p0_L_ge(c_lo)
            return (1 - self.e0) * p0_below if i == 0 else (1 - self.e1) * c_lo * p0_below
        if self.e0 == 0:
            return 0.0
        return (1 - self.e0) * _p1_L_ge(c_hi) / c_hi if i == 0 else (1 - self.e1) * _p1_L_ge(c_hi)

    def ge(self, i, t):
        """Q_i(l* >= t)."""
        lo, hi = self.b * self.c_lo, self.b * self.c_hi
        if t <= lo or _same(t, lo):
            return 1.0
        if _same(t, hi):
            return self.atom(i, "hi")
        if t > hi:
            return 0.0
        u = t / self.b
        if i == 0:
            return (1 - self.e0) * (_p0_L_ge(u) - _p0_L_ge(self.c_hi) + _p1_L_ge(self.c_hi) / self.c_hi) \
                if math.isfinite(self.c_hi) else (1 - self.e0) * _p0_L_ge(u)
        return (1 - self.e1) * _p1_L_ge(u)

    def gt(self, i, t):
        """Q_i(l* > t); continuous apart from the two atoms."""
        v = self.ge(i, t)
        if _same(t, self.b * self.c_lo):
            v -= self.atom(i, "lo")
        if _same(t, self.b * self.c_hi):
            v -= self.atom(i, "hi")
        return v

    def relay_kernel(self, i, t1, t0, p, q):
        """(a, keep1): Q_i(phi(Y,0)=1), Q_i(phi(Y,1)=1)."""
        eq1 = self.ge(i, t1) - self.gt(i, t1)
        eq0 = self.ge(i, t0) - self.gt(i, t0)
        to_one = self.gt(i, t0) + (1 - q) * eq0
        keep_one = self.gt(i, t1) + (1 - p) * eq1
        return to_one, keep_one

    def trajectory(self, first_t, t1, t0, p, q, N, pi0=0.5):
        pf, pd = self.ge(0, first_t), self.ge(1, first_t)
        a0, k0 = self.relay_kernel(0, t1, t0, p, q)
        a1, k1 = self.relay_kernel(1, t1, t0, p, q)
        out = [pi0 * pf + (1 - pi0) * (1 - pd)]
        for _ in range(2, N + 1):
            pf = pf * k0 + (1 - pf) * a0
            pd = pd * k1 + (1 - pd) * a1
            out.append(pi0 * pf + (1 - pi0) * (1 - pd))
        return out


# --- discrete chains ---------------------------------------------------------------------------


def huber_discrete(pmf0, pmf1, eps0, eps1, c_lo, c_hi):
    """LFD pmfs for a finite alphabet given breakpoints."""
    q0, q1 = [], []
    for a, c in zip(pmf0, pmf1):
        L = c / a
        q0.append((1 - eps0) * (a if L < c_hi else c / c_hi))
        q1.append((1 - eps1) * (c if L > c_lo else c_lo * a))
    return q0, q1


def enumerate_chain(q0, q1, first, relays):
    """Stage (P_F, P_M) by summing over every observation path.

    ``first(x) -> {0,1}``; each relay is ``f(x, u) -> list[(v, prob)]``.
    Cost is |alphabet|^N, so keep N small.
    """
    n = len(q0)
    N = len(relays) + 1
    out = []
    for stage in range(1, N + 1):
        res = []
        for q in (q0, q1):
            ones = 0.0
            for path in itertools.product(range(n), repeat=stage):
                w = math.prod(q[x] for x in path)
                dist = {first(path[0]): 1.0}
                for x, rel in zip(path[1:], relays[: stage - 1]):
                    nxt = {}
                    for u, pu in dist.items():
                        for v, pv in rel(x, u):
                            nxt[v] = nxt.get(v, 0.0) + pu * pv
                    dist = nxt
                ones += w * dist.get(1, 0.0)
            res.append(ones)
        out.append((res[0], 1.0 - res[1]))
    return out


def exact_social_discrete(pmf0, pmf1, N, pi0=Fraction(1, 2)):
    """Social-learning trajectory for eps = 0 in rational arithmetic.

    Ties: at l = t1 keep u, at l = t0 decide 1.
    """
    p0 = [Fraction(x).limit_denominator(10**9) for x in pmf0]
    p1 = [Fraction(x).limit_denominator(10**9) for x in pmf1]
    L = [b / a for a, b in zip(p0, p1)]
    pi1 = 1 - pi0
    r = pi0 / pi1
    pf = sum(a for a, l in zip(p0, L) if l >= r)
    pm = sum(b for b, l in zip(p1, L) if l < r)
    out = [pi0 * pf + pi1 * pm]
    for _ in range(2, N + 1):
        t1 = pi0 * pf / (pi1 * (1 - pm))
        t0 = pi0 * (1 - pf) / (pi1 * pm)
        # u=1 -> 0 iff l < t1 ; u=0 -> 1 iff l >= t0
        keep1 = [l >= t1 for l in L]
        to1 = [l >= t0 for l in L]
        pf = pf * sum(a for a, k in zip(p0, keep1) if k) + (1 - pf) * sum(a for a, k in zip(p0, to1) if k)
        d = pm * sum(b for b, k in zip(p1, to1) if not k) + (1 - pm) * sum(b for b, k in zip(p1, keep1) if not k)
        pm = d
        out.append(pi0 * pf + pi1 * pm)
    return out
