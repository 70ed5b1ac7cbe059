"""Nominal observation models and their likelihood-ratio tails.

Every model exposes the nominal likelihood ratio ``L(y) = p1(y) / p0(y)``
together with closed-form tails ``P_i(L > t)`` and atoms ``P_i(L = t)``.
Downstream code only ever needs ``Y`` through ``L(Y)``, so these tails are
all the LFD solver uses.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._validation import check_hypothesis, check_positive, check_random_state
from .exceptions import DomainError

# relative tolerance used to decide that a discrete LR value sits on an atom
ATOM_RTOL = 1e-12

_SQRT2 = math.sqrt(2.0)


def _norm_sf(z):
    return 0.5 * math.erfc(z / _SQRT2)


class NominalPair(ABC):
    """A pair of nominal distributions (P0*, P1*), mutually absolutely continuous."""

    kind: str

    @property
    @abstractmethod
    def llr_unbounded_above(self) -> bool: ...

    @property
    @abstractmethod
    def llr_unbounded_below(self) -> bool: ...

    @property
    @abstractmethod
    def lr_range(self):
        """(essential infimum, essential supremum) of L under either nominal."""

    @abstractmethod
    def pdf(self, i, y) -> float:
        """Density (or pmf) of ``P_i*`` at ``y``."""

    @abstractmethod
    def lr_value(self, y) -> float: ...

    @abstractmethod
    def lr_values(self, y) -> np.ndarray: ...

    @abstractmethod
    def lr_tail(self, i, t):
        """Return ``(P_i(L > t), P_i(L = t))``."""

    @abstractmethod
    def sample(self, i, rng, size=None): ...

    @abstractmethod
    def to_dict(self) -> dict: ...

    def lr_atoms(self):
        """Sorted LR values carrying positive nominal mass (empty if L is continuous)."""
        return ()

    def sample_lr(self, i, rng, size=None):
        """Draw ``L(Y)`` with ``Y ~ P_i*``."""
        return self.lr_values(self.sample(i, rng, size))

    def _check_flags(self, above, below):
        if above is not None and bool(above) != self.llr_unbounded_above:
            raise ValueError(
                f"llr_unbounded_above={above} is inconsistent with {self!r}"
            )
        if below is not None and bool(below) != self.llr_unbounded_below:
            raise ValueError(
                f"llr_unbounded_below={below} is inconsistent with {self!r}"
            )


@dataclass(frozen=True)
class ExponentialMeans(NominalPair):
    """Exponential nominals with means ``m0`` (under H0) and ``m1`` (under H1)."""

    m0: float
    m1: float
    kind: str = field(default="exponential_means", init=False, repr=False)

    def __post_init__(self):
        check_positive(self.m0, "m0")
        check_positive(self.m1, "m1")
        if self.m0 == self.m1:
            raise ValueError("ExponentialMeans requires m0 != m1")

    @property
    def _rate(self):
        # L(y) = (m0/m1) * exp(rate * y)
        return 1.0 / self.m0 - 1.0 / self.m1

    @property
    def _scale(self):
        return self.m0 / self.m1

    @property
    def llr_unbounded_above(self):
        return self.m1 > self.m0

    @property
    def llr_unbounded_below(self):
        return self.m1 < self.m0

    @property
    def lr_range(self):
        if self._rate > 0:
            return (self._scale, math.inf)
        return (0.0, self._scale)

    def _mean(self, i):
        return self.m1 if i else self.m0

    def pdf(self, i, y):
        i = check_hypothesis(i)
        y = float(y)
        if not y >= 0.0:
            raise DomainError(f"exponential observation must be >= 0, got {y!r}")
        m = self._mean(i)
        return math.exp(-y / m) / m

    def lr_value(self, y):
        y = float(y)
        if not y >= 0.0:
            raise DomainError(f"exponential observation must be >= 0, got {y!r}")
        try:
            return self._scale * math.exp(self._rate * y)
        except OverflowError:
            return math.inf

    def lr_values(self, y):
        y = np.asarray(y, dtype=float)
        if np.any(~(y >= 0.0)):
            raise DomainError("exponential observations must be >= 0")
        with np.errstate(over="ignore"):
            return self._scale * np.exp(self._rate * y)

    def lr_tail(self, i, t):
        i = check_hypothesis(i)
        t = float(t)
        if t < 0:
            raise ValueError(f"threshold must be >= 0, got {t!r}")
        rho, rate, mean = self._scale, self._rate, self._mean(i)
        if rate > 0:
            # L increasing in y: {L > t} = {Y > log(t/rho)/rate}
            if t < rho:
                return 1.0, 0.0
            if math.isinf(t):
                return 0.0, 0.0
            return (t / rho) ** (-1.0 / (rate * mean)), 0.0
        # L decreasing in y
        if t >= rho:
            return 0.0, 0.0
        if t == 0.0:
            return 1.0, 0.0
        return -math.expm1(math.log(t / rho) * (-1.0 / (rate * mean))), 0.0

    def sample(self, i, rng, size=None):
        i = check_hypothesis(i)
        return check_random_state(rng).exponential(self._mean(i), size)

    def to_dict(self):
        return {"kind": self.kind, "m0": self.m0, "m1": self.m1}


@dataclass(frozen=True)
class GaussianShift(NominalPair):
    """Gaussian nominals N(mu0, sigma^2) vs N(mu1, sigma^2)."""

    mu0: float
    mu1: float
    sigma: float = 1.0
    kind: str = field(default="gaussian_shift", init=False, repr=False)

    def __post_init__(self):
        check_positive(self.sigma, "sigma")
        if self.mu0 == self.mu1:
            raise ValueError("GaussianShift requires mu0 != mu1")

    @property
    def _slope(self):
        return (self.mu1 - self.mu0) / self.sigma**2

    @property
    def _mid(self):
        return 0.5 * (self.mu0 + self.mu1)

    @property
    def llr_unbounded_above(self):
        return True

    @property
    def llr_unbounded_below(self):
        return True

    @property
    def lr_range(self):
        return (0.0, math.inf)

    def pdf(self, i, y):
        i = check_hypothesis(i)
        z = (float(y) - (self.mu1 if i else self.mu0)) / self.sigma
        return math.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2.0 * math.pi))

    def lr_value(self, y):
        y = float(y)
        if not math.isfinite(y):
            raise DomainError(f"gaussian observation must be finite, got {y!r}")
        try:
            return math.exp(self._slope * (y - self._mid))
        except OverflowError:
            return math.inf

    def lr_values(self, y):
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise DomainError("gaussian observations must be finite")
        with np.errstate(over="ignore"):
            return np.exp(self._slope * (y - self._mid))

    def lr_tail(self, i, t):
        i = check_hypothesis(i)
        t = float(t)
        if t < 0:
            raise ValueError(f"threshold must be >= 0, got {t!r}")
        if t == 0.0:
            return 1.0, 0.0
        if math.isinf(t):
            return 0.0, 0.0
        mu = self.mu1 if i else self.mu0
        y_t = self._mid + math.log(t) / self._slope
        z = (y_t - mu) / self.sigma
        return (_norm_sf(z) if self._slope > 0 else _norm_sf(-z)), 0.0

    def sample(self, i, rng, size=None):
        i = check_hypothesis(i)
        mu = self.mu1 if i else self.mu0
        return check_random_state(rng).normal(mu, self.sigma, size)

    def to_dict(self):
        return {"kind": self.kind, "mu0": self.mu0, "mu1": self.mu1, "sigma": self.sigma}


@dataclass(frozen=True)
class DiscretePMF(NominalPair):
    """Finite support with strictly positive pmfs under both hypotheses."""

    support: tuple
    pmf0: tuple
    pmf1: tuple
    kind: str = field(default="discrete", init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "pmf0", tuple(float(p) for p in self.pmf0))
        object.__setattr__(self, "pmf1", tuple(float(p) for p in self.pmf1))
        n = len(self.support)
        if n < 2 or len(self.pmf0) != n or len(self.pmf1) != n:
            raise ValueError("support, pmf0 and pmf1 must have equal length >= 2")
        if len(set(self.support)) != n:
            raise ValueError("support labels must be distinct")
        for name, pmf in (("pmf0", self.pmf0), ("pmf1", self.pmf1)):
            if any(not p > 0.0 for p in pmf):
                raise ValueError(f"{name} must be strictly positive on the support")
            if abs(math.fsum(pmf) - 1.0) > 1e-12:
                raise ValueError(f"{name} must sum to 1 (got {math.fsum(pmf)!r})")
        if self.pmf0 == self.pmf1:
            raise ValueError("pmf0 and pmf1 must differ")

    @cached_property
    def _lr(self):
        return np.asarray(self.pmf1) / np.asarray(self.pmf0)

    @cached_property
    def _index(self):
        return {label: j for j, label in enumerate(self.support)}

    @property
    def llr_unbounded_above(self):
        return False

    @property
    def llr_unbounded_below(self):
        return False

    @property
    def lr_range(self):
        return (float(self._lr.min()), float(self._lr.max()))

    def lr_atoms(self):
        return tuple(sorted(set(float(v) for v in self._lr)))

    def _lookup(self, y):
        try:
            return self._index[y]
        except (KeyError, TypeError):
            raise DomainError(f"{y!r} is not in the support {self.support}") from None

    def pdf(self, i, y):
        i = check_hypothesis(i)
        return (self.pmf1 if i else self.pmf0)[self._lookup(y)]

    def lr_value(self, y):
        return float(self._lr[self._lookup(y)])

    def lr_values(self, y):
        y = np.asarray(y, dtype=object)
        idx = np.fromiter((self._lookup(v) for v in y.ravel()), dtype=np.intp, count=y.size)
        return self._lr[idx].reshape(y.shape)

    def lr_tail(self, i, t):
        i = check_hypothesis(i)
        t = float(t)
        if t < 0:
            raise ValueError(f"threshold must be >= 0, got {t!r}")
        pmf = self.pmf1 if i else self.pmf0
        tail = atom = 0.0
        for lr, p in zip(self._lr, pmf):
            if abs(lr - t) <= ATOM_RTOL * max(1.0, t):
                atom += p
            elif lr > t:
                tail += p
        return tail, atom

    def sample_index(self, i, rng, size=None):
        i = check_hypothesis(i)
        pmf = self.pmf1 if i else self.pmf0
        return check_random_state(rng).choice(len(pmf), size=size, p=pmf)

    def sample(self, i, rng, size=None):
        idx = self.sample_index(i, rng, size)
        if size is None:
            return self.support[int(idx)]
        labels = np.empty(len(self.support), dtype=object)
        labels[:] = self.support
        return labels[idx]

    def sample_lr(self, i, rng, size=None):
        idx = self.sample_index(i, rng, size)
        return self._lr[idx] if size is not None else float(self._lr[idx])

    def to_dict(self):
        return {
            "kind": self.kind,
            "support": list(self.support),
            "pmf0": list(self.pmf0),
            "pmf1": list(self.pmf1),
        }


_KINDS = {
    "exponential_means": (ExponentialMeans, ("m0", "m1")),
    "gaussian_shift": (GaussianShift, ("mu0", "mu1", "sigma")),
    "discrete": (DiscretePMF, ("support", "pmf0", "pmf1")),
}


def model_from_dict(spec):
    """Build a model from its JSON form, e.g. ``{"kind": "exponential_means", "m0": 1, "m1": 2}``."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError("model spec must be an object with a 'kind' field")
    kind = spec["kind"]
    if kind not in _KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {sorted(_KINDS)}")
    cls, fields = _KINDS[kind]
    allowed = set(fields) | {"kind", "llr_unbounded_above", "llr_unbounded_below"}
    extra = set(spec) - allowed
    if extra:
        raise ValueError(f"unexpected fields for {kind}: {sorted(extra)}")
    kwargs = {k: spec[k] for k in fields if k in spec}
    model = cls(**kwargs)
    model._check_flags(spec.get("llr_unbounded_above"), spec.get("llr_unbounded_below"))
    return model


def lr_value(model: NominalPair, y) -> float:
    """Nominal likelihood ratio ``p1*(y) / p0*(y)``."""
    return model.lr_value(y)


def nominal_lr_tail(model: NominalPair, i: int, t: float):
    """``(P_i*(L > t), P_i*(L = t))``."""
    return model.lr_tail(i, t)


def sample_nominal(model: NominalPair, i: int, rng, size=None):
    """i.i.d. draws from ``P_i*``; deterministic given the generator's seed."""
    return model.sample(i, rng, size)
