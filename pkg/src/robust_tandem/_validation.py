"""Input validation helpers shared by the functional core and the estimators."""

import math
import numbers

import numpy as np
from sklearn.utils import check_array


def check_probability(value, name, *, open_left=False, open_right=False):
    """Return ``value`` as float after checking it lies in [0, 1] (or an open variant)."""
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    lo_ok = value > 0.0 if open_left else value >= 0.0
    hi_ok = value < 1.0 if open_right else value <= 1.0
    if not (lo_ok and hi_ok) or math.isnan(value):
        lb = "(" if open_left else "["
        rb = ")" if open_right else "]"
        raise ValueError(f"{name} must lie in {lb}0, 1{rb}, got {value!r}")
    return value


def check_positive(value, name, *, allow_inf=False):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if math.isnan(value) or value <= 0.0 or (math.isinf(value) and not allow_inf):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_hypothesis(i):
    if i not in (0, 1) or isinstance(i, bool):
        raise ValueError(f"hypothesis index must be 0 or 1, got {i!r}")
    return int(i)


def check_bit(u, name="bit"):
    if u not in (0, 1) or isinstance(u, bool):
        raise ValueError(f"{name} must be 0 or 1, got {u!r}")
    return int(u)


def check_random_state(seed):
    """Normalise ``seed`` to a :class:`numpy.random.Generator`."""
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise TypeError(f"cannot build a Generator from {seed!r}")


def check_observation_matrix(X, n_agents, *, numeric=True):
    """Validate a (n_samples, n_agents) block of per-agent observations."""
    X = check_array(X, dtype="numeric" if numeric else None, ensure_all_finite=numeric)
    if X.shape[1] != n_agents:
        raise ValueError(
            f"X has {X.shape[1]} columns but the chain has {n_agents} agents"
        )
    return X
