"""scikit-learn style wrappers around the functional core.

Both estimators are *designed* rather than trained: ``fit`` solves the
least-favorable pair and the relay rules from the configured uncertainty
classes. ``X`` and ``y`` are accepted for pipeline compatibility and only
used to check shapes.
"""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_observation_matrix, check_random_state
from .engine import ChainConfig, ConstantEps, phi_delta_scheme, propagate, social_trajectory
from .lfd import UncertaintySpec, clip_lr_values, solve_breakpoints
from .models import DiscretePMF, NominalPair
from .optimize import optimize_asymptotic_dd, optimize_finite_dd, optimize_unknown_sl
from .rules import Priors, RelayRule, first_agent_rule


def _lr_matrix(model: NominalPair, X):
    if isinstance(model, DiscretePMF):
        return np.asarray(model.lr_values(np.asarray(X, dtype=object)), dtype=float)
    return model.lr_values(np.asarray(X, dtype=float))


class LFDTransformer(TransformerMixin, BaseEstimator):
    """Map raw observations to the clipped likelihood ratio l*."""

    def __init__(self, model=None, eps0=0.0, eps1=0.0):
        self.model = model
        self.eps0 = eps0
        self.eps1 = eps1

    def fit(self, X=None, y=None):
        if not isinstance(self.model, NominalPair):
            raise TypeError("model must be a NominalPair instance")
        self.lfd_ = solve_breakpoints(UncertaintySpec(self.model, self.eps0, self.eps1))
        if X is not None:
            X = self._check(X)
            self.n_features_in_ = X.shape[1]
        return self

    def _check(self, X):
        numeric = not isinstance(self.model, DiscretePMF)
        X = np.asarray(X, dtype=float if numeric else object)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        return check_observation_matrix(X, X.shape[1], numeric=numeric)

    def transform(self, X):
        check_is_fitted(self, "lfd_")
        X = self._check(X)
        return clip_lr_values(self.lfd_, _lr_matrix(self.model, X))


class RobustTandemClassifier(ClassifierMixin, BaseEstimator):
    """Tandem chain of N agents; ``predict`` returns the last agent's decision.

    ``rule`` selects how relays are designed:

    - ``"social"``: myopic minimax rule per agent
    - ``"finite-dd"``: thresholds optimised for agent N
    - ``"asymptotic-dd"`` / ``"unknown-sl"``: one shared optimised relay
    - ``"phi-delta"``: the OR-then-relay scheme with level ``delta``
    - a :class:`RelayRule`: shared explicit relay after the minimax agent 1
    """

    def __init__(self, model=None, eps0=0.0, eps1=0.0, n_agents=2, pi0=0.5, rule="social",
                 delta=0.05, random_state=None):
        self.model = model
        self.eps0 = eps0
        self.eps1 = eps1
        self.n_agents = n_agents
        self.pi0 = pi0
        self.rule = rule
        self.delta = delta
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if not isinstance(self.model, NominalPair):
            raise TypeError("model must be a NominalPair instance")
        N = int(self.n_agents)
        priors = Priors(self.pi0)
        config = ChainConfig(self.model, N, priors, ConstantEps(self.eps0, self.eps1))
        lfd = config.lfd(1)
        first = first_agent_rule(priors)
        rule = self.rule
        if isinstance(rule, RelayRule):
            relays = [rule] * (N - 1)
        elif rule == "social":
            _, relays = social_trajectory(config)
        elif rule == "finite-dd":
            report = optimize_finite_dd(config, seed=self.random_state or 0)
            first, relays = report.best_rule.first, list(report.best_rule.relays)
        elif rule == "asymptotic-dd":
            relays = [optimize_asymptotic_dd(lfd, priors).best_rule] * (N - 1)
        elif rule == "unknown-sl":
            relays = [optimize_unknown_sl(lfd, priors).best_rule] * (N - 1)
        elif rule == "phi-delta":
            scheme = phi_delta_scheme(config.spec(1), self.delta, priors)
            first, relays = scheme.rules(N)
        else:
            raise ValueError(f"unknown rule {rule!r}")
        self.lfd_ = lfd
        self.priors_ = priors
        self.first_rule_ = first
        self.relays_ = list(relays)
        self.stage_errors_ = propagate(first, self.relays_, lfd, priors, N=N)
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = N
        if X is not None:
            self._check(X)
        return self

    def _check(self, X):
        numeric = not isinstance(self.model, DiscretePMF)
        return check_observation_matrix(
            np.asarray(X, dtype=float if numeric else object), self.n_features_in_, numeric=numeric
        )

    def decision_path(self, X):
        """Decisions ``U_1..U_N`` for each row of per-agent observations."""
        check_is_fitted(self, "relays_")
        X = self._check(X)
        ls = clip_lr_values(self.lfd_, _lr_matrix(self.model, X))
        rng = check_random_state(self.random_state)
        out = np.empty(ls.shape, dtype=np.int8)
        out[:, 0] = self.first_rule_.decide(ls[:, 0])
        for k, relay in enumerate(self.relays_, start=1):
            out[:, k] = relay.decide(ls[:, k], out[:, k - 1], rng)
        return out

    def predict(self, X):
        return self.decision_path(X)[:, -1].astype(int)

    def minimax_error(self):
        """Exact agent-N error under the least-favorable pair."""
        check_is_fitted(self, "stage_errors_")
        return self.stage_errors_[-1].P_e
