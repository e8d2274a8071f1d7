"""Scikit-learn style front end for the online synthesis loop.

The estimator treats a stream of quadratic cost pairs as incremental
training data: each ``partial_fit`` consumes one revealed ``(Q_t, R_t)``
pair and advances the internal loop, and ``predict`` maps plant states to
control actions under the currently committed gain.  All solver state
lives in ``state_`` after the first call, so the object follows the usual
fitted-attribute convention and plays well with ``get_params`` /
``set_params`` based tooling.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .online import OnlineConfig, init, step
from .riccati import h2_bootstrap_gain
from .validation import as_matrix


class OnlineGainSynthesizer(BaseEstimator):
    """Online state-feedback synthesis with a worst-case gain guarantee.

    Parameters mirror the loop configuration: ``mu``/``sigma`` bound the
    admissible cost stream, ``gamma`` is the disturbance attenuation budget
    the committed gains must respect, and ``K_init`` seeds the loop (when
    omitted a stabilizing seed is computed from the system's nominal cost
    weights).  ``system`` must be an :class:`~safegain.sysmodel.LtiSystem`.
    """

    def __init__(
        self,
        system=None,
        gamma=10.0,
        mu=1.0,
        sigma=10.0,
        K_init=None,
        m=1.0,
        nu_init=0.0,
        monitor_stride=1,
    ):
        self.system = system
        self.gamma = gamma
        self.mu = mu
        self.sigma = sigma
        self.K_init = K_init
        self.m = m
        self.nu_init = nu_init
        self.monitor_stride = monitor_stride

    def _config(self):
        return OnlineConfig(
            mu=self.mu,
            sigma=self.sigma,
            m=self.m,
            nu_init=self.nu_init,
            monitor_stride=self.monitor_stride,
        )

    def _seed_gain(self):
        if self.K_init is not None:
            return as_matrix(self.K_init, "K_init")
        return h2_bootstrap_gain(
            self.system.A, self.system.B, self.system.Q, self.system.R
        )

    def partial_fit(self, Q_t, R_t):
        """Consume one revealed cost pair and advance the loop by one step."""
        if self.system is None:
            raise ValueError("system must be provided before fitting")
        if not hasattr(self, "state_"):
            self.state_ = init(
                self.system, Q_t, R_t, self.gamma, self._seed_gain(), self._config()
            )
            self.n_features_in_ = self.system.n_states
        else:
            self.state_ = step(self.state_, Q_t, R_t)
        return self

    def fit(self, X, y=None):
        """Run the loop over an iterable of ``(Q_t, R_t)`` pairs."""
        for Q_t, R_t in X:
            self.partial_fit(Q_t, R_t)
        return self

    @property
    def gain_(self):
        """Gain committed for the next control interval."""
        self._require_fitted()
        return self.state_.K

    @property
    def value_matrix_(self):
        self._require_fitted()
        return self.state_.P

    def _require_fitted(self):
        if not hasattr(self, "state_"):
            raise NotFittedError(
                "this OnlineGainSynthesizer instance is not fitted yet"
            )

    def predict(self, X):
        """Control actions ``u = -K x`` for each state row of ``X``."""
        self._require_fitted()
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return -X @ self.state_.K.T
