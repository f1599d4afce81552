"""Scikit-learn estimator wrappers around the splitting solvers.

These follow the fit/predict contract (get_params/set_params via
BaseEstimator, input checks via sklearn validation helpers) so the solvers
compose with pipelines and model selection.  ``mu`` weighs the penalty
against the mean per-sample loss, matching the stochastic solvers' sampling
convention (the same convention sklearn's own linear models use).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array, check_X_y

from . import problems as pm
from . import solvers as sv


def _resolve_schedule(schedule):
    if schedule is None:
        return sv.StepSchedule.power(0.01, 0.5)
    if isinstance(schedule, sv.StepSchedule):
        return schedule
    raise ValueError("schedule must be a StepSchedule or None")


class _BaseSplittingEstimator(BaseEstimator):
    """Shared plumbing: config assembly, solver run, fitted attributes."""

    def __init__(self, mu=0.1, algorithm="sto_spb_scprsm", alpha=0.9, gamma=0.9,
                 beta=1.0, s_scale=1.0, schedule=None, max_iter=10000,
                 minibatch=1, seed=0, averaging=False):
        self.mu = mu
        self.algorithm = algorithm
        self.alpha = alpha
        self.gamma = gamma
        self.beta = beta
        self.s_scale = s_scale
        self.schedule = schedule
        self.max_iter = max_iter
        self.minibatch = minibatch
        self.seed = seed
        self.averaging = averaging

    def _config(self):
        S = sv.ProxMatrix.identity(self.s_scale) if self.s_scale else sv.ProxMatrix.zero()
        alg = self.algorithm
        common = dict(max_iters=self.max_iter, seed=self.seed, minibatch=self.minibatch)
        if alg == "sto_spb_scprsm":
            cfg = sv.sto_spb_scprsm_config(self.alpha, self.gamma,
                                           _resolve_schedule(self.schedule),
                                           beta=self.beta, S=S, **common)
        elif alg == "sto_admm":
            cfg = sv.sto_admm_config(_resolve_schedule(self.schedule),
                                     beta=self.beta, **common)
        elif alg == "spb_scprsm":
            cfg = sv.spb_scprsm_config(self.alpha, self.gamma, beta=self.beta,
                                       S=S, **common)
        elif alg == "admm":
            cfg = sv.admm_config(beta=self.beta, **common)
        else:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        violations = sv.validate_config(cfg)
        if violations:
            raise ValueError("invalid estimator parameters: " + "; ".join(violations))
        return cfg

    def _solve(self, problem):
        cfg = self._config()
        state, _ = sv.run(problem, cfg)
        coef = state.y_bar if (self.averaging and state.t_bar > 0) else state.y
        self.coef_ = np.asarray(coef, dtype=np.float64)
        self.x_iterate_ = state.x
        self.coef_ergodic_ = state.y_bar
        self.n_iter_ = state.k
        self.objective_ = pm.objective(problem, state.x, state.y)
        return self

    def _check_fitted(self):
        if not hasattr(self, "coef_"):
            raise NotFittedError(
                f"This {type(self).__name__} instance is not fitted yet.")


class SplittingLasso(_BaseSplittingEstimator, RegressorMixin):
    """l1-penalized least squares fit by a splitting solver.

    Minimizes mean squared-error/2 + mu * ||w||_1 via the x - y = 0
    splitting; ``coef_`` is the thresholded block (exactly sparse for the
    final iterate).
    """

    def fit(self, X, y):
        X, y = check_X_y(X, y, accept_sparse="csr", y_numeric=True)
        problem = pm.lasso_problem(X, y, self.mu)
        return self._solve(problem)

    def predict(self, X):
        self._check_fitted()
        X = check_array(X, accept_sparse="csr")
        return X @ self.coef_


class SplittingGroupLasso(_BaseSplittingEstimator, RegressorMixin):
    """Group-l2-penalized least squares fit by a splitting solver.

    ``groups`` is a list of index arrays partitioning the feature axis.
    """

    def __init__(self, groups=None, mu=0.1, algorithm="sto_spb_scprsm", alpha=0.9,
                 gamma=0.9, beta=1.0, s_scale=1.0, schedule=None, max_iter=10000,
                 minibatch=1, seed=0, averaging=False):
        super().__init__(mu=mu, algorithm=algorithm, alpha=alpha, gamma=gamma,
                         beta=beta, s_scale=s_scale, schedule=schedule,
                         max_iter=max_iter, minibatch=minibatch, seed=seed,
                         averaging=averaging)
        self.groups = groups

    def fit(self, X, y):
        X, y = check_X_y(X, y, accept_sparse="csr", y_numeric=True)
        if self.groups is None:
            raise ValueError("groups must be provided for the group lasso")
        problem = pm.group_lasso_problem(X, y, self.mu, self.groups)
        return self._solve(problem)

    def predict(self, X):
        self._check_fitted()
        X = check_array(X, accept_sparse="csr")
        return X @ self.coef_


class SplittingLogisticRegression(_BaseSplittingEstimator, ClassifierMixin):
    """l1-penalized logistic regression fit by a splitting solver.

    Labels may be any two classes; they are mapped onto -1/+1 internally.
    The intercept is a fixed constant (default 0), never updated.
    """

    def __init__(self, mu=1.0, intercept=0.0, algorithm="sto_spb_scprsm", alpha=0.9,
                 gamma=0.9, beta=1.0, s_scale=1.0, schedule=None, max_iter=10000,
                 minibatch=1, seed=0, averaging=False):
        super().__init__(mu=mu, algorithm=algorithm, alpha=alpha, gamma=gamma,
                         beta=beta, s_scale=s_scale, schedule=schedule,
                         max_iter=max_iter, minibatch=minibatch, seed=seed,
                         averaging=averaging)
        self.intercept = intercept

    def fit(self, X, y):
        X, y = check_X_y(X, y, accept_sparse="csr")
        self.classes_ = np.unique(y)
        if self.classes_.shape[0] != 2:
            raise ValueError(
                f"binary classifier needs exactly 2 classes, got {self.classes_.shape[0]}")
        signs = np.where(y == self.classes_[1], 1.0, -1.0)
        problem = pm.logistic_problem(X, signs, self.mu, intercept=self.intercept)
        return self._solve(problem)

    def decision_function(self, X):
        self._check_fitted()
        X = check_array(X, accept_sparse="csr")
        return X @ self.coef_ + self.intercept

    def predict(self, X):
        scores = self.decision_function(X)
        return np.where(scores >= 0.0, self.classes_[1], self.classes_[0])

    def predict_proba(self, X):
        from scipy.special import expit

        p1 = expit(self.decision_function(X))
        return np.column_stack([1.0 - p1, p1])
