"""Estimator-style wrapper around the multi-level solver."""
from __future__ import annotations

import os

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from . import opt
from .graphc import push_forward
from .model import ProblemSpec, load_problem, problem_from_dict
from .sim import euler_solve


def check_problem(X):
    """Accept a ProblemSpec, a problem document or a path to one."""
    if isinstance(X, ProblemSpec):
        return X
    if isinstance(X, dict):
        return problem_from_dict(X["problem"] if "problem" in X else X)
    if isinstance(X, (str, os.PathLike)):
        return load_problem(X)
    raise TypeError(f"expected a ProblemSpec, document or path, got {type(X).__name__}")


def check_times(s, upper=1.0):
    """1-d float array of evaluation times inside [0, upper]."""
    s = check_array(np.atleast_1d(np.asarray(s, float)).reshape(-1, 1), ensure_all_finite=True).ravel()
    if np.any(s < 0) or np.any(s > upper):
        raise ValueError(f"times must lie in [0, {upper}]")
    return s


class ImpulsiveControlSolver(BaseEstimator):
    """Solve the discrete problems at N = 2**k for k in ``levels``.

    ``fit`` takes the problem in place of a data matrix; ``predict`` evaluates
    the Euler state of the finest level at reparametrized times and
    ``transform`` the original-time state.
    """

    def __init__(self, levels=(3, 4, 5, 6), max_iter=3000, grad_tol=1e-9, feas_tol=1e-6,
                 compute_gamma=True, gamma_restarts=2, seed=0):
        self.levels = levels
        self.max_iter = max_iter
        self.grad_tol = grad_tol
        self.feas_tol = feas_tol
        self.compute_gamma = compute_gamma
        self.gamma_restarts = gamma_restarts
        self.seed = seed

    def _options(self):
        return opt.SolverOptions(max_iter=self.max_iter, grad_tol=self.grad_tol,
                                 feas_tol=self.feas_tol, compute_gamma=self.compute_gamma,
                                 gamma_restarts=self.gamma_restarts, seed=self.seed)

    def fit(self, X, y=None):
        spec = check_problem(X)
        levels = [int(k) for k in self.levels]
        if len(levels) == 1:
            result = opt.solve_level(spec, 2**levels[0], options=self._options())
            self.study_ = None
            results = [result]
        else:
            self.study_ = opt.study(spec, levels, self._options())
            results = [r for r in self.study_.results if r is not None]
            if not results:
                raise RuntimeError(f"every level failed: {self.study_.failures}")
        self.spec_ = spec
        self.result_ = results[-1]
        self.N_ = self.result_.N
        self.eta_ = self.result_.point(spec)
        self.objective_ = self.result_.objective
        self.gamma_ = self.result_.gamma
        self.trajectory_ = euler_solve(spec, self.eta_, self.N_)
        return self

    def predict(self, s):
        check_is_fitted(self, "result_")
        return self.trajectory_(check_times(s))

    def transform(self, t):
        check_is_fitted(self, "result_")
        t = check_times(t, self.spec_.horizon)
        return push_forward(self.trajectory_, self.eta_.impulse, t_grid=t).x

    def score(self, X=None, y=None):
        check_is_fitted(self, "result_")
        return -self.objective_
