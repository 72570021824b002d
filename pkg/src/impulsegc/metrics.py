"""Metrics on the decision space R^n x L^m[0,1] x P.

d = d1 + d2 + d3 with d3 = d4 + d5, and dbar = d1 + d2 + d4 for the
optimality function.  Every integral of piecewise-linear or piecewise-constant
data is evaluated exactly over merged breakpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import cKDTree

from . import graphc
from .measure import DomainError


@dataclass(frozen=True)
class PiecewiseConstant:
    """u(s) = values[k] on [breakpoints[k], breakpoints[k+1]); last piece closed."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, float)
        vals = np.asarray(self.values, float).reshape(bp.size - 1, -1)
        if bp[0] != 0.0 or bp[-1] != 1.0 or np.any(np.diff(bp) <= 0):
            raise ValueError("control breakpoints must increase strictly from 0 to 1")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def uniform(cls, values):
        values = np.asarray(values, float)
        N = values.shape[0]
        return cls(np.linspace(0.0, 1.0, N + 1), values.reshape(N, -1))

    @classmethod
    def constant(cls, value):
        return cls(np.array([0.0, 1.0]), np.atleast_2d(np.asarray(value, float)))

    @property
    def m(self):
        return self.values.shape[1]

    def __call__(self, s):
        s = np.asarray(s, float)
        k = np.clip(np.searchsorted(self.breakpoints, s, side="right") - 1, 0, self.values.shape[0] - 1)
        return self.values[k]

    def to_dict(self):
        return {"breakpoints": self.breakpoints.tolist(), "values": self.values.tolist()}


@dataclass(frozen=True)
class DecisionPoint:
    """eta = (xi0, u, Omega): initial state, control on [0, 1], impulse measure."""

    xi0: np.ndarray
    control: PiecewiseConstant
    impulse: object

    def __post_init__(self):
        object.__setattr__(self, "xi0", np.atleast_1d(np.asarray(self.xi0, float)))

    @cached_property
    def completion(self):
        return graphc.build(self.impulse)

    @property
    def horizon(self):
        return self.impulse.horizon


def d1(a, b):
    a, b = np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float))
    if a.shape != b.shape:
        raise ValueError("state dimensions differ")
    return float(np.linalg.norm(a - b))


def d2(u1, u2):
    """Integral over [0, 1] of |u1 - u2|^2 (no square root)."""
    if u1.m != u2.m:
        raise ValueError("control dimensions differ")
    if u1.m == 0:
        return 0.0
    grid = np.union1d(u1.breakpoints, u2.breakpoints)
    mid = 0.5 * (grid[:-1] + grid[1:])
    diff = u1(mid) - u2(mid)
    return float(np.sum(np.diff(grid) * np.sum(diff * diff, axis=1)))


def _pair_map(q):
    """Linear map mu -> (mu, |mu|) on R^q for nonnegative measures."""
    return np.vstack([np.eye(q), np.ones((1, q))])


def _compatible(om1, om2):
    if abs(om1.horizon - om2.horizon) > 1e-12 * max(1.0, om1.horizon):
        raise ValueError("measures live on different horizons")
    if om1.q != om2.q:
        raise ValueError("measure dimensions differ")


def d4_terms(om1, om2, extended=True):
    """The three terms of d4: total-mass, distribution-function, completion sup."""
    _compatible(om1, om2)
    P = _pair_map(om1.q)
    F1, F2 = om1.distribution(), om2.distribution()
    mass = float(np.linalg.norm(P @ (F1.values[-1] - F2.values[-1])))
    integral = F1.integrate_abs_diff(F2, transform=P)
    g1, g2 = graphc.build(om1), graphc.build(om2)
    grid = np.union1d(g1.s, g2.s)
    diff = g1.phi_at(grid) - g2.phi_at(grid)
    if extended:
        diff = diff @ P.T
    sup = float(np.max(np.linalg.norm(diff, axis=1)))
    return mass, integral, sup


def d4(om1, om2, extended=True):
    """d4 on pairs (mu, |mu|); ``extended=False`` uses plain phi in the sup term."""
    return float(sum(d4_terms(om1, om2, extended)))


def d5(om1, om2):
    """Integral of |theta1' - theta2'| + |phi1' - phi2'| over [0, 1]."""
    _compatible(om1, om2)
    g1, g2 = graphc.build(om1), graphc.build(om2)
    grid = np.union1d(g1.s, g2.s)
    dth = np.diff(g1.theta_at(grid) - g2.theta_at(grid))
    dph = np.diff(g1.phi_at(grid) - g2.phi_at(grid), axis=0)
    # slopes are constant on merged cells, so |slope| * ds = |increment|
    return float(np.sum(np.abs(dth)) + np.sum(np.linalg.norm(dph, axis=1)))


def d3(om1, om2, extended=True):
    return d4(om1, om2, extended) + d5(om1, om2)


def metric_components(e1, e2, extended=True):
    return {
        "d1": d1(e1.xi0, e2.xi0),
        "d2": d2(e1.control, e2.control),
        "d4": d4(e1.impulse, e2.impulse, extended),
        "d5": d5(e1.impulse, e2.impulse),
    }


def combine(components, full=True):
    total = components["d1"] + components["d2"] + components["d4"]
    return total + components["d5"] if full else total


def d_full(e1, e2, extended=True):
    """d = d1 + d2 + d4 + d5."""
    return combine(metric_components(e1, e2, extended), full=True)


def dbar(e1, e2, extended=True):
    """dbar = d1 + d2 + d4."""
    c = metric_components(e1, e2, extended)
    c["d5"] = 0.0
    return combine(c, full=False)


def directed_hausdorff(A, B):
    """max over a in A of the distance from a to B."""
    dist, _ = cKDTree(B).query(A, k=1)
    return float(np.max(dist))


def hausdorff(A, B):
    """Hausdorff distance between two finite point sets (Euclidean ground metric)."""
    A = np.asarray(A, float)
    B = np.asarray(B, float)
    if A.size == 0 or B.size == 0:
        raise DomainError("Hausdorff distance needs nonempty sets")
    A = A.reshape(A.shape[0], -1)
    B = B.reshape(B.shape[0], -1)
    if A.shape[1] != B.shape[1]:
        raise ValueError("point dimensions differ")
    return max(directed_hausdorff(A, B), directed_hausdorff(B, A))
