"""Graph completion of a measure and the time change between [0, T] and [0, 1].

The completion (theta, phi) is stored as explicit breakpoint lists.  theta is
the monotone pseudo-inverse of

    pi(t) = (t + |mu|([0, t])) / (T + ||mu||),

constant on each atom interval I_i = [pi(t_i-), pi(t_i)]; phi follows the
distribution function off the atom intervals and the rescaled atom profile on
them.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .measure import (
    PiecewiseLinearMeasure,
    StepLinear,
    _check_time,
    total_variation,
)


class ConsistencyError(ValueError):
    """A trajectory was produced by a different impulse than the one supplied."""


@dataclass(frozen=True)
class AtomInterval:
    start: float
    end: float
    index: int
    time: float


class GraphCompletion:
    """Piecewise-linear (theta, phi): [0, 1] -> [0, T] x K."""

    def __init__(self, s, theta, phi, horizon, atom_intervals=()):
        self.s = np.asarray(s, float)
        self.theta = np.asarray(theta, float)
        self.phi = np.asarray(phi, float).reshape(self.s.size, -1)
        self.horizon = float(horizon)
        self.atom_intervals = tuple(atom_intervals)
        if self.s[0] != 0.0 or self.s[-1] != 1.0 or np.any(np.diff(self.s) <= 0):
            raise ValueError("completion nodes must increase strictly from 0 to 1")

    @property
    def q(self):
        return self.phi.shape[1]

    def theta_at(self, s):
        return np.interp(s, self.s, self.theta)

    def phi_at(self, s):
        s = np.asarray(s, float)
        cols = [np.interp(s, self.s, self.phi[:, j]) for j in range(self.q)]
        return np.stack(cols, axis=-1)

    def variation_at(self, s):
        """Variation accumulated along the completion (coordinate sum of phi)."""
        return np.sum(self.phi_at(s), axis=-1)

    def theta_slopes(self):
        return np.diff(self.theta) / np.diff(self.s)

    def phi_slopes(self):
        return np.diff(self.phi, axis=0) / np.diff(self.s)[:, None]

    @property
    def lip_theta(self):
        return float(np.max(self.theta_slopes()))

    @property
    def lip_phi(self):
        return float(np.max(np.linalg.norm(self.phi_slopes(), axis=1)))

    def s_of_t(self, t, left=False):
        """Largest s with theta(s) <= t, or smallest s with theta(s) >= t."""
        th, s = self.theta, self.s
        t = float(t)
        if left:
            i = int(np.searchsorted(th, t, side="left"))
            if i == 0:
                return 0.0
            a, b = i - 1, min(i, th.size - 1)
        else:
            i = int(np.searchsorted(th, t, side="right")) - 1
            if i >= th.size - 1:
                return 1.0
            a, b = i, i + 1
        if th[b] == th[a]:
            return float(s[b] if left else s[a])
        return float(s[a] + (t - th[a]) / (th[b] - th[a]) * (s[b] - s[a]))

    def distribution(self):
        """F(t) = phi(largest s with theta(s) <= t) as a StepLinear map."""
        return StepLinear(self.theta, self.phi)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "theta"] + [f"phi_{j + 1}" for j in range(self.q)])
            for s, th, ph in zip(self.s, self.theta, self.phi):
                w.writerow([_fmt(s), _fmt(th)] + [_fmt(v) for v in ph])


def _fmt(x):
    return format(float(x), ".17g")


def pi_map(mu, t, left_limit=False):
    """pi(t), or pi(t-) with ``left_limit`` (pi(0-) = 0)."""
    _check_time(mu, t)
    if left_limit and t == 0.0:
        return 0.0
    F = mu.distribution()
    V = float(np.sum(F(t, left=left_limit)))
    return (t + V) / (mu.horizon + total_variation(mu))


def build(mu):
    """Graph completion of ``mu``.

    For a P_N member the completion is the uniform-node interpolant of its
    knots and values; otherwise it is built from pi and the atom profiles.
    """
    cached = getattr(mu, "_completion", None)
    if cached is not None:
        return cached
    if isinstance(mu, PiecewiseLinearMeasure):
        gc = _build_uniform(mu)
    else:
        gc = _build_canonical(mu)
    mu._completion = gc
    return gc


def _build_uniform(mu):
    N = mu.N
    s = np.linspace(0.0, 1.0, N + 1)
    intervals = []
    k = 0
    while k < N:
        j = k
        while j < N and mu.knots[j + 1] == mu.knots[k]:
            j += 1
        if j > k and np.any(mu.values[j] > mu.values[k]):
            intervals.append(AtomInterval(s[k], s[j], len(intervals), float(mu.knots[k])))
        k = j + 1 if j > k else k + 1
    return GraphCompletion(s, mu.knots, mu.values, mu.horizon, intervals)


def _build_canonical(mu):
    T = mu.horizon
    F = mu.distribution()
    denom = T + total_variation(mu)
    events = np.union1d(mu.ac_knots, [a.time for a in mu.atoms])
    s_nodes, th_nodes, ph_nodes, intervals = [], [], [], []

    def add(s, t, f):
        if s_nodes and s <= s_nodes[-1]:
            return
        s_nodes.append(s)
        th_nodes.append(t)
        ph_nodes.append(f)

    for t in events:
        atom = mu.atom_at(t)
        if atom is not None:
            f_minus = F(t, left=True) if t > 0 else np.zeros(mu.q)
            s_minus = (t + np.sum(f_minus)) / denom
            width = atom.variation / denom
            add(s_minus, t, f_minus)
            cum = atom.profile.cumulative()
            for beta, c in zip(atom.profile.breakpoints[1:-1], cum[1:-1]):
                add(s_minus + beta * width, t, f_minus + c)
            f_plus = f_minus + atom.value
            s_plus = (t + np.sum(f_plus)) / denom
            add(s_plus, t, f_plus)
            intervals.append(AtomInterval(s_minus, s_plus, len(intervals), float(t)))
        else:
            f = F(t)
            add((t + np.sum(f)) / denom, t, f)
    s_nodes[0] = 0.0
    s_nodes[-1] = 1.0
    th_nodes[-1] = T
    return GraphCompletion(s_nodes, th_nodes, ph_nodes, T, intervals)


# ---------------------------------------------------------------------------
# original-time view of a reparametrized trajectory


@dataclass
class AtomArc:
    time: float
    sigma: np.ndarray
    values: np.ndarray

    @property
    def jump(self):
        return self.values[-1] - self.values[0]


@dataclass
class OriginalTimeSolution:
    t: np.ndarray
    x: np.ndarray
    arcs: list
    x_left: dict

    def jump_at(self, t):
        for arc in self.arcs:
            if arc.time == t:
                return arc.jump
        return np.zeros(self.x.shape[1])


def _check_consistent(gc_y, gc_mu, tol=1e-9):
    if abs(gc_y.horizon - gc_mu.horizon) > tol:
        raise ConsistencyError("trajectory and measure have different horizons")
    grid = np.union1d(gc_y.s, gc_mu.s)
    dth = np.max(np.abs(gc_y.theta_at(grid) - gc_mu.theta_at(grid)))
    dph = np.max(np.abs(gc_y.phi_at(grid) - gc_mu.phi_at(grid))) if gc_y.q == gc_mu.q else np.inf
    if max(dth, dph) > tol * (1 + gc_mu.horizon):
        raise ConsistencyError("trajectory was not produced by the supplied measure")


def push_forward(y, mu, t_grid=None, arc_points=33):
    """Map a trajectory on [0, 1] back to original time: x(t) = y(pi(t)).

    Returns the samples of x on ``t_grid`` (plus every atom time) and, for
    each atom, the arc y restricted to I_i reparametrized over [0, 1].
    """
    gc = build(mu)
    eta = getattr(y, "eta", None)
    if eta is not None:
        _check_consistent(eta.completion, gc)
    if t_grid is None:
        t_grid = np.linspace(0.0, mu.horizon, 257)
    atoms = getattr(mu, "atoms", ())
    t = np.union1d(np.asarray(t_grid, float), [a.time for a in atoms])
    s = np.array([pi_map(mu, ti) for ti in t])
    x = y(s)
    arcs, x_left = [], {}
    sigma = np.linspace(0.0, 1.0, arc_points)
    for a in atoms:
        lo, hi = pi_map(mu, a.time, left_limit=True), pi_map(mu, a.time)
        arcs.append(AtomArc(a.time, sigma, y(lo + sigma * (hi - lo))))
        x_left[a.time] = y(np.array([lo]))[0]
    return OriginalTimeSolution(t, x, arcs, x_left)
