"""Integration of the reparametrized system

    y'(s) = f(y, u(s)) theta'(s) + g(y) phi'(s),   y(0) = xi0,   s in [0, 1],

by the Euler recursion on the uniform grid s_k = k/N (the discrete problems)
and by a breakpoint-aligned classical RK4 scheme (reference trajectories).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np


class DivergenceError(RuntimeError):
    """State left the divergence threshold during integration."""

    def __init__(self, step, value):
        self.step = step
        super().__init__(f"state diverged at step {step} (|y| = {value:.3g})")


class AccuracyError(RuntimeError):
    """Step halving did not reach the requested tolerance."""


def check_level(N):
    N = int(N)
    if N < 2 or N & (N - 1):
        raise ValueError(f"level N={N} must be a power of two >= 2")
    return N


@dataclass(frozen=True)
class Grid:
    N: int

    def __post_init__(self):
        check_level(self.N)

    @property
    def h(self):
        return 1.0 / self.N

    @property
    def nodes(self):
        return np.linspace(0.0, 1.0, self.N + 1)


@dataclass
class Trajectory:
    """Node values of y on [0, 1].

    Euler polylines interpolate linearly between nodes.  Reference
    trajectories keep one-sided slopes per step and interpolate with cubic
    Hermite polynomials; ``certificate`` holds the final step-halving
    difference.
    """

    s: np.ndarray
    y: np.ndarray
    kind: str
    eta: object = None
    certificate: float | None = None
    slopes: tuple | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.y.shape[1]

    def __call__(self, s):
        s = np.atleast_1d(np.asarray(s, float))
        if self.kind == "euler_polyline" or self.slopes is None:
            return np.stack([np.interp(s, self.s, self.y[:, j]) for j in range(self.n)], axis=-1)
        k = np.clip(np.searchsorted(self.s, s, side="right") - 1, 0, self.s.size - 2)
        h = self.s[k + 1] - self.s[k]
        w = ((s - self.s[k]) / h)[:, None]
        d0, d1 = self.slopes
        h00 = 2 * w**3 - 3 * w**2 + 1
        h10 = w**3 - 2 * w**2 + w
        h01 = -2 * w**3 + 3 * w**2
        h11 = w**3 - w**2
        return (h00 * self.y[k] + h10 * h[:, None] * d0[k]
                + h01 * self.y[k + 1] + h11 * h[:, None] * d1[k])

    def to_csv(self, path, header_comment=None):
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["s"] + [f"y_{j + 1}" for j in range(self.n)])
            for s, y in zip(self.s, self.y):
                w.writerow([_fmt(s)] + [_fmt(v) for v in y])


def _fmt(x):
    return format(float(x), ".17g")


def divergence_threshold(spec):
    return 1e6 * (1.0 + spec.state_bound)


# ---------------------------------------------------------------------------
# Euler


def euler_nodes(spec, xi0, u, dtheta, dphi):
    """Euler recursion on raw arrays.

    ``u`` has shape (N, m), ``dtheta`` (N,), ``dphi`` (N, q); returns the
    node values (N+1, n).
    """
    N = dtheta.size
    fam = spec.family
    y = np.empty((N + 1, spec.n))
    y[0] = xi0
    limit = divergence_threshold(spec)
    for k in range(N):
        yk = y[k]
        step = (fam.drift(yk) + fam.control_matrix(yk) @ u[k]) * dtheta[k] + fam.jump(yk) @ dphi[k]
        y[k + 1] = yk + step
        nrm = np.linalg.norm(y[k + 1])
        if not np.isfinite(nrm) or nrm > limit:
            raise DivergenceError(k + 1, nrm)
    return y


def sample_on_grid(eta, N):
    """(u_k, theta increments, phi increments) of eta on the uniform grid."""
    grid = Grid(N).nodes
    gc = eta.completion
    u = eta.control(grid[:-1])
    return u, np.diff(gc.theta_at(grid)), np.diff(gc.phi_at(grid), axis=0)


def euler_solve(spec, eta, N):
    """Euler polyline of the reparametrized system at level N."""
    u, dth, dph = sample_on_grid(eta, N)
    y = euler_nodes(spec, eta.xi0, u, dth, dph)
    return Trajectory(Grid(N).nodes, y, "euler_polyline", eta=eta, meta={"N": N})


def discrete_ranks(eta, N):
    """Lipschitz ranks (b, r) of the sampled theta_N, phi_N."""
    _, dth, dph = sample_on_grid(eta, N)
    return float(np.max(dth) * N), float(np.max(np.linalg.norm(dph, axis=1)) * N)


# ---------------------------------------------------------------------------
# reference RK4


def _mesh(eta, base_level, extra=None):
    gc = eta.completion
    pts = [gc.s, eta.control.breakpoints, np.linspace(0.0, 1.0, 2**base_level + 1)]
    if extra is not None:
        pts.append(np.asarray(extra, float))
    mesh = np.unique(np.clip(np.concatenate(pts), 0.0, 1.0))
    # drop near-duplicates created by rounding
    keep = np.concatenate([[True], np.diff(mesh) > 1e-15])
    mesh = mesh[keep]
    mesh[0], mesh[-1] = 0.0, 1.0
    return mesh


def _rk4_pass(spec, eta, mesh, substeps):
    gc = eta.completion
    mid = 0.5 * (mesh[:-1] + mesh[1:])
    th_rate = np.diff(gc.theta_at(mesh)) / np.diff(mesh)
    ph_rate = np.diff(gc.phi_at(mesh), axis=0) / np.diff(mesh)[:, None]
    controls = eta.control(mid)
    n_int = mesh.size - 1
    total = n_int * substeps
    s = np.empty(total + 1)
    y = np.empty((total + 1, spec.n))
    d0 = np.empty((total, spec.n))
    d1 = np.empty((total, spec.n))
    y[0] = eta.xi0
    s[0] = 0.0
    limit = divergence_threshold(spec)
    fam = spec.family
    idx = 0
    for i in range(n_int):
        a, b = mesh[i], mesh[i + 1]
        u, tr, pr = controls[i], th_rate[i], ph_rate[i]

        def rhs(x):
            return (fam.drift(x) + fam.control_matrix(x) @ u) * tr + fam.jump(x) @ pr

        h = (b - a) / substeps
        x = y[idx]
        for j in range(substeps):
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * h * k1)
            k3 = rhs(x + 0.5 * h * k2)
            k4 = rhs(x + h * k3)
            xn = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            nrm = np.linalg.norm(xn)
            if not np.isfinite(nrm) or nrm > limit:
                raise DivergenceError(idx + 1, nrm)
            d0[idx] = k1
            d1[idx] = rhs(xn)
            idx += 1
            y[idx] = xn
            s[idx] = a + (j + 1) * h if j + 1 < substeps else b
            x = xn
    return s, y, (d0, d1)


def reference_solve(spec, eta, tol=1e-10, base_level=6, max_refine=10, extra_nodes=None):
    """High-accuracy solution of the reparametrized system.

    The mesh contains every breakpoint of theta, phi and u (plus a uniform
    grid of 2**base_level cells and ``extra_nodes``), so the right-hand side
    is smooth inside each step.  Substeps are doubled until two successive
    passes agree to ``tol`` in sup norm at the coarse nodes.
    """
    mesh = _mesh(eta, base_level, extra_nodes)
    prev = None
    substeps = 1
    for _ in range(max_refine + 1):
        s, y, slopes = _rk4_pass(spec, eta, mesh, substeps)
        if prev is not None:
            diff = float(np.max(np.abs(y[::2] - prev)))
            if diff < tol:
                traj = Trajectory(s, y, "reference", eta=eta, certificate=diff, slopes=slopes,
                                  meta={"tol": tol, "substeps": substeps, "mesh": mesh.size})
                return traj
        prev = y
        substeps *= 2
    raise AccuracyError(f"step halving did not reach tol={tol} after {max_refine} refinements")


# ---------------------------------------------------------------------------
# checks


@dataclass
class GrowthBoundReport:
    bound: float
    max_norm: float
    min_slack: float
    violations: list

    @property
    def ok(self):
        return not self.violations


def growth_bound_check(traj, constants, rtol=1e-12):
    """Check |y_k| + 1 <= exp(beta) (1 + |xi0|) at every node."""
    xi0 = traj.y[0]
    bound = float(np.exp(constants.beta) * (1.0 + np.linalg.norm(xi0)))
    lhs = np.linalg.norm(traj.y, axis=1) + 1.0
    slack = bound - lhs
    bad = np.flatnonzero(slack < -rtol * bound)
    return GrowthBoundReport(bound, float(np.max(lhs) - 1.0), float(np.min(slack)), bad.tolist())


@dataclass
class UniquenessReport:
    difference: float
    tol: float
    agree: bool


def uniqueness_check(spec, eta, tol=1e-9, seed=0, base_level=6):
    """Two reference solves on different meshes must agree within 10 tol."""
    first = reference_solve(spec, eta, tol=tol, base_level=base_level)
    extra = None
    if seed is not None:
        rng = np.random.default_rng(seed)
        extra = np.concatenate([first.s, rng.uniform(size=2**base_level)])
    second = reference_solve(spec, eta, tol=tol, base_level=base_level, extra_nodes=extra)
    diff = float(np.max(np.abs(second(first.s) - first.y)))
    return UniquenessReport(diff, tol, diff < 10 * tol)
