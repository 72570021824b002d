"""Direct transcription of the discrete problems and their diagnostics.

At level N the unknowns are the initial state, N control coefficients, N
nonnegative knot gaps summing to T and N cone-valued measure increments.
The Euler recursion is differentiated by a reverse (adjoint) sweep, the
state bound |y_k| <= L + 1/N is enforced by an escalating quadratic penalty,
and box/cone/simplex constraints by projection inside a spectral projected
gradient method with nonmonotone Armijo backtracking.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import metrics
from .measure import PiecewiseLinearMeasure
from .metrics import DecisionPoint, PiecewiseConstant
from .model import InvalidProblem, LinearCost, validate
from .sim import (
    DivergenceError,
    check_level,
    euler_nodes,
    euler_solve,
    reference_solve,
)

SUMMARY_SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# decision vectors


@dataclass
class DecisionVector:
    xi0: np.ndarray
    u: np.ndarray
    gaps: np.ndarray
    db: np.ndarray

    def __post_init__(self):
        self.xi0 = np.atleast_1d(np.asarray(self.xi0, float))
        self.gaps = np.asarray(self.gaps, float).ravel()
        N = self.gaps.size
        self.u = np.asarray(self.u, float).reshape(N, -1)
        self.db = np.asarray(self.db, float).reshape(N, -1)

    @property
    def N(self):
        return self.gaps.size

    def copy(self):
        return DecisionVector(self.xi0.copy(), self.u.copy(), self.gaps.copy(), self.db.copy())

    def flatten(self):
        return np.concatenate([self.xi0, self.u.ravel(), self.gaps, self.db.ravel()])

    @classmethod
    def unflatten(cls, x, n, m, q, N):
        i = 0
        xi0 = x[i:i + n]; i += n
        u = x[i:i + N * m].reshape(N, m); i += N * m
        gaps = x[i:i + N]; i += N
        db = x[i:i + N * q].reshape(N, q)
        return cls(xi0.copy(), u.copy(), gaps.copy(), db.copy())

    def knots(self, horizon):
        t = np.concatenate([[0.0], np.cumsum(self.gaps)])
        t[-1] = horizon
        return np.minimum(np.maximum.accumulate(t), horizon)

    def values(self):
        return np.vstack([np.zeros(self.db.shape[1]), np.cumsum(self.db, axis=0)])

    def measure(self, horizon):
        return PiecewiseLinearMeasure(self.knots(horizon), self.values())

    def to_point(self, horizon):
        return DecisionPoint(self.xi0, PiecewiseConstant.uniform(self.u), self.measure(horizon))

    def prolong(self):
        """Same decision point on the grid of level 2N."""
        return DecisionVector(self.xi0.copy(), np.repeat(self.u, 2, axis=0),
                              np.repeat(self.gaps / 2, 2), np.repeat(self.db / 2, 2, axis=0))

    @classmethod
    def initial(cls, spec, N):
        u0 = spec.control_set.center() if spec.m else np.zeros(0)
        return cls(spec.initial_set.center(), np.tile(u0, (N, 1)).reshape(N, spec.m),
                   np.full(N, spec.horizon / N), np.zeros((N, spec.q)))

    @classmethod
    def from_point(cls, eta, N):
        s = np.linspace(0.0, 1.0, N + 1)
        gc = eta.completion
        return cls(eta.xi0.copy(), eta.control(s[:-1]), np.diff(gc.theta_at(s)),
                   np.maximum(np.diff(gc.phi_at(s), axis=0), 0.0))

    def to_dict(self):
        return {"xi0": self.xi0.tolist(), "u": self.u.tolist(), "gaps": self.gaps.tolist(),
                "db": self.db.tolist()}


def _project_simplex(v, total, cap=np.inf):
    """Euclidean projection onto {0 <= g <= cap, sum g = total}."""
    v = np.asarray(v, float)
    if not np.isfinite(cap):
        u = np.sort(v)[::-1]
        css = np.cumsum(u) - total
        idx = np.arange(1, v.size + 1)
        rho = np.nonzero(u - css / idx > 0)[0][-1]
        return np.maximum(v - css[rho] / (rho + 1), 0.0)
    if cap * v.size <= total * (1 + 1e-15):
        return np.full(v.size, total / v.size)
    # h(tau) = sum clip(v - tau, 0, cap) is piecewise linear and nonincreasing
    taus = np.unique(np.concatenate([v, v - cap]))
    h = np.clip(v[None, :] - taus[:, None], 0.0, cap).sum(axis=1)
    j = int(np.searchsorted(-h, -total, side="left"))
    if j == 0:
        tau = taus[0]
    elif j >= taus.size:
        tau = taus[-1]
    else:
        t0, t1, h0, h1 = taus[j - 1], taus[j], h[j - 1], h[j]
        tau = t1 if h0 == h1 else t0 + (h0 - total) * (t1 - t0) / (h0 - h1)
    return np.clip(v - tau, 0.0, cap)


def project_feasible(v, spec, simplex="renormalize"):
    """Project onto C x U^N x {gaps} x K^N.

    Gaps live in {0 <= g_k <= b/N, sum g = T} with b the theta rank of the
    problem.  ``simplex="renormalize"`` clamps the gaps at 0 and rescales
    them to sum to T (falling back to the Euclidean projection if that breaks
    the cap); ``"euclidean"`` uses the exact Euclidean projection (what the
    solver uses).
    """
    xi0 = spec.initial_set.project(v.xi0)
    u = np.array([spec.control_set.project(uk) for uk in v.u]).reshape(v.u.shape) if spec.m else v.u.copy()
    cap = spec.theta_lip / v.N
    if simplex == "euclidean":
        gaps = _project_simplex(v.gaps, spec.horizon, cap)
    else:
        gaps = np.maximum(v.gaps, 0.0)
        tot = gaps.sum()
        gaps = np.full(v.N, spec.horizon / v.N) if tot <= 0 else gaps * (spec.horizon / tot)
        if np.any(gaps > cap * (1 + 1e-12)):
            gaps = _project_simplex(v.gaps, spec.horizon, cap)
    return DecisionVector(xi0, u, gaps, np.maximum(v.db, 0.0))


def random_decision(spec, N, rng, mass=1.0, max_halvings=60):
    """Random member of S_{C,N}: random sets samples, shrunk until the state bound holds."""
    xi0 = spec.initial_set.project(spec.initial_set.sample(rng, 1)[0])
    u = spec.control_set.sample(rng, N) if spec.m else np.zeros((N, 0))
    if spec.m:
        u = np.array([spec.control_set.project(uk) for uk in u])
    gaps = _project_simplex(rng.dirichlet(np.ones(N)) * spec.horizon, spec.horizon,
                            spec.theta_lip / N)
    db = rng.exponential(mass / N, size=(N, spec.q))
    v = DecisionVector(xi0, u, gaps, db)
    for _ in range(max_halvings):
        try:
            if feasibility(v, spec) <= 0:
                return v
        except DivergenceError:
            pass
        v.db *= 0.5
        v.u *= 0.5
        if spec.m:
            v.u = np.array([spec.control_set.project(uk) for uk in v.u])
    raise RuntimeError("could not draw a feasible decision vector")


def trajectory(v, spec):
    return euler_nodes(spec, v.xi0, v.u, v.gaps, v.db)


def feasibility(v, spec, y=None):
    """max_k |y_k| - (L + 1/N); nonpositive iff the discrete state bound holds."""
    if y is None:
        y = trajectory(v, spec)
    return float(np.max(np.linalg.norm(y, axis=1)) - (spec.state_bound + 1.0 / v.N))


# ---------------------------------------------------------------------------
# objective and discrete adjoint


def _value_and_grad(spec, v, cost, rho=0.0, bound=None):
    """Cost (+ penalty) and gradient w.r.t. the flattened unknowns."""
    fam = spec.family
    y = euler_nodes(spec, v.xi0, v.u, v.gaps, v.db)
    N = v.N
    f0 = cost.value(v.xi0, y[-1])
    g0, g1 = cost.gradient(v.xi0, y[-1])

    dpen = np.zeros_like(y)
    pen = 0.0
    if rho > 0:
        norms = np.linalg.norm(y, axis=1)
        exc = np.maximum(norms - bound, 0.0)
        pen = rho * float(exc @ exc)
        act = exc > 0
        dpen[act] = (2 * rho * exc[act] / norms[act])[:, None] * y[act]

    gu = np.zeros_like(v.u)
    gg = np.zeros(N)
    gdb = np.zeros_like(v.db)
    eye = np.eye(spec.n)
    lam = g1 + dpen[N]
    for k in range(N - 1, -1, -1):
        yk, uk = y[k], v.u[k]
        Fb = fam.control_matrix(yk)
        G = fam.jump(yk)
        gu[k] = v.gaps[k] * (Fb.T @ lam)
        gg[k] = lam @ (fam.drift(yk) + Fb @ uk)
        gdb[k] = G.T @ lam
        J = eye + v.gaps[k] * (fam.drift_jac(yk) + fam.control_jac(yk, uk)) + fam.jump_jac(yk, v.db[k])
        lam = J.T @ lam + dpen[k]
    grad = np.concatenate([lam + g0, gu.ravel(), gg, gdb.ravel()])
    return f0 + pen, f0, y, grad


def objective_and_gradient(v, spec, N=None, cost=None):
    """f0(xi0, y_N(1)) and its gradient (a DecisionVector of partials)."""
    if N is not None and N != v.N:
        raise ValueError("decision vector level differs from N")
    _, f0, _, grad = _value_and_grad(spec, v, cost or spec.cost)
    return f0, DecisionVector.unflatten(grad, spec.n, spec.m, spec.q, v.N)


# ---------------------------------------------------------------------------
# spectral projected gradient


@dataclass
class SolverOptions:
    max_iter: int = 3000
    grad_tol: float = 1e-9
    feas_tol: float = 1e-6
    rho0: float = 10.0
    rho_factor: float = 10.0
    rho_max: float = 1e10
    armijo: float = 1e-4
    memory: int = 10
    step_min: float = 1e-12
    step_max: float = 1e12
    gamma_tol: float = 1e-3
    compute_gamma: bool = True
    gamma_restarts: int = 2
    gamma_iter: int = 200
    descent_restarts: int = 5
    seed: int = 0


@dataclass
class _SPGInfo:
    iterations: int
    pg_norm: float
    stationary: bool


def _spg(fun, project, x, max_iter, grad_tol, opts):
    F, g = fun(x)
    pg = project(x - g) - x
    pgn = float(np.max(np.abs(pg))) if pg.size else 0.0
    alpha = 1.0 / max(pgn, 1e-12)
    alpha = min(max(alpha, opts.step_min), opts.step_max)
    hist = [F]
    it = 0
    while it < max_iter:
        if pgn < grad_tol:
            return x, _SPGInfo(it, pgn, True)
        d = project(x - alpha * g) - x
        gd = float(g @ d)
        Fref = max(hist[-opts.memory:])
        lam = 1.0
        accepted = False
        while lam > 1e-16:
            xn = x + lam * d
            try:
                Fn, gn = fun(xn)
            except DivergenceError:
                Fn, gn = np.inf, None
            if Fn <= Fref + opts.armijo * lam * gd:
                accepted = True
                break
            lam *= 0.5
        it += 1
        if not accepted:
            return x, _SPGInfo(it, pgn, False)
        s = xn - x
        yv = gn - g
        sy = float(s @ yv)
        alpha = opts.step_max if sy <= 0 else min(max(float(s @ s) / sy, opts.step_min), opts.step_max)
        x, F, g = xn, Fn, gn
        hist.append(F)
        # numerically stationary: no progress beyond round-off over the memory window
        window = hist[-opts.memory - 1:]
        if len(hist) > opts.memory and max(window) - min(window) <= 1e-14 * (1.0 + abs(F)):
            pg = project(x - g) - x
            pgn = float(np.max(np.abs(pg))) if pg.size else 0.0
            return x, _SPGInfo(it, pgn, True)
        pg = project(x - g) - x
        pgn = float(np.max(np.abs(pg))) if pg.size else 0.0
    return x, _SPGInfo(it, pgn, pgn < grad_tol)


def _penalty_loop(spec, N, value_grad, x0, opts, max_iter, grad_tol):
    """Minimize value_grad(x, rho) + penalty by SPG, escalating rho at stationary points."""
    n, m, q = spec.n, spec.m, spec.q

    def project(x):
        v = DecisionVector.unflatten(x, n, m, q, N)
        return project_feasible(v, spec, simplex="euclidean").flatten()

    x = project(x0)
    rho = opts.rho0
    total = 0
    info = _SPGInfo(0, np.inf, False)
    bound = spec.state_bound + 1.0 / N
    while True:
        # the penalty gradient carries round-off of order eps * rho * |y|^2
        tol = max(grad_tol, 1e-14 * rho * (1.0 + bound) ** 2)
        x, info = _spg(lambda z: value_grad(z, rho), project, x, max_iter - total, tol, opts)
        total += info.iterations
        v = DecisionVector.unflatten(x, n, m, q, N)
        feas = feasibility(v, spec)
        if feas <= opts.feas_tol or rho >= opts.rho_max or total >= max_iter:
            break
        rho *= opts.rho_factor
    return v, rho, total, info


@dataclass
class SolveResult:
    eta_star: DecisionVector
    objective: float
    gamma: float
    feasibility: float
    iterations: int
    converged: bool
    rho: float = 0.0
    pg_norm: float = 0.0
    N: int = 0

    def point(self, spec):
        return self.eta_star.to_point(spec.horizon)


def solve_level(spec, N, warm_start=None, options=None):
    """Solve the level-N discrete problem from ``warm_start`` (or a default start)."""
    opts = options or SolverOptions()
    violations = validate(spec)
    if violations:
        raise InvalidProblem(violations)
    N = check_level(N)
    v0 = warm_start if warm_start is not None else DecisionVector.initial(spec, N)
    if v0.N != N:
        raise ValueError("warm start has the wrong level")
    bound = spec.state_bound + 1.0 / N
    n, m, q = spec.n, spec.m, spec.q

    def value_grad(x, rho):
        v = DecisionVector.unflatten(x, n, m, q, N)
        F, _, _, grad = _value_and_grad(spec, v, spec.cost, rho, bound)
        return F, grad

    v, rho, iters, info = _penalty_loop(spec, N, value_grad, v0.flatten(), opts,
                                        opts.max_iter, opts.grad_tol)
    gamma = float("nan")
    if opts.compute_gamma:
        gres = gamma_details(v, spec, N, opts)
        restarts = 0
        # a clearly negative optimality function means v is not a local minimizer
        # (e.g. SPG stopped on a saddle); the subproblem minimizer supplies a
        # descent direction, so move along it and resume
        while gres.value < -opts.gamma_tol and restarts < opts.descent_restarts:
            restarts += 1
            x, d = v.flatten(), gres.best.flatten() - v.flatten()
            F0 = value_grad(x, rho)[0]
            moved = None
            for lam in 0.5 ** np.arange(8):
                try:
                    if value_grad(x + lam * d, rho)[0] < F0:
                        moved = x + lam * d
                        break
                except DivergenceError:
                    continue
            if moved is None:
                break
            budget = max(opts.max_iter - iters, 1)
            v, rho, it, info = _penalty_loop(spec, N, value_grad, moved, opts, budget, opts.grad_tol)
            iters += it
            gres = gamma_details(v, spec, N, opts)
        gamma = gres.value
    f0, _ = objective_and_gradient(v, spec)
    feas = feasibility(v, spec)
    converged = (info.stationary and feas <= opts.feas_tol
                 and (not opts.compute_gamma or gamma >= -opts.gamma_tol))
    return SolveResult(v, f0, gamma, feas, iters, bool(converged), rho, info.pg_norm, N)


# ---------------------------------------------------------------------------
# optimality function


def _d4_subgradient(ref_F, ref_values, knots, values, horizon, order=6):
    """Subgradient of d4 (extended pairs) w.r.t. the knots and node values of the
    second measure, with the first measure held fixed."""
    N = knots.size - 1
    q = values.shape[1]
    P = np.vstack([np.eye(q), np.ones((1, q))])
    g_t = np.zeros(N + 1)
    g_b = np.zeros((N + 1, q))

    def unit(d):
        nd = np.linalg.norm(d, axis=-1, keepdims=True)
        return np.where(nd > 0, d / np.where(nd > 0, nd, 1.0), 0.0)

    # total-mass term
    g_b[N] += P.T @ unit(P @ (values[N] - ref_values[-1]))
    # sup term over the shared uniform nodes
    diffs = (values - ref_values) @ P.T
    k = int(np.argmax(np.linalg.norm(diffs, axis=1)))
    g_b[k] += P.T @ unit(diffs[k])
    # integral term by Gauss-Legendre quadrature on merged pieces
    grid = np.union1d(knots, ref_F.t)
    a, b = grid[:-1], grid[1:]
    keep = b - a > 1e-15 * max(horizon, 1.0)
    a, b = a[keep], b[keep]
    if a.size:
        xg, wg = np.polynomial.legendre.leggauss(order)
        t = (0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * xg).ravel()
        w = (0.5 * (b - a)[:, None] * wg).ravel()
        cell = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, N - 1)
        t0, t1 = knots[cell], knots[cell + 1]
        width = t1 - t0
        ok = width > 0
        t, w, cell, t0, width = t[ok], w[ok], cell[ok], t0[ok], width[ok]
        lam = (t - t0) / width
        slope = (values[cell + 1] - values[cell]) / width[:, None]
        F2 = values[cell] + lam[:, None] * (values[cell + 1] - values[cell])
        D = (F2 - ref_F.evaluate(t)) @ P.T
        wv = unit(D) @ P
        np.add.at(g_b, cell, (w * (1 - lam))[:, None] * wv)
        np.add.at(g_b, cell + 1, (w * lam)[:, None] * wv)
        dt = -np.sum(slope * wv, axis=1)
        np.add.at(g_t, cell, w * (1 - lam) * dt)
        np.add.at(g_t, cell + 1, w * lam * dt)
    # chain to gaps (t_0 and t_N fixed) and increments
    g_t[0] = g_t[N] = 0.0
    d_gaps = np.cumsum(g_t[::-1])[::-1][1:]
    d_db = np.cumsum(g_b[::-1], axis=0)[::-1][1:]
    return d_gaps, d_db


@dataclass
class GammaResult:
    value: float
    best: DecisionVector
    values: list = field(default_factory=list)
    restarts: int = 0


def gamma_details(v, spec, N=None, options=None):
    """Multi-start upper bound on the level-N optimality function at ``v``."""
    opts = options or SolverOptions()
    N = v.N if N is None else N
    n, m, q, T = spec.n, spec.m, spec.q, spec.horizon
    h = 1.0 / N
    y = trajectory(v, spec)
    g0, g1 = spec.cost.gradient(v.xi0, y[-1])
    lin = LinearCost(g0, g1)
    base_lin = lin.value(v.xi0, y[-1])
    ref_measure = v.measure(T)
    ref_F = ref_measure.distribution()
    ref_values = v.values()
    bound = spec.state_bound + 1.0 / N

    def exact(vb):
        yb = trajectory(vb, spec)
        d = metrics.d1(v.xi0, vb.xi0) + h * float(np.sum((vb.u - v.u) ** 2))
        d += metrics.d4(ref_measure, vb.measure(T))
        return lin.value(vb.xi0, yb[-1]) - base_lin + 0.5 * d

    def value_grad(x, rho):
        vb = DecisionVector.unflatten(x, n, m, q, N)
        F, _, yb, grad = _value_and_grad(spec, vb, lin, rho, bound)
        F -= base_lin
        dx = vb.xi0 - v.xi0
        nd = np.linalg.norm(dx)
        F += 0.5 * (nd + h * float(np.sum((vb.u - v.u) ** 2)))
        F += 0.5 * metrics.d4(ref_measure, vb.measure(T))
        gx = np.zeros_like(grad)
        if nd > 0:
            gx[:n] = 0.5 * dx / nd
        gx[n:n + N * m] = h * (vb.u - v.u).ravel()
        dg, ddb = _d4_subgradient(ref_F, ref_values, vb.knots(T), vb.values(), T)
        gx[n + N * m:n + N * m + N] = 0.5 * dg
        gx[n + N * m + N:] = 0.5 * ddb.ravel()
        return F, grad + gx

    rng = np.random.default_rng(opts.seed)
    starts = [v.copy()]
    for _ in range(opts.gamma_restarts):
        try:
            starts.append(random_decision(spec, N, rng))
        except RuntimeError:
            pass
    best_val, best = 0.0, v.copy()
    found = []
    for start in starts:
        try:
            vb, _, _, _ = _penalty_loop(spec, N, value_grad, start.flatten(), opts,
                                        opts.gamma_iter, opts.grad_tol)
        except DivergenceError:
            continue
        vb = _pull_back(v, vb, spec, max(opts.feas_tol, feasibility(v, spec)))
        if vb is None:
            continue
        val = exact(vb)
        found.append(val)
        if val < best_val:
            best_val, best = val, vb
    return GammaResult(float(best_val), best, found, len(starts) - 1)


def _pull_back(v, vb, spec, tol, halvings=30):
    """Largest t in {1, 1/2, 1/4, ...} with v + t (vb - v) feasible, or None.

    The decision space is convex, so every such point is admissible and its
    exact value is a valid upper bound even when the penalty loop stopped on
    its iteration budget before reaching feasibility.
    """
    x, d = v.flatten(), vb.flatten() - v.flatten()
    t = 1.0
    for _ in range(halvings):
        w = DecisionVector.unflatten(x + t * d, spec.n, spec.m, spec.q, v.N)
        try:
            if feasibility(w, spec) <= tol:
                return w
        except DivergenceError:
            pass
        t *= 0.5
    return None


def gamma_CN(v, spec, N=None, options=None):
    """Upper bound on gamma^{C,N}(v); always <= 0 since v itself is a candidate."""
    return gamma_details(v, spec, N, options).value


# ---------------------------------------------------------------------------
# studies and reports


@dataclass
class ErrorBoundReport:
    Ns: list
    e: list
    c: list
    c_end: list
    slope_e: float | None
    slope_c: float | None
    K_xi0: float
    K_S: float
    delta: float
    e_perturbed: list
    K_xi0_perturbed: float
    exact: bool
    certificate: float

    def to_dict(self):
        return asdict(self)


def _slope(Ns, vals, floor=1e-14):
    vals = np.asarray(vals, float)
    ok = vals > floor
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(np.asarray(Ns, float)[ok]), np.log(vals[ok]), 1)[0])


def error_bound_report(spec, eta, levels, delta=1e-2, tol=1e-11):
    """Euler-vs-reference errors e_N and cost errors c_N with fitted O(1/N) constants."""
    Ns = [2**int(k) for k in levels]
    if len(Ns) < 2:
        raise ValueError("need at least two levels")
    grid = np.linspace(0.0, 1.0, max(Ns) + 1)
    ref = reference_solve(spec, eta, tol=tol, extra_nodes=grid)
    direction = np.zeros(spec.n)
    direction[0] = 1.0
    eta_hat = DecisionPoint(eta.xi0 + delta * direction, eta.control, eta.impulse)
    xi0 = eta.xi0
    e, c, c_end, e_hat = [], [], [], []
    for N in Ns:
        traj = euler_solve(spec, eta, N)
        yr = ref(traj.s)
        e.append(float(np.max(np.linalg.norm(traj.y - yr, axis=1))))
        costs_ref = np.array([spec.cost.value(xi0, yk) for yk in yr])
        costs_n = np.array([spec.cost.value(xi0, yk) for yk in traj.y])
        c.append(float(np.max(np.abs(costs_ref - costs_n))))
        c_end.append(float(abs(costs_ref[-1] - costs_n[-1])))
        th = euler_solve(spec, eta_hat, N)
        e_hat.append(float(np.max(np.linalg.norm(th.y - yr, axis=1))))
    exact = max(e) <= 1e-13
    return ErrorBoundReport(
        Ns=Ns, e=e, c=c, c_end=c_end, slope_e=_slope(Ns, e), slope_c=_slope(Ns, c),
        K_xi0=float(max(ek * N for ek, N in zip(e, Ns))),
        K_S=float(max(ck * N for ck, N in zip(c, Ns))),
        delta=delta, e_perturbed=e_hat,
        K_xi0_perturbed=float(max(ek / (delta + 1.0 / N) for ek, N in zip(e_hat, Ns))),
        exact=bool(exact), certificate=float(ref.certificate),
    )


@dataclass
class GraphConvergenceReport:
    Ns: list
    distances: list


def completed_graph(spec, eta, tol=1e-10, dense=2**14, reference=None):
    """Dense samples of {(theta(s), y(s))}: the trajectory graph plus atom arcs."""
    ref = reference if reference is not None else reference_solve(spec, eta, tol=tol)
    s = np.union1d(np.linspace(0.0, 1.0, dense + 1), ref.s)
    return np.column_stack([eta.completion.theta_at(s), ref(s)])


def lambda_set(spec, eta_N, N):
    """{(theta_N(s_k), y_k)} for the Euler solution at level N."""
    traj = euler_solve(spec, eta_N, N)
    return np.column_stack([eta_N.completion.theta_at(traj.s), traj.y])


def graph_convergence_report(spec, points, reference_eta, tol=1e-10, dense=2**14):
    """Hausdorff distance between Lambda^N and the completed graph per level.

    ``points`` maps N to the level-N decision point (or SolveResult).
    """
    graph = completed_graph(spec, reference_eta, tol, dense)
    Ns, dist = [], []
    for N in sorted(points):
        p = points[N]
        if isinstance(p, SolveResult):
            p = p.point(spec)
        Ns.append(int(N))
        dist.append(metrics.hausdorff(lambda_set(spec, p, N), graph))
    return GraphConvergenceReport(Ns, dist)


@dataclass
class StudyReport:
    levels: list
    Ns: list
    results: list
    objectives: list
    gammas: list
    interlevel_distances: list
    seed: int
    objective_gaps: list | None = None
    known_distances: list | None = None
    errors: ErrorBoundReport | None = None
    hausdorff: GraphConvergenceReport | None = None
    checks: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    trends: dict = field(default_factory=dict)
    gamma_note: str = ("gamma values are multi-start upper bounds of the level-N "
                       "optimality function; the continuous one is approximated by "
                       "the largest level")

    def points(self, spec):
        return {r.N: r.point(spec) for r in self.results if r is not None}

    @property
    def passed(self):
        return all(self.checks.values())

    def summary(self):
        out = {
            "schema_version": SUMMARY_SCHEMA_VERSION,
            "seed": self.seed,
            "levels": self.levels,
            "N": self.Ns,
            "objective": self.objectives,
            "gamma": self.gammas,
            "gamma_note": self.gamma_note,
            "interlevel_distance": self.interlevel_distances,
            "objective_gap": self.objective_gaps,
            "known_distance": self.known_distances,
            "failures": self.failures,
            "checks": self.checks,
            "trends": self.trends,
            "passed": self.passed,
        }
        if self.errors is not None:
            out["errors"] = self.errors.to_dict()
        if self.hausdorff is not None:
            out["hausdorff"] = {"N": self.hausdorff.Ns, "dist_H": self.hausdorff.distances}
        return out

    def write(self, outdir, spec=None):
        os.makedirs(outdir, exist_ok=True)
        _write_csv(os.path.join(outdir, "levels.csv"),
                   ["N", "objective", "gamma", "feasibility", "iterations"],
                   [[r.N, r.objective, r.gamma, r.feasibility, r.iterations]
                    for r in self.results if r is not None])
        if self.errors is not None:
            _write_csv(os.path.join(outdir, "errors.csv"), ["N", "e_N", "c_N"],
                       list(zip(self.errors.Ns, self.errors.e, self.errors.c)))
        if self.hausdorff is not None:
            _write_csv(os.path.join(outdir, "hausdorff.csv"), ["N", "dist_H"],
                       list(zip(self.hausdorff.Ns, self.hausdorff.distances)))
        if spec is not None:
            for r in self.results:
                if r is None:
                    continue
                y = trajectory(r.eta_star, spec)
                s = np.linspace(0.0, 1.0, r.N + 1)
                t = r.eta_star.knots(spec.horizon)
                _write_csv(os.path.join(outdir, f"trajectory_N{r.N}.csv"),
                           ["s", "t"] + [f"y_{j + 1}" for j in range(spec.n)],
                           [[si, ti, *yi] for si, ti, yi in zip(s, t, y)])
        with open(os.path.join(outdir, "summary.json"), "w") as fh:
            json.dump(_jsonable(self.summary()), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def study(spec, levels, options=None, known_solution=None):
    """Solve levels N = 2**k in turn, warm-starting each from the prolonged previous solution.

    ``known_solution`` may carry ``objective`` (the continuous optimal value)
    and ``eta`` (a continuous minimizer as a DecisionPoint).
    """
    opts = options or SolverOptions()
    levels = [int(k) for k in levels]
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be at least two strictly increasing integers")
    results, failures = [], {}
    prev = None
    for k in levels:
        N = 2**k
        warm = None
        if prev is not None:
            warm = prev.eta_star
            while warm.N < N:
                warm = warm.prolong()
        try:
            res = solve_level(spec, N, warm, opts)
        except (DivergenceError, RuntimeError) as exc:
            failures[N] = str(exc)
            res = None
        results.append(res)
        if res is not None:
            prev = res
    points = [r.point(spec) if r is not None else None for r in results]
    dists = []
    for a, b in zip(points, points[1:]):
        dists.append(metrics.d_full(a, b) if a is not None and b is not None else float("nan"))
    report = StudyReport(
        levels=levels, Ns=[2**k for k in levels], results=results,
        objectives=[r.objective if r else float("nan") for r in results],
        gammas=[r.gamma if r else float("nan") for r in results],
        interlevel_distances=dists, seed=opts.seed, failures=failures,
    )
    if known_solution:
        if "objective" in known_solution:
            f_star = float(known_solution["objective"])
            report.objective_gaps = [abs(o - f_star) for o in report.objectives]
        if known_solution.get("eta") is not None:
            eta_star = known_solution["eta"]
            report.known_distances = [metrics.d_full(p, eta_star) if p is not None else float("nan")
                                      for p in points]
    return report
