"""Problem definitions: measure-driven dynamics, endpoint costs and constraint sets.

A problem is

    min f0(x(0), x(T))   s.t.   dx = f(x, u) dt + g(x) dmu,
                                x(0) in C, u(t) in U, mu >= 0, gc-sup |x| <= L

with ``f(x, u) = f_a(x) + F_b(x) u``.  Fields come from a small registry of
named families so that Jacobians (needed by the discrete adjoint) and
Lipschitz/growth constants are available in closed form.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Any

import jsonschema
import numpy as np


class InvalidField(ValueError):
    """A field evaluation produced a non-finite value."""


class InvalidProblem(ValueError):
    """The problem violates a well-posedness requirement."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class ConfigError(ValueError):
    """Structured-text problem document could not be parsed or is off-schema."""


# ---------------------------------------------------------------------------
# constraint sets


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.atleast_1d(np.asarray(self.lower, float)))
        object.__setattr__(self, "upper", np.atleast_1d(np.asarray(self.upper, float)))
        if self.lower.shape != self.upper.shape:
            raise ValueError("box bounds must have equal shapes")

    @property
    def dim(self):
        return self.lower.size

    def is_empty(self):
        return bool(np.any(self.lower > self.upper))

    def is_bounded(self):
        return bool(np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper)))

    def project(self, x):
        return np.clip(x, self.lower, self.upper)

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def inf_radius(self):
        """Largest max-norm of a member."""
        if self.dim == 0:
            return 0.0
        return float(np.max(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def center(self):
        lo = np.where(np.isfinite(self.lower), self.lower, 0.0)
        hi = np.where(np.isfinite(self.upper), self.upper, 0.0)
        return self.project(0.5 * (lo + hi))

    def sample(self, rng, size):
        lo = np.where(np.isfinite(self.lower), self.lower, -1.0)
        hi = np.where(np.isfinite(self.upper), self.upper, 1.0)
        return rng.uniform(lo, hi, size=(size, self.dim))

    def to_dict(self):
        return {"type": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}


@dataclass(frozen=True)
class Ball:
    center_: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center_", np.atleast_1d(np.asarray(self.center_, float)))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def dim(self):
        return self.center_.size

    def is_empty(self):
        return self.radius < 0

    def is_bounded(self):
        return bool(np.isfinite(self.radius))

    def project(self, x):
        d = np.asarray(x, float) - self.center_
        nd = np.linalg.norm(d)
        if nd <= self.radius:
            return np.array(x, float)
        return self.center_ + d * (self.radius / nd)

    def contains(self, x, tol=1e-12):
        return bool(np.linalg.norm(np.asarray(x, float) - self.center_) <= self.radius + tol)

    def inf_radius(self):
        if self.dim == 0:
            return 0.0
        return float(np.max(np.abs(self.center_)) + self.radius)

    def center(self):
        return self.center_.copy()

    def sample(self, rng, size):
        d = rng.standard_normal((size, self.dim))
        d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300)
        rad = self.radius * rng.uniform(size=(size, 1)) ** (1.0 / max(self.dim, 1))
        return self.center_ + d * rad

    def to_dict(self):
        return {"type": "ball", "center": self.center_.tolist(), "radius": self.radius}


def make_set(doc):
    if doc["type"] == "box":
        return Box(doc["lower"], doc["upper"])
    return Ball(doc["center"], doc["radius"])


# ---------------------------------------------------------------------------
# field families


def _mat(a, rows, cols):
    a = np.asarray(a, float)
    if a.size == 0:
        return np.zeros((rows, cols))
    return a.reshape(rows, cols)


class LinearFamily:
    """f_a(x) = A x + c, F_b = B, g(x) = G + diag(x) H."""

    name = "linear"

    def __init__(self, n, m, q, A=None, c=None, B=None, G=None, H=None):
        self.n, self.m, self.q = n, m, q
        self.A = _mat(A if A is not None else np.zeros((n, n)), n, n)
        self.c = np.asarray(c if c is not None else np.zeros(n), float).reshape(n)
        self.B = _mat(B if B is not None else np.zeros((n, m)), n, m)
        self.G = _mat(G if G is not None else np.zeros((n, q)), n, q)
        self.H = _mat(H if H is not None else np.zeros((n, q)), n, q)

    def params(self):
        return {k: getattr(self, k).tolist() for k in ("A", "c", "B", "G", "H")}

    def drift(self, x):
        return self.A @ x + self.c

    def drift_jac(self, x):
        return self.A

    def control_matrix(self, x):
        return self.B

    def control_jac(self, x, u):
        return np.zeros((self.n, self.n))

    def jump(self, x):
        return self.G + x[:, None] * self.H

    def jump_jac(self, x, w):
        # d/dx [g(x) w] = diag(H w)
        return np.diag(self.H @ w)

    def analytic_constants(self, beta_max):
        nA = np.linalg.norm(self.A, 2) if self.n else 0.0
        nB = np.linalg.norm(self.B, 2) if self.m else 0.0
        rowH = float(np.max(np.linalg.norm(self.H, axis=1))) if self.q else 0.0
        nG = np.linalg.norm(self.G, 2) if self.q else 0.0
        ubound = np.sqrt(self.m) * beta_max
        k_prime = max(nA, nB)
        k1 = max(nA, np.linalg.norm(self.c) + nB * ubound, nG, rowH)
        return k_prime, rowH, k1


class PendulumFamily:
    """Damped pendulum with torque input and affine impulsive kicks.

    x = (angle, rate); f_a = (rate, -a sin(angle) - damping rate); F_b = (0, b)^T;
    g(x) = G + diag(x) H.
    """

    name = "pendulum"

    def __init__(self, n, m, q, a=1.0, damping=0.0, b=1.0, G=None, H=None):
        if n != 2 or m != 1:
            raise ValueError("pendulum family needs n=2, m=1")
        self.n, self.m, self.q = n, m, q
        self.a, self.damping, self.b = float(a), float(damping), float(b)
        self.G = _mat(G if G is not None else np.zeros((n, q)), n, q)
        self.H = _mat(H if H is not None else np.zeros((n, q)), n, q)

    def params(self):
        return {"a": self.a, "damping": self.damping, "b": self.b,
                "G": self.G.tolist(), "H": self.H.tolist()}

    def drift(self, x):
        return np.array([x[1], -self.a * np.sin(x[0]) - self.damping * x[1]])

    def drift_jac(self, x):
        return np.array([[0.0, 1.0], [-self.a * np.cos(x[0]), -self.damping]])

    def control_matrix(self, x):
        return np.array([[0.0], [self.b]])

    def control_jac(self, x, u):
        return np.zeros((2, 2))

    def jump(self, x):
        return self.G + x[:, None] * self.H

    def jump_jac(self, x, w):
        return np.diag(self.H @ w)

    def analytic_constants(self, beta_max):
        k_prime = max(np.hypot(1.0, abs(self.a) + abs(self.damping)), abs(self.b))
        rowH = float(np.max(np.linalg.norm(self.H, axis=1))) if self.q else 0.0
        nG = np.linalg.norm(self.G, 2) if self.q else 0.0
        # |f| <= (1 + |a| + |d|)|x| + |b| beta_max
        k1 = max(1.0 + abs(self.a) + abs(self.damping), abs(self.b) * beta_max, nG, rowH)
        return k_prime, rowH, k1


FAMILIES = {"linear": LinearFamily, "pendulum": PendulumFamily}


# ---------------------------------------------------------------------------
# endpoint costs


class QuadraticCost:
    """scale * [(x0 - a)' W0 (x0 - a) + (x1 - b)' W1 (x1 - b)]."""

    def __init__(self, n, target=None, weight=None, initial_target=None,
                 initial_weight=None, scale=1.0):
        self.n = n
        self.target = np.zeros(n) if target is None else np.asarray(target, float).reshape(n)
        self.weight = np.eye(n) if weight is None else _mat(weight, n, n)
        self.initial_target = (np.zeros(n) if initial_target is None
                               else np.asarray(initial_target, float).reshape(n))
        self.initial_weight = (np.zeros((n, n)) if initial_weight is None
                               else _mat(initial_weight, n, n))
        self.scale = float(scale)

    def to_dict(self):
        return {"type": "quadratic", "target": self.target.tolist(),
                "weight": self.weight.tolist(),
                "initial_target": self.initial_target.tolist(),
                "initial_weight": self.initial_weight.tolist(), "scale": self.scale}

    def scaled(self, factor):
        return QuadraticCost(self.n, self.target, self.weight, self.initial_target,
                             self.initial_weight, self.scale * factor)

    def value(self, x0, x1):
        d0 = x0 - self.initial_target
        d1 = x1 - self.target
        return self.scale * float(d0 @ self.initial_weight @ d0 + d1 @ self.weight @ d1)

    def gradient(self, x0, x1):
        d0 = x0 - self.initial_target
        d1 = x1 - self.target
        W0, W1 = self.initial_weight, self.weight
        return self.scale * (W0 + W0.T) @ d0, self.scale * (W1 + W1.T) @ d1


class LinearCost:
    """c0 . x0 + c1 . x1 (the linearized cost of the optimality-function subproblem)."""

    def __init__(self, c0, c1):
        self.c0 = np.asarray(c0, float)
        self.c1 = np.asarray(c1, float)

    def value(self, x0, x1):
        return float(self.c0 @ x0 + self.c1 @ x1)

    def gradient(self, x0, x1):
        return self.c0.copy(), self.c1.copy()


COSTS = {"quadratic": QuadraticCost}


# ---------------------------------------------------------------------------
# problem


@dataclass(frozen=True)
class ProblemSpec:
    state_dim: int
    control_dim: int
    measure_dim: int
    horizon: float
    family: Any
    cost: Any
    initial_set: Any
    control_set: Any
    beta_max: float
    omega: float
    state_bound: float
    family_name: str = "linear"
    theta_rank: float | None = None

    @property
    def theta_lip(self):
        """Uniform Lipschitz rank b of theta_N; each knot gap is at most b/N."""
        return 2.0 * self.horizon if self.theta_rank is None else float(self.theta_rank)

    @property
    def n(self):
        return self.state_dim

    @property
    def m(self):
        return self.control_dim

    @property
    def q(self):
        return self.measure_dim

    def with_cost(self, cost):
        return dataclasses.replace(self, cost=cost)

    def with_state_bound(self, bound):
        return dataclasses.replace(self, state_bound=float(bound))

    def to_dict(self):
        return {
            "dims": {"n": self.n, "m": self.m, "q": self.q},
            "horizon": self.horizon,
            "family": self.family_name,
            "family_params": self.family.params(),
            "cost": self.cost.to_dict(),
            "initial_set": self.initial_set.to_dict(),
            "control_set": self.control_set.to_dict(),
            "beta_max": self.beta_max,
            "omega": self.omega,
            "state_bound": self.state_bound,
            **({} if self.theta_rank is None else {"theta_rank": self.theta_rank}),
        }


@dataclass(frozen=True)
class RegularityConstants:
    K_prime: float
    K_dprime: float
    K1: float
    b: float = 0.0
    r: float = 0.0

    @property
    def beta(self):
        return self.K1 * (self.b + self.r)

    def with_ranks(self, b, r):
        return dataclasses.replace(self, b=float(b), r=float(r))


def eval_dynamics(spec, x, u):
    """Return f(x, u) = f_a(x) + F_b(x) u."""
    x = np.asarray(x, float)
    u = np.asarray(u, float).reshape(spec.m)
    out = spec.family.drift(x) + spec.family.control_matrix(x) @ u
    bad = np.flatnonzero(~np.isfinite(out))
    if bad.size:
        raise InvalidField(f"dynamics component {int(bad[0])} is not finite at x={x.tolist()}")
    return out


def eval_jump(spec, x):
    out = spec.family.jump(np.asarray(x, float))
    if not np.all(np.isfinite(out)):
        i, j = np.argwhere(~np.isfinite(out))[0]
        raise InvalidField(f"jump field component ({int(i)},{int(j)}) is not finite")
    return out


def _sample_state_ball(rng, n, radius, size):
    d = rng.standard_normal((size, n))
    d /= np.maximum(np.linalg.norm(d, axis=1, keepdims=True), 1e-300)
    return d * radius * rng.uniform(size=(size, 1)) ** (1.0 / n)


def _control_samples(spec, rng, size):
    if spec.m == 0:
        return np.zeros((size, 0))
    return spec.control_set.sample(rng, size)


def estimate_constants(spec, sample_count=1000, seed=0):
    """Sampled surrogates for K', K'' and K1 on |x| <= L + 1.

    Difference quotients in x (at fixed u) and in u (at fixed x) are taken
    separately; K' = max of the two bounds the joint quotient.  Estimates are
    inflated by 1.5 and clamped below by 1.  ``b`` and ``r`` are left at 0.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be at least 100")
    rng = np.random.default_rng(seed)
    R = spec.state_bound + 1.0
    xs = _sample_state_ball(rng, spec.n, R, sample_count)
    xh = _sample_state_ball(rng, spec.n, R, sample_count)
    us = _control_samples(spec, rng, sample_count)
    uh = _control_samples(spec, rng, sample_count)

    lx = lu = lg = growth = 0.0
    for x, y, u, v in zip(xs, xh, us, uh):
        dx = np.linalg.norm(x - y)
        fx = eval_dynamics(spec, x, u)
        if dx > 0:
            lx = max(lx, np.linalg.norm(fx - eval_dynamics(spec, y, u)) / dx)
            gdiff = eval_jump(spec, x) - eval_jump(spec, y)
            lg = max(lg, np.linalg.norm(gdiff, 2) / dx)
        du = np.linalg.norm(u - v)
        if du > 0:
            lu = max(lu, np.linalg.norm(fx - eval_dynamics(spec, x, v)) / du)
        nx = 1.0 + np.linalg.norm(x)
        growth = max(growth, np.linalg.norm(fx) / nx, np.linalg.norm(eval_jump(spec, x), 2) / nx)

    def inflate(v):
        return max(1.0, 1.5 * v)

    return RegularityConstants(inflate(max(lx, lu)), inflate(lg), inflate(growth))


def analytic_constants(spec):
    """Closed-form K', K'', K1 from the family registry (clamped below by 1)."""
    kp, kpp, k1 = spec.family.analytic_constants(spec.beta_max)
    return RegularityConstants(max(1.0, kp), max(1.0, kpp), max(1.0, k1))


def validate(spec, samples=64, seed=0):
    """List violated well-posedness requirements; empty when the problem is usable."""
    out = []
    if spec.n < 1 or spec.q < 1 or spec.m < 0:
        out.append("dimensions must satisfy n >= 1, m >= 0, q >= 1")
        return out
    if not spec.horizon > 0:
        out.append("horizon must be positive")
    if not 0.0 < spec.omega < 1.0:
        out.append("omega must lie in (0,1)")
    if not spec.beta_max > 0:
        out.append("beta_max must be positive")
    if not spec.state_bound > 0:
        out.append("state bound must be positive")
    if spec.theta_rank is not None and not spec.theta_rank >= spec.horizon:
        out.append("theta rank must be at least the horizon")
    if spec.initial_set.dim != spec.n:
        out.append("initial set dimension differs from state dimension")
    elif spec.initial_set.is_empty():
        out.append("initial set is empty")
    if spec.control_set.dim != spec.m:
        out.append("control set dimension differs from control dimension")
    elif spec.m > 0:
        if spec.control_set.is_empty():
            out.append("control set is empty")
        elif not spec.control_set.is_bounded():
            out.append("control set must be compact")
        elif spec.control_set.inf_radius() > spec.omega * spec.beta_max * (1 + 1e-12):
            out.append("control set exceeds bound omega*beta_max")
    if out:
        return out

    rng = np.random.default_rng(seed)
    R = spec.state_bound + 1.0
    xs = _sample_state_ball(rng, spec.n, R, samples)
    xs[0] = 0.0
    us = _control_samples(spec, rng, 2 * samples)
    alphas = rng.uniform(size=samples)
    try:
        for x, u1, u2, a in zip(xs, us[:samples], us[samples:], alphas):
            lhs = eval_dynamics(spec, x, a * u1 + (1 - a) * u2)
            rhs = a * eval_dynamics(spec, x, u1) + (1 - a) * eval_dynamics(spec, x, u2)
            if np.linalg.norm(lhs - rhs) > 1e-10 * (1 + np.linalg.norm(rhs)):
                out.append("dynamics is not linear in the control")
                break
            eval_jump(spec, x)
            v = spec.cost.value(x, x)
            if not np.isfinite(v):
                out.append("cost is not finite on the state box")
                break
    except InvalidField as exc:
        out.append(str(exc))
    return out


# ---------------------------------------------------------------------------
# configuration documents

_VEC = {"type": "array", "items": {"type": "number"}}
_MAT = {"type": "array", "items": _VEC}
_SET = {
    "oneOf": [
        {"type": "object", "required": ["type", "lower", "upper"],
         "properties": {"type": {"const": "box"}, "lower": _VEC, "upper": _VEC}},
        {"type": "object", "required": ["type", "center", "radius"],
         "properties": {"type": {"const": "ball"}, "center": _VEC, "radius": {"type": "number"}}},
    ]
}

PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["dims", "horizon", "family", "family_params", "cost", "initial_set",
                 "control_set", "beta_max", "omega", "state_bound"],
    "additionalProperties": False,
    "properties": {
        "dims": {"type": "object", "required": ["n", "m", "q"],
                 "properties": {k: {"type": "integer", "minimum": 0} for k in "nmq"}},
        "horizon": {"type": "number"},
        "family": {"enum": sorted(FAMILIES)},
        "family_params": {"type": "object"},
        "cost": {"type": "object", "required": ["type"],
                 "properties": {"type": {"enum": sorted(COSTS)}, "target": _VEC,
                                "weight": _MAT, "initial_target": _VEC,
                                "initial_weight": _MAT, "scale": {"type": "number"}}},
        "initial_set": _SET,
        "control_set": _SET,
        "beta_max": {"type": "number"},
        "omega": {"type": "number"},
        "state_bound": {"type": "number"},
        "theta_rank": {"type": "number"},
    },
}


def _schema_error(exc, prefix):
    path = "/".join(str(p) for p in (prefix, *exc.absolute_path) if p != "")
    return ConfigError(f"key '{path or '<root>'}': {exc.message}")


def problem_from_dict(doc, key_prefix="problem"):
    """Build a ProblemSpec from a document; off-schema input raises ConfigError."""
    try:
        jsonschema.validate(doc, PROBLEM_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise _schema_error(exc, key_prefix) from None
    n, m, q = doc["dims"]["n"], doc["dims"]["m"], doc["dims"]["q"]
    params = dict(doc["family_params"])
    try:
        family = FAMILIES[doc["family"]](n, m, q, **params)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key '{key_prefix}/family_params': {exc}") from None
    cdoc = dict(doc["cost"])
    ctype = cdoc.pop("type")
    try:
        cost = COSTS[ctype](n, **cdoc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"key '{key_prefix}/cost': {exc}") from None
    return ProblemSpec(
        state_dim=n, control_dim=m, measure_dim=q, horizon=float(doc["horizon"]),
        family=family, cost=cost, initial_set=make_set(doc["initial_set"]),
        control_set=make_set(doc["control_set"]), beta_max=float(doc["beta_max"]),
        omega=float(doc["omega"]), state_bound=float(doc["state_bound"]),
        family_name=doc["family"],
        theta_rank=None if "theta_rank" not in doc else float(doc["theta_rank"]),
    )


def load_json(path):
    """Parse a JSON document, reporting the line/column of syntax errors."""
    with open(path) as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_problem(path):
    doc = load_json(path)
    if "problem" in doc:
        return problem_from_dict(doc["problem"])
    return problem_from_dict(doc, key_prefix="")
