"""Vector measures on [0, T] with values in the nonnegative orthant.

A measure is an absolutely continuous part with a piecewise-linear
distribution function plus a finite list of atoms, each carrying an atom
profile (how the jump unfolds along the graph completion).  Variation is the
l1 variation across coordinates, which for nonnegative measures is the
coordinate sum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain of the function."""


# ---------------------------------------------------------------------------
# piecewise-linear functions with jumps


class StepLinear:
    """Right-continuous piecewise-linear map on [0, T] with jumps.

    Breakpoints ``t`` are nondecreasing; a repeated breakpoint encodes a jump
    (left value first, right value last).  Values have shape ``(len(t), d)``.
    """

    def __init__(self, t, values):
        self.t = np.asarray(t, float)
        self.values = np.asarray(values, float).reshape(self.t.size, -1)

    def __call__(self, t, left=False):
        scalar = np.ndim(t) == 0
        out = self.evaluate(np.atleast_1d(np.asarray(t, float)), left)
        return out[0] if scalar else out

    def evaluate(self, t, left=False):
        tt, vv = self.t, self.values
        last = tt.size - 1
        if left:
            i = np.searchsorted(tt, t, side="left")
            a = np.clip(i - 1, 0, last - 1)
        else:
            i = np.searchsorted(tt, t, side="right") - 1
            a = np.clip(i, 0, last - 1)
        b = a + 1
        span = tt[b] - tt[a]
        w = np.where(span > 0, (t - tt[a]) / np.where(span > 0, span, 1.0), 1.0)
        w = np.clip(w, 0.0, 1.0)
        out = vv[a] + w[:, None] * (vv[b] - vv[a])
        if left:
            out[i == 0] = 0.0
        else:
            out[i < 0] = 0.0
        out[t > tt[-1]] = vv[-1]
        return out

    def pieces(self, other):
        """Merged open intervals (a, b) and the one-sided values of both maps there."""
        grid = np.union1d(self.t, other.t)
        a, b = grid[:-1], grid[1:]
        keep = b > a
        a, b = a[keep], b[keep]
        fa, fb = self.evaluate(a), self.evaluate(b, left=True)
        ga, gb = other.evaluate(a), other.evaluate(b, left=True)
        return a, b, fa, fb, ga, gb

    def integrate_abs_diff(self, other, transform=None):
        """Exact integral of |P(self - other)| with P an optional linear map."""
        a, b, fa, fb, ga, gb = self.pieces(other)
        if a.size == 0:
            return 0.0
        p = fa - ga
        e = fb - gb
        if transform is not None:
            p = p @ transform.T
            e = e @ transform.T
        return float(np.sum(norm_affine_integral(p, (e - p), b - a)))


def norm_affine_integral(p, dv, length):
    """Integral over [0, L] of |p + (tau/L) dv| for each row, in closed form."""
    p = np.atleast_2d(p)
    dv = np.atleast_2d(dv)
    length = np.broadcast_to(np.asarray(length, float), (p.shape[0],))
    v = dv / length[:, None]
    A = np.sum(v * v, axis=1)
    Bh = np.sum(p * v, axis=1)
    pn = np.linalg.norm(p, axis=1)
    out = length * pn
    nz = A > 1e-300
    if np.any(nz):
        An, Bn, Ln = A[nz], Bh[nz], length[nz]
        pp, vv = p[nz], v[nz]
        # |p|^2|v|^2 - (p.v)^2 via the wedge product keeps k >= 0
        d = pp.shape[1]
        cross = np.zeros(An.size)
        for i in range(d):
            for j in range(i + 1, d):
                cross += (pp[:, i] * vv[:, j] - pp[:, j] * vv[:, i]) ** 2
        k = cross / (An * An)
        u0 = Bn / An
        u1 = Ln + u0
        out[nz] = np.sqrt(An) * (_prim(u1, k) - _prim(u0, k))
    return out


def _prim(u, k):
    res = 0.5 * u * np.abs(u)
    pos = k > 0
    if np.any(pos):
        up, kp = u[pos], k[pos]
        res[pos] = 0.5 * (up * np.sqrt(up * up + kp) + kp * np.arcsinh(up / np.sqrt(kp)))
    return res


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True)
class AtomProfile:
    """Piecewise-constant psi: [0, 1] -> K, one row of ``values`` per piece."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, float)
        vals = np.atleast_2d(np.asarray(self.values, float))
        if bp.ndim != 1 or bp.size < 2 or bp[0] != 0.0 or bp[-1] != 1.0:
            raise ValueError("profile breakpoints must partition [0, 1]")
        if np.any(np.diff(bp) <= 0):
            raise ValueError("profile breakpoints must be strictly increasing")
        if vals.shape[0] != bp.size - 1:
            raise ValueError("one profile value per piece")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value):
        return cls(np.array([0.0, 1.0]), np.atleast_2d(np.asarray(value, float)))

    @property
    def q(self):
        return self.values.shape[1]

    def integral(self):
        return np.diff(self.breakpoints) @ self.values

    def cumulative(self):
        """Integral of psi from 0 up to each breakpoint."""
        return np.vstack([np.zeros(self.q), np.cumsum(np.diff(self.breakpoints)[:, None] * self.values, axis=0)])


@dataclass(frozen=True)
class Atom:
    time: float
    value: np.ndarray
    profile: AtomProfile

    @classmethod
    def make(cls, time, value, profile=None):
        value = np.atleast_1d(np.asarray(value, float))
        return cls(float(time), value, profile or AtomProfile.constant(value))

    @property
    def variation(self):
        return float(np.sum(self.value))


class VectorMeasure:
    """mu = mu_ac + sum_i mu({t_i}) delta_{t_i} with values in R_+^q.

    ``ac_knots`` / ``ac_values`` give the distribution function of the
    absolutely continuous part at its knots (first knot 0 with value 0, last
    knot T); ``None`` means no continuous part.
    """

    def __init__(self, horizon, q, ac_knots=None, ac_values=None, atoms=()):
        self.horizon = float(horizon)
        self.q = int(q)
        if ac_knots is None:
            ac_knots = [0.0, self.horizon]
            ac_values = np.zeros((2, self.q))
        self.ac_knots = np.asarray(ac_knots, float)
        self.ac_values = np.asarray(ac_values, float).reshape(self.ac_knots.size, self.q)
        self.atoms = tuple(sorted(atoms, key=lambda a: a.time))
        self._check()

    def _check(self):
        T = self.horizon
        if not T > 0:
            raise ValueError("horizon must be positive")
        k = self.ac_knots
        if k.size < 2 or k[0] != 0.0 or k[-1] != T or np.any(np.diff(k) <= 0):
            raise ValueError("ac knots must be strictly increasing from 0 to T")
        if np.any(self.ac_values[0] != 0.0):
            raise ValueError("ac distribution function must vanish at 0")
        if np.any(np.diff(self.ac_values, axis=0) < 0):
            raise ValueError("ac increments must lie in the cone R_+^q")
        times = [a.time for a in self.atoms]
        if np.any(np.diff(times) <= 0):
            raise ValueError("atom times must be strictly increasing")
        for a in self.atoms:
            if not 0.0 <= a.time <= T:
                raise ValueError("atom time outside [0, T]")
            if a.value.shape != (self.q,) or np.any(a.value < 0) or not np.any(a.value > 0):
                raise ValueError("atom values must lie in R_+^q without 0")
            if a.profile.q != self.q:
                raise ValueError("atom profile has wrong dimension")

    @classmethod
    def zero(cls, horizon, q=1):
        return cls(horizon, q)

    @classmethod
    def from_atoms(cls, horizon, atoms, q=None):
        atoms = [a if isinstance(a, Atom) else Atom.make(*a) for a in atoms]
        q = q or (atoms[0].value.size if atoms else 1)
        return cls(horizon, q, atoms=atoms)

    def atom_at(self, t):
        for a in self.atoms:
            if a.time == t:
                return a
        return None

    def distribution(self):
        """The distribution function F(.; mu) as a StepLinear map."""
        events = np.union1d(self.ac_knots, [a.time for a in self.atoms])
        tt, vv = [], []
        jump = np.zeros(self.q)
        ac = StepLinear(self.ac_knots, self.ac_values)
        for t in events:
            base = ac(t)
            atom = self.atom_at(t)
            if atom is not None:
                tt.append(t)
                vv.append(base + jump)
                jump = jump + atom.value
            tt.append(t)
            vv.append(base + jump)
        return StepLinear(tt, vv)

    def to_dict(self):
        return {
            "horizon": self.horizon, "q": self.q,
            "ac_knots": [[float(t), b.tolist()] for t, b in zip(self.ac_knots, self.ac_values)],
            "atoms": [{"t": a.time, "value": a.value.tolist(),
                       "profile_breakpoints": a.profile.breakpoints.tolist(),
                       "profile_values": a.profile.values.tolist()} for a in self.atoms],
        }

    @classmethod
    def from_dict(cls, doc, horizon=None, q=None):
        horizon = float(doc.get("horizon", horizon))
        atoms = []
        for a in doc.get("atoms", []):
            value = np.atleast_1d(np.asarray(a["value"], float))
            prof = None
            if "profile_breakpoints" in a:
                prof = AtomProfile(a["profile_breakpoints"], a["profile_values"])
            atoms.append(Atom.make(a["t"], value, prof))
        q = int(doc.get("q", q or (atoms[0].value.size if atoms else 1)))
        knots = doc.get("ac_knots")
        if knots:
            return cls(horizon, q, [k[0] for k in knots], [k[1] for k in knots], atoms)
        return cls(horizon, q, atoms=atoms)


class PiecewiseLinearMeasure:
    """Atom-free member of the finite family P_N, given by its completion nodes.

    ``knots`` (t_0 = 0 <= ... <= t_N = T) and ``values`` (b_0 = 0, b_k
    nondecreasing in the cone) are the graph-completion values at the uniform
    nodes s_k = k/N.  Coincident knots are merged for the distribution
    function: an interior group takes the completion value at the middle of
    its s-range, so the increment is spread over the adjacent cells.
    """

    def __init__(self, knots, values):
        self.knots = np.asarray(knots, float)
        self.values = np.asarray(values, float).reshape(self.knots.size, -1)
        self.horizon = float(self.knots[-1])
        self.q = self.values.shape[1]
        if self.knots.size < 2 or self.knots[0] != 0.0:
            raise ValueError("knots must start at 0")
        if np.any(np.diff(self.knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if np.any(self.values[0] != 0.0):
            raise ValueError("distribution values must start at 0")
        if np.any(np.diff(self.values, axis=0) < -1e-15):
            raise ValueError("increments must lie in the cone R_+^q")

    @property
    def N(self):
        return self.knots.size - 1

    def merged(self, tol=0.0):
        """Strictly increasing knots and their distribution-function values."""
        t, b, N = self.knots, self.values, self.N
        scale = tol * self.horizon
        groups = [[0]]
        for k in range(1, N + 1):
            if t[k] - t[groups[-1][0]] <= scale:
                groups[-1].append(k)
            else:
                groups.append([k])
        kt, kv = [], []
        for g in groups:
            i, j = g[0], g[-1]
            kt.append(t[i])
            if i == 0:
                kv.append(b[0])
            elif j == N:
                kv.append(b[N])
            else:
                c = (i + j) // 2
                kv.append(0.5 * (b[c] + b[c + 1]) if (j - i) % 2 else b[c])
        return np.asarray(kt), np.asarray(kv)

    def distribution(self):
        kt, kv = self.merged()
        if kt.size == 1:
            # all mass at a single knot is impossible since t_0 = 0 < T
            raise ValueError("degenerate horizon")
        return StepLinear(kt, kv)

    def to_dict(self):
        return {"knots": self.knots.tolist(), "values": self.values.tolist()}


# ---------------------------------------------------------------------------
# operations


def _check_time(mu, t):
    if not 0.0 <= t <= mu.horizon:
        raise DomainError(f"t={t} outside [0, {mu.horizon}]")


def distribution_function(mu, t, left_limit=False):
    """F(t; mu) = mu([0, t]); with ``left_limit`` the value mu([0, t)), F(0-) = 0."""
    _check_time(mu, t)
    return mu.distribution()(t, left=left_limit)


def total_variation(mu):
    """l1 total variation ||mu||."""
    return float(np.sum(mu.distribution().values[-1]))


def variation_function(mu, t, left_limit=False):
    """|mu|([0, t]) (or |mu|([0, t)) with ``left_limit``)."""
    return float(np.sum(distribution_function(mu, t, left_limit)))


def approximate(mu, gc, N):
    """P_N member sampling the graph completion at s_k = k/N.

    Knots are theta(s_k) and values phi(s_k), so the approximant's own
    completion interpolates (theta, phi) at the uniform nodes.
    """
    if N < 1 or N & (N - 1):
        raise ValueError("N must be a power of two")
    s = np.linspace(0.0, 1.0, N + 1)
    knots = gc.theta_at(s)
    values = gc.phi_at(s)
    knots[0], knots[-1] = 0.0, mu.horizon
    values[0] = 0.0
    return PiecewiseLinearMeasure(knots, np.maximum.accumulate(values, axis=0))


def validate_profile(profile, atom_value, atom_variation, tol=1e-10):
    """Check the two atom-profile conditions; returns a list of violations."""
    out = []
    atom_value = np.atleast_1d(np.asarray(atom_value, float))
    l1 = np.sum(np.abs(profile.values), axis=1)
    bad = np.flatnonzero(np.abs(l1 - atom_variation) > tol)
    if bad.size:
        out.append(f"condition (i): l1 norm of piece {int(bad[0])} is {l1[bad[0]]:g}, "
                   f"expected {atom_variation:g}")
    integ = profile.integral()
    bad = np.flatnonzero(np.abs(integ - atom_value) > tol)
    if bad.size:
        j = int(bad[0])
        out.append(f"condition (ii): integral of coordinate {j} is {integ[j]:g}, "
                   f"expected {atom_value[j]:g}")
    if np.any(profile.values < 0):
        out.append("profile leaves the cone R_+^q")
    return out
