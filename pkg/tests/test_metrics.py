import numpy as np
import pytest

from impulsegc.measure import DomainError, PiecewiseLinearMeasure, VectorMeasure
from impulsegc.metrics import (
    DecisionPoint,
    PiecewiseConstant,
    combine,
    d1,
    d2,
    d4,
    d4_terms,
    d5,
    d_full,
    dbar,
    hausdorff,
)
from impulsegc import graphc

from conftest import atom_measure


def brute_hausdorff(A, B):
    D = np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(-1))
    return max(D.min(axis=1).max(), D.min(axis=0).max())


def random_point(rng, m=1, q=1):
    n_atoms = rng.integers(0, 3)
    times = np.sort(rng.choice(np.linspace(0.05, 0.95, 19), n_atoms, replace=False))
    atoms = [(t, rng.uniform(0.2, 2.0, size=q)) for t in times]
    mu = VectorMeasure.from_atoms(1.0, atoms, q=q) if atoms else VectorMeasure.zero(1.0, q)
    u = PiecewiseConstant.uniform(rng.uniform(-1, 1, size=(4, m)))
    return DecisionPoint(rng.normal(size=2), u, mu)


class TestD1D2:

    def test_d1(self):
        assert d1([0, 0], [3, 4]) == 5
        assert d1([1.5, 2], [1.5, 2]) == 0
        assert d1([2.0], [-1.0]) == 3

    def test_d1_mismatch(self):
        with pytest.raises(ValueError):
            d1([0, 0], [0, 0, 0])

    def test_d2(self):
        zero = PiecewiseConstant.constant([0.0])
        one = PiecewiseConstant.constant([1.0])
        steps = PiecewiseConstant([0, 0.5, 1], [[1.0], [3.0]])
        assert d2(zero, one) == 1
        assert d2(one, one) == 0
        assert d2(zero, steps) == pytest.approx(5.0)

    def test_d2_mismatch(self):
        with pytest.raises(ValueError):
            d2(PiecewiseConstant.constant([0.0]), PiecewiseConstant.constant([0.0, 1.0]))


class TestD4:

    def test_self_distance(self):
        mu = VectorMeasure.from_atoms(1.0, [(0.2, [1.0]), (0.7, [0.4])])
        assert d4(mu, mu) == 0

    def test_atoms_one_vs_two(self):
        mass, integral, sup = d4_terms(atom_measure(1.0), atom_measure(2.0))
        assert mass == pytest.approx(np.sqrt(2))
        assert integral == pytest.approx(0.5 * np.sqrt(2))
        # dense-grid oracle from the hand-derived completions
        t = (np.arange(100000) + 0.5) / 100000
        F1, F2 = (t >= 0.5) * 1.0, (t >= 0.5) * 2.0
        assert integral == pytest.approx(np.mean(np.sqrt(2) * np.abs(F1 - F2)), abs=1e-6)
        s = np.linspace(0, 1, 100001)
        phi1 = np.clip(2 * (s - 0.25), 0, 1)
        phi2 = np.clip(3 * (s - 1 / 6), 0, 2)
        assert sup == pytest.approx(np.max(np.sqrt(2) * np.abs(phi1 - phi2)), abs=1e-6)

    def test_zero_vs_unit_atom(self):
        mass, _, _ = d4_terms(VectorMeasure.zero(1.0), atom_measure())
        assert mass == pytest.approx(np.sqrt(2))

    def test_plain_phi_flag(self):
        a, b = atom_measure(1.0), atom_measure(2.0)
        assert d4(a, b, extended=False) < d4(a, b)

    def test_horizon_mismatch(self):
        with pytest.raises(ValueError):
            d4(VectorMeasure.zero(1.0), VectorMeasure.zero(2.0))


class TestD5:

    def test_identical(self):
        assert d5(atom_measure(), atom_measure()) == 0

    def test_atom_vs_zero(self):
        assert d5(atom_measure(), VectorMeasure.zero(1.0)) == pytest.approx(2.0)

    def test_pn_members_riemann_oracle(self):
        N = 16
        knots = np.linspace(0, 1, N + 1)
        b1 = np.linspace(0, 2, N + 1)[:, None]
        b2 = b1.copy()
        b2[5:] += 0.3
        m1, m2 = PiecewiseLinearMeasure(knots, b1), PiecewiseLinearMeasure(knots, b2)
        M = 10**6
        s = (np.arange(M) + 0.5) / M
        g1, g2 = graphc.build(m1), graphc.build(m2)
        k = np.minimum((s * N).astype(int), N - 1)
        dth = g1.theta_slopes()[k] - g2.theta_slopes()[k]
        dph = g1.phi_slopes()[k] - g2.phi_slopes()[k]
        ref = np.mean(np.abs(dth) + np.linalg.norm(dph, axis=1))
        assert d5(m1, m2) == pytest.approx(ref, abs=1e-10)

    def test_zero_d5_means_equal_graphs(self, rng):
        for _ in range(20):
            knots = np.concatenate([[0], np.sort(rng.uniform(size=7)), [1]])
            vals = np.concatenate([[0], np.cumsum(rng.uniform(size=8))])[:, None]
            m1 = PiecewiseLinearMeasure(knots, vals)
            m2 = PiecewiseLinearMeasure(knots.copy(), vals.copy())
            assert d5(m1, m2) == 0
            g1, g2 = graphc.build(m1), graphc.build(m2)
            s = np.linspace(0, 1, 1001)
            assert np.max(np.abs(g1.theta_at(s) - g2.theta_at(s))) == 0
            assert np.max(np.abs(g1.phi_at(s) - g2.phi_at(s))) == 0


class TestCombined:

    def test_self(self, rng):
        e = random_point(rng)
        assert d_full(e, e) == 0 and dbar(e, e) == 0

    def test_additivity(self):
        c = {"d1": 1, "d2": 2, "d4": 3, "d5": 4}
        assert combine(c, full=True) == 10
        assert combine(c, full=False) == 6

    def test_symmetry(self, rng):
        for _ in range(100):
            a, b = random_point(rng), random_point(rng)
            assert d_full(a, b) == pytest.approx(d_full(b, a), abs=1e-12)


class TestHausdorff:

    def test_identical(self, rng):
        A = rng.normal(size=(10, 2))
        assert hausdorff(A, A) == 0

    def test_single_points(self):
        assert hausdorff([[0, 0]], [[3, 4]]) == 5

    def test_polyline_subsample(self, rng):
        t = np.linspace(0, 1, 401)
        poly = np.column_stack([t, np.sin(6 * t) + 0.1 * rng.normal(size=t.size)])
        half = poly[::2]
        assert hausdorff(poly, half) == pytest.approx(brute_hausdorff(poly, half), abs=1e-12)

    def test_empty(self):
        with pytest.raises(DomainError):
            hausdorff(np.zeros((0, 2)), [[0, 0]])
