import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from impulsegc.graphc import ConsistencyError, build, pi_map, push_forward
from impulsegc.measure import (
    Atom,
    AtomProfile,
    PiecewiseLinearMeasure,
    VectorMeasure,
    distribution_function,
    total_variation,
)
from impulsegc.metrics import DecisionPoint
from impulsegc.sim import reference_solve

from conftest import atom_measure, atom_point, no_control, scalar_problem

measures = st.lists(
    st.tuples(st.floats(0.0, 2.0), st.floats(0.1, 3.0)), min_size=0, max_size=4,
    unique_by=lambda a: round(a[0], 6),
).map(lambda atoms: VectorMeasure(
    2.0, 1, ac_knots=[0.0, 1.0, 2.0], ac_values=[[0.0], [0.5], [0.75]],
    atoms=[Atom.make(t, [m]) for t, m in sorted(atoms)],
))


class TestPiMap:

    def test_zero_measure_identity(self):
        assert pi_map(VectorMeasure.zero(1.0), 0.7) == pytest.approx(0.7)

    def test_unit_atom(self):
        mu = atom_measure()
        assert pi_map(mu, 0.4) == pytest.approx(0.2)
        assert pi_map(mu, 0.5, left_limit=True) == pytest.approx(0.25)
        assert pi_map(mu, 0.5) == pytest.approx(0.75)

    def test_atom_at_zero(self):
        mu = atom_measure(t=0.0)
        assert pi_map(mu, 0.0, left_limit=True) == 0.0
        assert pi_map(mu, 0.0) == pytest.approx(0.5)


class TestBuild:

    def test_unit_atom(self):
        gc = build(atom_measure())
        s = np.linspace(0, 1, 101)
        theta = np.where(s <= 0.25, 2 * s, np.where(s <= 0.75, 0.5, 2 * s - 1))
        phi = np.where(s <= 0.25, 0.0, np.where(s <= 0.75, 2 * (s - 0.25), 1.0))
        assert np.allclose(gc.theta_at(s), theta)
        assert np.allclose(gc.phi_at(s)[:, 0], phi)
        assert gc.lip_theta == pytest.approx(2.0)
        assert gc.lip_phi == pytest.approx(2.0)
        assert len(gc.atom_intervals) == 1
        assert (gc.atom_intervals[0].start, gc.atom_intervals[0].end) == pytest.approx((0.25, 0.75))

    def test_zero_measure(self):
        gc = build(VectorMeasure.zero(3.0))
        s = np.linspace(0, 1, 11)
        assert np.allclose(gc.theta_at(s), 3 * s)
        assert np.allclose(gc.phi_at(s), 0)
        assert gc.lip_theta == pytest.approx(3.0)
        assert gc.lip_phi == 0

    def test_piecewise_linear_member(self):
        knots = np.array([0.0, 0.1, 0.5, 0.6, 1.0])
        mu = PiecewiseLinearMeasure(knots, [[0], [1], [1.5], [2], [2]])
        gc = build(mu)
        s = np.linspace(0, 1, 5)
        assert np.allclose(gc.theta_at(s), knots)
        assert gc.theta_at(0.125) == pytest.approx(0.05)

    def test_profile_shapes_phi(self):
        prof = AtomProfile([0.0, 0.5, 1.0], [[2.0, 0.0], [0.0, 2.0]])
        mu = VectorMeasure(1.0, 2, atoms=[Atom.make(0.5, [1.0, 1.0], prof)])
        gc = build(mu)
        mid = 0.5 * (gc.atom_intervals[0].start + gc.atom_intervals[0].end)
        assert gc.phi_at(mid) == pytest.approx([1.0, 0.0])

    def test_csv(self, tmp_path):
        path = tmp_path / "gc.csv"
        build(atom_measure()).to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "s,theta,phi_1"
        assert len(lines) == 5

    @settings(max_examples=40, deadline=None)
    @given(measures)
    def test_invariants(self, mu):
        gc = build(mu)
        assert gc.theta[0] == 0.0 and gc.theta[-1] == mu.horizon
        assert np.all(np.diff(gc.theta) >= 0)
        assert gc.phi[-1] == pytest.approx(mu.distribution().values[-1])
        total = sum(iv.end - iv.start for iv in gc.atom_intervals)
        atomic = sum(a.variation for a in mu.atoms)
        assert total == pytest.approx(atomic / (mu.horizon + total_variation(mu)))
        for iv, atom in zip(gc.atom_intervals, mu.atoms):
            assert gc.theta_at(np.linspace(iv.start, iv.end, 7)) == pytest.approx(atom.time)
            inc = gc.phi_at(iv.end) - gc.phi_at(iv.start)
            assert inc == pytest.approx(atom.value)

    @settings(max_examples=40, deadline=None)
    @given(measures, st.floats(0.0, 2.0))
    def test_round_trip(self, mu, t):
        if any(abs(a.time - t) < 1e-9 for a in mu.atoms):
            return
        gc = build(mu)
        s = pi_map(mu, t)
        assert gc.theta_at(s) == pytest.approx(t, abs=1e-12)
        assert gc.phi_at(s) == pytest.approx(distribution_function(mu, t), abs=1e-12)


class TestPushForward:

    def test_identity_without_measure(self):
        spec = scalar_problem(A=1.0, x0=1.0, L=10)
        eta = DecisionPoint([1.0], no_control(), VectorMeasure.zero(1.0))
        y = reference_solve(spec, eta)
        x = push_forward(y, eta.impulse, t_grid=[0.0, 0.3, 1.0])
        assert np.allclose(x.x[:, 0], y(x.t)[:, 0])

    def test_unit_jump(self):
        spec = scalar_problem()
        eta = atom_point()
        y = reference_solve(spec, eta)
        x = push_forward(y, eta.impulse, t_grid=[0.4, 0.5])
        assert x.x[:, 0] == pytest.approx([0.0, 1.0], abs=1e-10)
        assert x.jump_at(0.5) == pytest.approx([1.0], abs=1e-10)
        assert x.x_left[0.5] == pytest.approx([0.0], abs=1e-10)

    def test_multiplicative_atom(self):
        spec = scalar_problem(G=0.0, H=1.0, x0=1.0, L=10)
        eta = atom_point(x0=1.0)
        y = reference_solve(spec, eta, tol=1e-12)
        x = push_forward(y, eta.impulse, t_grid=[0.5])
        assert x.x[0, 0] == pytest.approx(np.e, rel=1e-9)

    def test_inconsistent_measure(self):
        spec = scalar_problem()
        y = reference_solve(spec, atom_point())
        with pytest.raises(ConsistencyError):
            push_forward(y, atom_measure(mass=2.0))
