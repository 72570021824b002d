from importlib.resources import files

import numpy as np
import pytest

from impulsegc.measure import Atom, VectorMeasure
from impulsegc.metrics import DecisionPoint, PiecewiseConstant
from impulsegc.model import problem_from_dict

DATA = files("impulsegc") / "data"


def scalar_problem(A=0.0, G=1.0, H=0.0, x0=0.0, target=5.0, L=6.0, T=1.0, c=0.0):
    return problem_from_dict({
        "dims": {"n": 1, "m": 0, "q": 1}, "horizon": T, "family": "linear",
        "family_params": {"A": [[A]], "G": [[G]], "H": [[H]], "c": [c]},
        "cost": {"type": "quadratic", "target": [target]},
        "initial_set": {"type": "box", "lower": [x0], "upper": [x0]},
        "control_set": {"type": "box", "lower": [], "upper": []},
        "beta_max": 20.0, "omega": 0.5, "state_bound": L,
    })


def random_linear_problem(rng, n=2, m=1, q=2, L=20.0, T=1.0):
    return problem_from_dict({
        "dims": {"n": n, "m": m, "q": q}, "horizon": T, "family": "linear",
        "family_params": {
            "A": (0.5 * rng.normal(size=(n, n))).tolist(),
            "c": (0.2 * rng.normal(size=n)).tolist(),
            "B": rng.normal(size=(n, m)).tolist(),
            "G": rng.normal(size=(n, q)).tolist(),
            "H": (0.3 * rng.normal(size=(n, q))).tolist(),
        },
        "cost": {"type": "quadratic", "target": rng.normal(size=n).tolist(),
                 "initial_target": rng.normal(size=n).tolist(),
                 "initial_weight": np.eye(n).tolist()},
        "initial_set": {"type": "box", "lower": [-1.0] * n, "upper": [1.0] * n},
        "control_set": {"type": "box", "lower": [-1.0] * m, "upper": [1.0] * m},
        "beta_max": 4.0, "omega": 0.5, "state_bound": L,
    })


def random_pendulum_problem(rng, q=1, L=20.0, T=1.0):
    return problem_from_dict({
        "dims": {"n": 2, "m": 1, "q": q}, "horizon": T, "family": "pendulum",
        "family_params": {"a": float(rng.uniform(0.5, 2)), "damping": float(rng.uniform(0, 0.5)),
                          "b": float(rng.uniform(0.5, 1.5)),
                          "G": rng.normal(size=(2, q)).tolist(),
                          "H": (0.3 * rng.normal(size=(2, q))).tolist()},
        "cost": {"type": "quadratic", "target": rng.normal(size=2).tolist()},
        "initial_set": {"type": "ball", "center": [0.0, 0.0], "radius": 1.0},
        "control_set": {"type": "ball", "center": [0.0], "radius": 1.0},
        "beta_max": 4.0, "omega": 0.5, "state_bound": L,
    })


def atom_measure(mass=1.0, t=0.5, T=1.0):
    return VectorMeasure(T, 1, atoms=[Atom.make(t, [mass])])


def no_control():
    return PiecewiseConstant(np.array([0.0, 1.0]), np.zeros((1, 0)))


def atom_point(x0=0.0, mass=1.0, t=0.5, T=1.0):
    return DecisionPoint(np.array([x0]), no_control(), atom_measure(mass, t, T))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def transfer_spec():
    return scalar_problem()


@pytest.fixture
def linear_atom_spec():
    return scalar_problem(A=1.0, G=1.0, x0=1.0, target=0.0, L=10.0)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(number, name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {name}" + (f": {detail}" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
