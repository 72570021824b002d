"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also gathered into an "acceptance criteria" section at the end
of the pytest run.
"""
import itertools
import json

import numpy as np
import pytest

from impulsegc import cli, graphc, metrics, opt
from impulsegc.measure import PiecewiseLinearMeasure, approximate
from impulsegc.metrics import DecisionPoint, d_full
from impulsegc.model import estimate_constants
from impulsegc.opt import DecisionVector, SolverOptions, objective_and_gradient
from impulsegc.sim import discrete_ranks, euler_solve, growth_bound_check, reference_solve

from conftest import (
    DATA,
    atom_measure,
    atom_point,
    no_control,
    random_linear_problem,
    random_pendulum_problem,
    scalar_problem,
)
from test_metrics import brute_hausdorff, random_point
from test_opt import fd_gradient, relative_error

LEVELS = range(3, 11)


@pytest.fixture(scope="module")
def atom2():
    return scalar_problem(A=1.0, G=1.0, x0=1.0, target=0.0, L=10.0), atom_point(x0=1.0, mass=2.0)


def test_criterion_01_closed_form(atom2, verdict):
    spec, eta = atom2
    x = graphc.push_forward(reference_solve(spec, eta, tol=1e-10), eta.impulse)
    exact = np.e + 2 * np.exp(0.5)
    rel = abs(x.x[-1, 0] - exact) / exact
    verdict(1, "closed-form integration", rel < 1e-6, f"x(T) relative error {rel:.2e}")


def test_criterion_02_state_error_order(atom2, verdict):
    spec, eta = atom2
    rep = opt.error_bound_report(spec, eta, LEVELS)
    bounded = all(e <= rep.K_xi0 / N for e, N in zip(rep.e, rep.Ns))
    verdict(2, "state error order", -1.3 <= rep.slope_e <= -0.7 and bounded,
            f"slope {rep.slope_e:.3f}, K_xi0 {rep.K_xi0:.4g}")


def test_criterion_03_cost_error_order(atom2, verdict):
    spec, eta = atom2
    base = opt.error_bound_report(spec, eta, LEVELS)
    scaled = opt.error_bound_report(spec.with_cost(spec.cost.scaled(10.0)), eta, LEVELS)
    bounded = all(c <= base.K_S / N for c, N in zip(base.c, base.Ns))
    ratio = scaled.K_S / base.K_S
    verdict(3, "cost error order", bounded and abs(ratio - 10) <= 2,
            f"K_S {base.K_S:.4g}, ratio under 10x cost {ratio:.4f}")


def test_criterion_04_growth_bound(rng, verdict):
    spec = random_linear_problem(rng)
    consts = estimate_constants(spec, 1000, seed=0)
    N = 64
    violations = 0
    for _ in range(50):
        v = opt.random_decision(spec, N, rng)
        eta = v.to_point(spec.horizon)
        traj = euler_solve(spec, eta, N)
        violations += len(growth_bound_check(traj, consts.with_ranks(*discrete_ranks(eta, N))).violations)
    verdict(4, "growth bound", violations == 0, f"{violations} violations over 50 samples")


def test_criterion_05_metric_axioms(rng, verdict):
    tol = 1e-9
    failures = []
    funcs = {
        "d1": lambda a, b: metrics.d1(a.xi0, b.xi0),
        "d2": lambda a, b: metrics.d2(a.control, b.control),
        "d4": lambda a, b: metrics.d4(a.impulse, b.impulse),
        "d5": lambda a, b: metrics.d5(a.impulse, b.impulse),
    }
    for _ in range(200):
        a, b, c = (random_point(rng) for _ in range(3))
        for name, d in funcs.items():
            ab, ba, ac, bc = d(a, b), d(b, a), d(a, c), d(b, c)
            if ab < -tol or abs(ab - ba) > tol or d(a, a) > tol:
                failures.append(name)
            # d2 is a squared distance, so the triangle inequality is not expected
            if name != "d2" and ac > ab + bc + tol:
                failures.append(f"{name} triangle")
        A, B, C = (rng.normal(size=(rng.integers(1, 20), 2)) for _ in range(3))
        hab, hba = metrics.hausdorff(A, B), metrics.hausdorff(B, A)
        if hab < 0 or abs(hab - hba) > tol or metrics.hausdorff(A, A) > tol:
            failures.append("hausdorff")
        if metrics.hausdorff(A, C) > hab + metrics.hausdorff(B, C) + tol:
            failures.append("hausdorff triangle")
    verdict(5, "metric axioms", not failures, f"{len(failures)} failures over 200 triples")


def test_criterion_06_density(verdict):
    mu = atom_measure()
    gc = graphc.build(mu)
    d3 = [metrics.d3(approximate(mu, gc, 2**k), mu) for k in range(2, 11)]
    monotone = all(b <= a for a, b in zip(d3, d3[1:]))
    verdict(6, "measure density", monotone and d3[-1] < 1e-2, f"final d3 {d3[-1]:.3e}")


def test_criterion_07_optimality_function(rng, verdict):
    fast = SolverOptions(gamma_restarts=0, gamma_iter=40)
    worst = -np.inf
    for i in range(100):
        spec = random_linear_problem(rng) if i % 2 == 0 else random_pendulum_problem(rng)
        v = opt.random_decision(spec, 8, rng)
        worst = max(worst, opt.gamma_CN(v, spec, 8, fast))
    at_min = []
    for spec in (scalar_problem(), scalar_problem(L=3.0)):
        for N in (8, 32):
            res = opt.solve_level(spec, N)
            assert res.converged
            at_min.append(abs(res.gamma))
    verdict(7, "optimality function", worst <= 1e-8 and max(at_min) <= 1e-3,
            f"max gamma over 100 samples {worst:.2e}, max |gamma| at minimizers {max(at_min):.2e}")


def test_criterion_08_consistency(verdict):
    spec = scalar_problem()
    rep = opt.study(spec, range(3, 9), SolverOptions())
    d = rep.interlevel_distances
    monotone = all(b <= a + 1e-12 for a, b in zip(d, d[1:]))
    verdict(8, "consistency on impulse transfer", rep.objectives[-1] < 1e-6 and monotone,
            f"final objective {rep.objectives[-1]:.2e}, max interlevel distance {max(d):.2e}")


def test_criterion_09_graph_convergence(verdict):
    spec = scalar_problem(target=1.0, L=2.0)
    eta = atom_point()
    graph = opt.completed_graph(spec, eta)
    dist, oracle_gap = [], 0.0
    for k in range(3, 10):
        lam = opt.lambda_set(spec, eta, 2**k)
        dist.append(metrics.hausdorff(lam, graph))
        oracle_gap = max(oracle_gap, abs(dist[-1] - brute_hausdorff(lam, graph)))
    strict = all(b < a for a, b in zip(dist, dist[1:]))
    verdict(9, "graph convergence", strict and dist[-1] < 1e-2 and oracle_gap <= 1e-12,
            f"final distance {dist[-1]:.3e}, oracle gap {oracle_gap:.1e}")


def test_criterion_10_adjoint(rng, verdict):
    worst = 0.0
    for family in (random_linear_problem, random_pendulum_problem):
        for _ in range(20):
            spec = family(rng)
            v = opt.random_decision(spec, 8, rng)
            _, g = objective_and_gradient(v, spec)
            worst = max(worst, relative_error(g.flatten(), fd_gradient(v, spec)))
    verdict(10, "adjoint gradient", worst < 1e-5, f"max relative error {worst:.2e}")


def test_criterion_11_determinism(tmp_path, verdict):
    doc = json.loads((DATA / "linear_atom.json").read_text())
    doc["error_bound"]["levels"] = [3, 6]
    config = tmp_path / "config.json"
    config.write_text(json.dumps(doc))
    outs = []
    for run in ("first", "second"):
        out = tmp_path / run
        cli.main(["study", "--config", str(config), "--levels", "3..5", "--seed", "11", "--out", str(out)])
        outs.append({p.name: p.read_bytes() for p in sorted(out.glob("*.csv"))})
    same = outs[0] == outs[1] and len(outs[0]) > 0
    verdict(11, "determinism", same, f"{len(outs[0])} CSV files compared")
