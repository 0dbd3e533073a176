import io

import numpy as np
import pytest

from hyperembed import kernels
from hyperembed.embed import lhydra, optimize_curvature
from hyperembed.geometry import lift, random_hyperbolic_points
from hyperembed.graph import DistanceBlocks
from hyperembed.optimize import CONVERGED, MAXITER, lbfgs
from hyperembed.stress import (StressProblem, landmark_objective, lhydra_plus, minimize_landmark_stress,
                               minimize_nonlandmark_stress, point_stress, ree, refine, rmse, stress_gradient,
                               stress_value, write_convergence_log)
from hyperembed.synth import synthetic_blocks

BACKENDS = ["python"] + (["compiled"] if kernels.compiled_available() else [])


def fd_gradient(f, z, h=1e-6):
    g = np.empty_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        g[k] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def test_stress_value_examples():
    X = lift(np.array([[0.0], [np.sinh(3.0)]]))
    D = DistanceBlocks(np.array([[0, 2.0], [2.0, 0]]), np.zeros((0, 2)))
    assert stress_value(X, D, 1.0) == pytest.approx(np.sqrt(2), abs=1e-12)
    P, D = synthetic_blocks(40, 2, l=5, seed=1)
    assert stress_value(P.X, D, 1.0) < 1e-6


def test_stress_homogeneous():
    P, D = synthetic_blocks(40, 2, l=5, noise=0.1, seed=1)
    s1 = stress_value(P.X, D, 1.0)
    # scaling embedded distances by c is curvature 1/c^2
    c = 1.7
    D2 = DistanceBlocks(D.D_L * c, D.D_N * c)
    assert stress_value(P.X, D2, 1.0 / c ** 2) == pytest.approx(c * s1, rel=1e-10)


def test_rmse_and_ree():
    assert rmse(0.0, 5) == 0
    assert rmse(np.sqrt(2), 2) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        rmse(1.0, 0)
    assert ree(0.0, [1, 2]) == 0
    assert ree(1.0, [1, 3]) == pytest.approx(0.5)
    assert ree(1.0, 4.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        ree(1.0, [0, 0])


def test_gradient_zero_at_exact_match():
    P = random_hyperbolic_points(6, 2, seed=2)
    x, anchors = P.X[0], P.X[1:]
    targets = np.arccosh(np.maximum(anchors[:, 0] * x[0] - anchors[:, 1:] @ x[1:], 1.0))
    assert np.abs(stress_gradient(x[1:], anchors, targets)).max() < 1e-10
    apex = np.array([[1.0, 0.0, 0.0]])
    assert np.array_equal(stress_gradient(np.zeros(2), apex, np.zeros(1)), np.zeros(2))


def test_gradient_accepts_pairs():
    P = random_hyperbolic_points(4, 2, seed=3)
    pairs = [(P.X[1], 0.5), (P.X[2], 1.5), (P.X[3], 0.7)]
    g1 = stress_gradient(P.X[0, 1:], pairs, kappa=1.3)
    g2 = stress_gradient(P.X[0, 1:], P.X[1:], [0.5, 1.5, 0.7], kappa=1.3)
    assert np.array_equal(g1, g2)


@pytest.mark.parametrize("backend", BACKENDS)
def test_gradient_matches_finite_differences(backend, rng):
    k = kernels.get_backend(backend)
    for _ in range(50):
        d = int(rng.integers(1, 6))
        anchors = lift(rng.normal(size=(int(rng.integers(1, 10)), d)))
        targets = rng.uniform(0, 4, size=anchors.shape[0])
        sk = np.sqrt(rng.uniform(0.2, 5))
        z = rng.normal(size=d)
        f, g = k.point_stress(z, anchors, targets, sk)
        fd = fd_gradient(lambda w: k.point_stress(w, anchors, targets, sk)[0], z)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-8)


def test_landmark_objective_gradient(rng):
    P, D = synthetic_blocks(12, 2, l=12, noise=0.3, seed=6)
    z = P.X[:, 1:].ravel() + 0.1 * rng.normal(size=24)
    f, g = landmark_objective(z, D.D_L, 1.0)
    fd = fd_gradient(lambda w: landmark_objective(w, D.D_L, 1.0)[0], z)
    assert np.linalg.norm(g - fd) <= 1e-6 * np.linalg.norm(fd)
    # ordered pairs: value is twice the unordered sum
    X = lift(z.reshape(12, 2))
    assert f == pytest.approx(stress_value(X, D, 1.0) ** 2, rel=1e-12)


def test_lbfgs_rosenbrock():
    def rosen(x):
        f = (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2
        g = np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])
        return f, g
    res = lbfgs(rosen, np.array([-1.2, 1.0]), gtol=1e-8, maxiter=1000, record=True)
    assert res.status == CONVERGED and np.allclose(res.x, [1, 1], atol=1e-6)
    fs = [f for _, f, _ in res.history]
    assert all(b <= a for a, b in zip(fs, fs[1:]))
    short = lbfgs(rosen, np.array([-1.2, 1.0]), maxiter=3)
    assert short.status == MAXITER and short.f <= short.f0


def _problem(noise, seed=0, n=200, l=20, d=2):
    P, D = synthetic_blocks(n, d, l=l, noise=noise, seed=seed)
    start, _ = optimize_curvature(D, d)
    return P, D, StressProblem(D, start.kappa, start)


def test_landmark_stage_exact_input_unchanged():
    P, D = synthetic_blocks(40, 2, l=8, seed=2)
    res = lhydra(D, 2, 1.0)
    stage = minimize_landmark_stress(StressProblem(D, 1.0, res))
    assert np.abs(stage.X - res.X_L).max() < 1e-6
    assert stage.f_final <= stage.f_initial


def test_landmark_stage_decreases_noisy():
    _, D, prob = _problem(0.1)
    stage = minimize_landmark_stress(prob)
    assert stage.f_final < stage.f_initial
    fs = [f for _, f, _ in stage.history]
    assert all(b <= a for a, b in zip(fs, fs[1:]))
    norms = stage.X[:, 0] ** 2 - np.sum(stage.X[:, 1:] ** 2, axis=1)
    assert np.abs(norms - 1).max() < 1e-12


@pytest.mark.parametrize("backend", BACKENDS)
def test_single_point_recovery(backend, rng):
    k = kernels.get_backend(backend)
    P = random_hyperbolic_points(5, 3, seed=4)
    anchors, truth = P.X[:5], lift(rng.normal(size=(1, 3)) * 0.5)
    targets = np.arccosh(np.maximum(truth @ np.diag([1, -1, -1, -1]) @ anchors.T, 1.0))
    Z, f0, f1, iters, status = k.refine_points(anchors, np.ascontiguousarray(targets),
                                               truth[:, 1:] + rng.normal(size=(1, 3)) * 0.3, 1.0,
                                               1e-10, 500, 10, 1)
    assert np.abs(Z[0] - truth[0, 1:]).max() < 1e-4
    assert f1[0] <= f0[0]


def test_nonlandmark_stage_order_independent():
    _, D, prob = _problem(0.1, seed=3)
    s1 = minimize_landmark_stress(prob)
    a = minimize_nonlandmark_stress(prob, s1.X)
    perm = np.random.default_rng(0).permutation(D.m)
    D2 = DistanceBlocks(D.D_L, D.D_N[perm])
    start2 = lhydra(D2, 2, prob.kappa)
    b = minimize_nonlandmark_stress(StressProblem(D2, prob.kappa, start2), s1.X)
    assert np.abs(a.X[perm] - b.X).max() < 1e-10
    assert a.f_final == pytest.approx(b.f_final, rel=1e-10)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled core not built")
def test_backends_agree_on_refinement():
    _, D, prob = _problem(0.2, seed=5)
    s1 = minimize_landmark_stress(prob)
    a = minimize_nonlandmark_stress(prob, s1.X, backend="python")
    b = minimize_nonlandmark_stress(prob, s1.X, backend="compiled")
    assert np.abs(a.X - b.X).max() < 1e-9
    assert np.array_equal(a.status, b.status)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled core not built")
def test_refinement_thread_count_independent(monkeypatch):
    _, D, prob = _problem(0.2, seed=5)
    s1 = minimize_landmark_stress(prob)
    monkeypatch.setenv("HYPEREMBED_THREADS", "1")
    a = minimize_nonlandmark_stress(prob, s1.X, backend="compiled")
    monkeypatch.setenv("HYPEREMBED_THREADS", "4")
    b = minimize_nonlandmark_stress(prob, s1.X, backend="compiled")
    assert np.array_equal(a.X, b.X)


def test_lhydra_plus_exact_data_unchanged():
    P, D = synthetic_blocks(60, 2, l=6, seed=8)
    base = lhydra(D, 2, 1.0)
    plus = lhydra_plus(D, 2, [1.0])
    assert np.abs(plus.X - base.X).max() < 1e-6


def test_lhydra_plus_improves_and_is_deterministic():
    P, D = synthetic_blocks(300, 2, l=25, noise=0.1, seed=1)
    a = lhydra_plus(D, 2)
    b = lhydra_plus(D, 2)
    assert np.array_equal(a.X, b.X)
    r = a.refinement
    assert r["ree_after"] <= r["ree_before"]
    assert r["stress_after"] <= r["stress_before"]
    assert a.method == "lhydra-plus" and a.projected
    assert {"refine_landmarks", "refine_nonlandmarks", "eigen"} <= set(a.wall_times)
    buf = io.StringIO()
    write_convergence_log(r["convergence_log"], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "stage,iteration,stress,grad_norm"
    assert lines[1].startswith("landmark,0,") and lines[-1].startswith("nonlandmark,")


def test_stress_problem_checks_partition():
    P, D = synthetic_blocks(30, 2, l=5, seed=0)
    res = lhydra(D, 2, 1.0)
    P2, D2 = synthetic_blocks(30, 2, l=6, seed=0)
    with pytest.raises(ValueError):
        StressProblem(D2, 1.0, res)
    with pytest.raises(ValueError):
        StressProblem(D, -1.0, res)
    r = refine(StressProblem(D, 1.0, res))
    assert r.kappa == 1.0
    assert point_stress(np.zeros(2), np.array([[1.0, 0, 0]]), [0.0])[0] == 0.0
