import math

import numpy as np
import pytest
import scipy.linalg

from conftest import positive_lorentz_matrix
from hyperembed import metrics
from hyperembed.embed import (DEFAULT_GRID, CurvatureOverflowError, CurvatureSearchError, EigenSolverError,
                              NonNegativeTrailingEigenvalue, build_landmark_coords, build_nonlandmark_coords,
                              cosh_transform, known_pair_ree, lhydra, optimize_curvature,
                              reduced_eigendecomposition)
from hyperembed.geometry import (PointConfiguration, distances_from_products, lorentz_gram,
                                 pairwise_distance_matrix)
from hyperembed.graph import DistanceBlocks, LandmarkSet, landmark_distance_blocks, load_edge_list
from hyperembed.synth import synthetic_blocks

J = lambda d: np.diag([1.0] + [-1.0] * d)  # noqa: E731


def blocks_from_points(X, l, kappa=1.0):
    U = lorentz_gram(X[:l])
    D_L = distances_from_products(0.5 * (U + U.T), kappa)
    np.fill_diagonal(D_L, 0.0)
    return DistanceBlocks(D_L, distances_from_products(lorentz_gram(X[l:], X[:l]), kappa))


def test_cosh_transform_examples():
    D = DistanceBlocks(np.array([[0, 2.0], [2.0, 0]]), np.array([[1.0, 0.5]]))
    G = cosh_transform(D, 1.0)
    assert G.A_L[0, 0] == 1.0
    assert G.A_L[0, 1] == pytest.approx(3.7621956911, abs=1e-9)
    G4 = cosh_transform(DistanceBlocks(D.D_L / 2, D.D_N / 2), 4.0)
    assert np.allclose(G4.A_L, G.A_L, rtol=1e-15) and np.allclose(G4.A_N, G.A_N, rtol=1e-15)


def test_cosh_transform_overflow():
    D = DistanceBlocks(np.array([[0, 800.0], [800.0, 0]]), np.zeros((0, 2)))
    with pytest.raises(CurvatureOverflowError, match="smaller kappa"):
        cosh_transform(D, 1.0)


def test_two_by_two_eigenpairs():
    c = math.cosh(1)
    E = reduced_eigendecomposition(np.array([[1, c], [c, 1]]), 1)
    assert E.lambda_top == pytest.approx(1 + c, abs=1e-12)
    assert E.lambda_bottom[0] == pytest.approx(1 - c, abs=1e-12)
    assert np.allclose(E.q_top, [1 / math.sqrt(2)] * 2, atol=1e-12)
    assert np.allclose(np.abs(E.Q_bottom[:, 0]), [1 / math.sqrt(2)] * 2, atol=1e-12)
    X = build_landmark_coords(E, 1)
    a, b = math.sqrt(1 + c) / math.sqrt(2), math.sqrt(c - 1) / math.sqrt(2)
    assert np.allclose(np.abs(X), [[a, b], [a, b]], atol=1e-12)
    assert X[0, 1] == pytest.approx(-X[1, 1])


def test_identity_rejected_downstream():
    E = reduced_eigendecomposition(np.eye(4), 2)
    with pytest.raises(NonNegativeTrailingEigenvalue) as info:
        build_landmark_coords(E, 2)
    assert info.value.max_dim == 0


def test_repeated_top_eigenvalue_reported():
    # two disconnected identical blocks: lambda_1 has multiplicity 2
    B = np.array([[1.0, 3.0], [3.0, 1.0]])
    A = scipy.linalg.block_diag(B, B)
    E = reduced_eigendecomposition(A, 1)
    with pytest.raises(EigenSolverError, match="not simple"):
        build_landmark_coords(E, 1)


def test_dense_and_iterative_agree(rng):
    P, D = synthetic_blocks(600, 3, l=300, noise=0.2, seed=4)
    A = cosh_transform(D, 1.0).A_L
    Ed = reduced_eigendecomposition(A, 3, "dense")
    Ei = reduced_eigendecomposition(A, 3, "iterative")
    assert Ed.lambda_top == pytest.approx(Ei.lambda_top, rel=1e-10)
    assert np.allclose(Ed.lambda_bottom, Ei.lambda_bottom, rtol=1e-8)
    assert np.allclose(Ed.q_top, Ei.q_top, atol=1e-8)
    assert np.allclose(Ed.Q_bottom, Ei.Q_bottom, atol=1e-7)
    assert Ed.strain_residual == pytest.approx(Ei.strain_residual, rel=1e-8)


def test_eigenpairs_against_full_oracle(rng):
    for l in (5, 40, 300):
        Z = rng.uniform(0.1, 3.0, size=(l, l))
        A = np.cosh(Z + Z.T)
        np.fill_diagonal(A, 1.0)
        w, V = np.linalg.eigh(A)
        E = reduced_eigendecomposition(A, 2)
        assert E.lambda_top == pytest.approx(w[-1], rel=1e-12)
        assert np.allclose(E.lambda_bottom, w[:2][::-1], rtol=1e-8, atol=1e-8 * w[-1])
        assert np.all(E.q_top > 0)
        basis = np.column_stack([E.q_top, E.Q_bottom])
        assert np.allclose(basis.T @ basis, np.eye(3), atol=1e-10)
        for k in range(2):
            col = E.Q_bottom[:, k]
            assert col[np.argmax(np.abs(col))] > 0


def test_residual_identity(rng):
    for _ in range(10):
        l, d = int(rng.integers(4, 12)), int(rng.integers(1, 3))
        Z = rng.uniform(0.2, 2.0, size=(l, l))
        A = np.cosh(Z + Z.T)
        np.fill_diagonal(A, 1.0)
        E = reduced_eigendecomposition(A, d)
        try:
            X = build_landmark_coords(E, d)
        except NonNegativeTrailingEigenvalue:
            continue
        R = A - X @ J(d) @ X.T
        assert np.sum(R * R) == pytest.approx(E.strain_residual, abs=1e-8)


def test_lhydra_exact_recovery_small():
    P, D = synthetic_blocks(50, 3, l=5, seed=11)
    res = lhydra(D, 3, 1.0)
    PointConfiguration(res.X, on_hyperboloid=True)
    assert res.strain_residual < 1e-9
    err = np.abs(pairwise_distance_matrix(res.X) - pairwise_distance_matrix(P))
    assert err.max() < 1e-6
    assert np.all(res.X[:, 0] > 0)


def test_lhydra_nonlandmarks_solve_normal_equations(rng):
    P, D = synthetic_blocks(80, 2, l=10, noise=0.3, seed=2)
    res = lhydra(D, 2, 1.0, project=False)
    G = cosh_transform(D, 1.0)
    Jd = J(2)
    # gradient of ||A_N - X_N J X_L^T||^2 in X_N
    grad = -2 * (G.A_N - res.X_N @ Jd @ res.X_L.T) @ res.X_L @ Jd
    assert np.abs(grad).max() < 1e-8 * np.abs(G.A_N).max() * np.abs(res.X_L).max()


def test_consistency_reembedding_landmarks(rng):
    P, D = synthetic_blocks(30, 2, l=8, noise=0.2, seed=5)
    G = cosh_transform(D, 0.8)
    E = reduced_eigendecomposition(G.A_L, 2)
    X_L = build_landmark_coords(E, 2)
    assert np.allclose(build_nonlandmark_coords(G.A_L, E, 2), X_L, atol=1e-9)
    assert build_nonlandmark_coords(np.zeros((0, 8)), E, 2).shape == (0, 3)


def test_lhydra_path_graph():
    g = load_edge_list(b"0 1\n1 2\n")
    D = landmark_distance_blocks(g, LandmarkSet([0, 2]))
    res = lhydra(D, 1, 1.0)
    assert res.X.shape == (3, 2)
    assert metrics.landmark_sums(res.X_L, D.D_L, 1.0).ree() < 0.05


def test_lhydra_dimension_checks():
    P, D = synthetic_blocks(20, 2, l=4, seed=0)
    with pytest.raises(ValueError):
        lhydra(D, 20, 1.0)
    with pytest.raises(ValueError):
        lhydra(D, 4, 1.0)
    with pytest.raises(ValueError):
        lhydra(D, 0, 1.0)


def test_lhydra_too_many_dimensions_for_spectrum():
    # points on a hyperbolic line have only one negative eigenvalue
    P, D = synthetic_blocks(20, 1, l=6, seed=1)
    with pytest.raises(NonNegativeTrailingEigenvalue) as info:
        lhydra(D, 3, 1.0)
    assert info.value.max_dim == 1


def test_isometry_invariance(rng):
    P, _ = synthetic_blocks(60, 3, l=6, seed=9)
    T = positive_lorentz_matrix(3, rng)
    D1 = blocks_from_points(P.X, 6)
    D2 = blocks_from_points(P.X @ T.T, 6)
    a = pairwise_distance_matrix(lhydra(D1, 3).X)
    b = pairwise_distance_matrix(lhydra(D2, 3).X)
    assert np.abs(a - b).max() < 1e-8


def test_optimize_curvature_selects_generating_kappa():
    P, D = synthetic_blocks(120, 2, l=6, seed=3)
    best, table = optimize_curvature(D, 2, [0.5, 1.0, 2.0])
    assert best.kappa == 1.0
    assert [row["kappa"] for row in table] == [0.5, 1.0, 2.0]
    assert table[1]["ree"] < 1e-6
    best, table = optimize_curvature(D, 2, [1.0])
    assert best.kappa == 1.0 and known_pair_ree(best, D) < 1e-6 and len(table) == 1


def test_optimize_curvature_default_grid():
    assert len(DEFAULT_GRID) == 16
    assert DEFAULT_GRID[0] == pytest.approx(0.125) and DEFAULT_GRID[-1] == pytest.approx(8.0)
    ratios = np.diff(np.log(DEFAULT_GRID))
    assert np.allclose(ratios, ratios[0])


def test_optimize_curvature_all_fail():
    P, D = synthetic_blocks(20, 1, l=6, seed=1)
    with pytest.raises(CurvatureSearchError) as info:
        optimize_curvature(D, 3, [0.5, 1.0])
    assert len(info.value.table) == 2 and info.value.max_dim >= 1


def test_optimize_curvature_ties_go_to_smaller_kappa():
    # with two landmarks and one non-landmark every curvature fits exactly
    D = DistanceBlocks(np.array([[0, 2.0], [2.0, 0]]), np.array([[1.0, 1.0]]))
    best, table = optimize_curvature(D, 1, [0.5, 1.0, 2.0])
    rees = [row["ree"] for row in table]
    if rees[0] == min(rees):
        assert best.kappa == 0.5
    assert best.kappa == min(row["kappa"] for row in table if row["ree"] == min(rees))
