import io
import math

import numpy as np
import pytest

from conftest import floyd_warshall, random_connected_graph
from hyperembed.embed import lhydra, optimize_curvature
from hyperembed.evaluation import (ErrorReport, evaluate, run_method, sweep_dimensions, write_long_csv,
                                   write_plot_data)
from hyperembed.geometry import distances_from_products, lorentz_gram
from hyperembed.graph import (DistanceBlocks, LandmarkSet, counters, landmark_distance_blocks,
                              reset_counters, sample_validation_pairs, select_landmarks)
from hyperembed.synth import synthetic_blocks


def test_exact_configuration_report():
    P, D = synthetic_blocks(80, 3, l=6, seed=2)
    D = DistanceBlocks(D.D_L, D.D_N, np.arange(6), np.arange(6, 80))
    u = np.arange(6, 40)
    v = np.arange(40, 74)
    U = np.einsum("ij,ij->i", P.X[u] * [1, -1, -1, -1], P.X[v])
    from hyperembed.graph import ValidationPairs
    val = ValidationPairs(u, v, distances_from_products(U, 1.0))
    rep = evaluate(lhydra(D, 3, 1.0), D, val)
    assert rep.ree_landmark < 1e-6 and rep.ree_landmark_nonlandmark < 1e-6 and rep.ree_validation < 1e-6
    assert rep.landmark.pairs == 30 and rep.landmark_nonlandmark.pairs == 74 * 6
    assert rep.validation.pairs == 34


def test_validation_ree_matches_full_oracle(rng):
    g = random_connected_graph(150, 0.03, rng)
    full = floyd_warshall(g)
    L = select_landmarks(g, 12, seed=1)
    D = landmark_distance_blocks(g, L)
    val = sample_validation_pairs(g, L, 400, seed=2)
    res, _ = optimize_curvature(D, 3)
    rep = evaluate(res, D, val)
    # oracle: full embedded-distance matrix indexed by graph node
    row = {int(node): i for i, node in enumerate(D.node_order)}
    U = lorentz_gram(res.X)
    E = distances_from_products(0.5 * (U + U.T), res.kappa)
    est = np.array([E[row[a], row[b]] for a, b in zip(val.u, val.v)])
    true = full[val.u, val.v]
    expect = math.sqrt(np.sum((true - est) ** 2)) / math.sqrt(np.sum(true))
    assert rep.ree_validation == pytest.approx(expect, rel=1e-12)


def test_all_landmarks_matches_full_matrix_hydra(rng):
    g = random_connected_graph(40, 0.08, rng)
    full = floyd_warshall(g)
    D = landmark_distance_blocks(g, LandmarkSet(np.arange(g.n)))
    res = lhydra(D, 2, 1.0)
    rep = evaluate(res, D)
    assert rep.landmark_nonlandmark is None and rep.validation is None
    # full-matrix hydra on the same matrix, written out directly
    w, V = np.linalg.eigh(np.cosh(full))
    X = np.column_stack([np.sqrt(w[-1]) * V[:, -1], np.sqrt(-w[1]) * V[:, 1], np.sqrt(-w[0]) * V[:, 0]])
    X[:, 0] = np.sqrt(1 + np.sum(X[:, 1:] ** 2, axis=1))
    U = lorentz_gram(X)
    E = distances_from_products(0.5 * (U + U.T), 1.0)
    off = ~np.eye(g.n, dtype=bool)
    expect = math.sqrt(np.sum((full - E)[off] ** 2)) / math.sqrt(np.sum(full[off]))
    assert rep.ree_landmark == pytest.approx(expect, rel=1e-9)


def test_report_independent_of_labels(rng):
    P, D = synthetic_blocks(100, 2, l=8, noise=0.2, seed=3)
    perm = rng.permutation(D.m)
    D2 = DistanceBlocks(D.D_L, D.D_N[perm])
    r1 = evaluate(lhydra(D, 2, 1.0), D)
    r2 = evaluate(lhydra(D2, 2, 1.0), D2)
    assert r1.ree_landmark_nonlandmark == pytest.approx(r2.ree_landmark_nonlandmark, rel=1e-12)


def test_report_round_trip():
    P, D = synthetic_blocks(60, 2, l=6, noise=0.1, seed=1)
    rep = evaluate(lhydra(D, 2, 1.0), D)
    text = rep.to_json()
    back = ErrorReport.from_json(text)
    assert back == rep
    assert back.to_json() == text
    with pytest.raises(ValueError):
        ErrorReport.from_dict({"schema": "other/9"})


def test_sweep_uses_one_distance_computation(rng):
    g = random_connected_graph(120, 0.04, rng)
    reset_counters()
    L = select_landmarks(g, 10, seed=0)
    D = landmark_distance_blocks(g, L)
    val = sample_validation_pairs(g, L, 300, seed=0)
    before = counters["bfs"]
    rows, reports = sweep_dimensions(D, [2, 3], ["lhydra", "lhydra-plus"], validation=val)
    assert counters["bfs"] == before == 10 + val.sources
    assert {(r["method"], r["d"]) for r in rows} == {("lhydra", 2), ("lhydra", 3),
                                                      ("lhydra-plus", 2), ("lhydra-plus", 3)}
    assert len(reports) == 4
    assert {r["error_class"] for r in rows} == {"landmark", "landmark_nonlandmark", "validation"}


def test_sweep_single_dimension_and_failure_rows():
    P, D = synthetic_blocks(40, 1, l=5, seed=1)
    rows, reports = sweep_dimensions(D, [1])
    assert {r["d"] for r in rows} == {1} and all(r["status"] == "ok" for r in rows)
    rows, reports = sweep_dimensions(D, [1, 3, 6])
    bad = [r for r in rows if r["status"] != "ok"]
    assert {r["d"] for r in bad} == {3, 6}
    assert len(reports) == 1
    with pytest.raises(ValueError):
        sweep_dimensions(D, [])


def test_sweep_higher_dimension_fits_better():
    P, D = synthetic_blocks(400, 10, l=30, noise=0.05, seed=7)
    rows, _ = sweep_dimensions(D, [2, 10])
    ree = {r["d"]: r["value"] for r in rows if r["metric"] == "ree" and r["error_class"] == "landmark_nonlandmark"}
    assert ree[10] <= ree[2]


def test_long_csv_and_plot_data():
    rows = [
        {"method": "lhydra", "d": 2, "error_class": "landmark", "metric": "ree", "value": 0.5, "status": "ok"},
        {"method": "lhydra", "d": 3, "error_class": "landmark", "metric": "ree", "value": 0.25, "status": "ok"},
        {"method": "lhydra", "d": 4, "error_class": "", "metric": "", "value": math.nan, "status": "error: x"},
    ]
    buf = io.StringIO()
    write_long_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "method,d,error_class,metric,value,status"
    assert lines[1] == "lhydra,2,landmark,ree,0.5,ok"
    assert lines[3] == "lhydra,4,,,,error: x"
    buf = io.StringIO()
    write_plot_data(rows, buf)
    assert buf.getvalue().splitlines() == ["# d lhydra:landmark", "2 0.5", "3 0.25", "4 NaN"]


def test_run_method_rejects_unknown():
    P, D = synthetic_blocks(30, 2, l=5, seed=0)
    with pytest.raises(ValueError):
        run_method(D, 2, "hypy")
