"""Stress, its gradient, and the two-stage stress refinement (L-hydra+).

Points on H_d are optimized through their spacelike coordinates ``z``; the
timelike coordinate is always ``sqrt(1 + |z|^2)`` so every iterate lies on
the hyperboloid.
"""
from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels, metrics
from .embed import EmbeddingResult, optimize_curvature
from .geometry import check_kappa, lift, lorentz_gram, project_to_hyperboloid
from .graph import DistanceBlocks
from .optimize import STATUS_NAMES, lbfgs

log = logging.getLogger(__name__)

ARCOSH_DERIV_FLOOR = 1.0 + 1e-9


def stress_value(X, D: DistanceBlocks, kappa: float) -> float:
    """Stress over the known pairs: every entry of ``D_L`` and of ``D_N``."""
    X = np.asarray(getattr(X, "X", X), dtype=np.float64)
    sums = metrics.landmark_sums(X[:D.l], D.D_L, kappa)
    sums += metrics.cross_sums(X[D.l:], X[:D.l], D.D_N, kappa)
    return sums.stress


def rmse(stress: float, pair_count: int) -> float:
    if pair_count <= 0:
        raise ValueError("pair count must be positive")
    return float(np.sqrt(stress * stress / pair_count))


def ree(stress: float, distances) -> float:
    """Stress divided by the square root of the summed target distances.

    ``distances`` is either the target distances of the pairs entering the
    stress sum or their precomputed total.
    """
    total = float(np.sum(distances))
    if total <= 0:
        raise ValueError("relative embedding error undefined: target distances sum to zero")
    return float(stress / np.sqrt(total))


def _anchor_arrays(anchors, targets=None):
    if targets is None:
        pts, targets = zip(*anchors)
        anchors = np.array(pts, dtype=np.float64)
    return (np.ascontiguousarray(anchors, dtype=np.float64),
            np.ascontiguousarray(targets, dtype=np.float64))


def point_stress(z, anchors, targets=None, kappa: float = 1.0) -> tuple[float, np.ndarray]:
    """Squared stress of a single point against anchors, and its gradient in ``z``."""
    A, t = _anchor_arrays(anchors, targets)
    z = np.ascontiguousarray(z, dtype=np.float64)
    return kernels.point_stress(z, A, t, np.sqrt(check_kappa(kappa)))


def stress_gradient(z, anchors, targets=None, kappa: float = 1.0) -> np.ndarray:
    """Gradient of ``sum_a (d_a - dist(x(z), y_a))^2`` with respect to ``z``.

    ``anchors`` is either an array of hyperboloid points (with ``targets``)
    or a list of ``(point, target_distance)`` pairs.
    """
    return point_stress(z, anchors, targets, kappa)[1]


def landmark_objective(zflat, D_L, sqrt_kappa: float):
    """Squared stress over ordered landmark pairs and its gradient."""
    l = D_L.shape[0]
    Z = zflat.reshape(l, -1)
    X = lift(Z)
    U = lorentz_gram(X)
    U = 0.5 * (U + U.T)
    R = D_L - np.arccosh(np.maximum(U, 1.0)) / sqrt_kappa
    np.fill_diagonal(R, 0.0)
    f = float(np.sum(R * R))
    Ud = np.maximum(U, ARCOSH_DERIV_FLOOR)
    W = -2.0 * R / (sqrt_kappa * np.sqrt((Ud - 1.0) * (Ud + 1.0)))
    np.fill_diagonal(W, 0.0)
    a = W @ X[:, 0]
    grad = 2.0 * ((Z / X[:, :1]) * a[:, None] - W @ Z)
    return f, grad.ravel()


@dataclass
class StressProblem:
    D: DistanceBlocks
    kappa: float
    X0: EmbeddingResult
    gtol: float = 1e-6
    maxiter: int = 500
    memory: int = 10

    def __post_init__(self):
        self.kappa = check_kappa(self.kappa)
        if self.X0.l != self.D.l or self.X0.m != self.D.m:
            raise ValueError("initial embedding does not match the distance-block partition")


@dataclass
class StageResult:
    X: np.ndarray
    f_initial: float
    f_final: float
    iterations: np.ndarray
    status: np.ndarray
    history: list = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return bool(np.all(self.status == 0))

    def summary(self) -> dict:
        names, counts = np.unique(self.status, return_counts=True)
        return {
            "stress_initial": float(np.sqrt(self.f_initial)),
            "stress_final": float(np.sqrt(self.f_final)),
            "problems": int(self.status.size),
            "status_counts": {STATUS_NAMES[int(k)]: int(c) for k, c in zip(names, counts)},
            "iterations_total": int(np.sum(self.iterations)),
            "iterations_max": int(np.max(self.iterations)) if self.iterations.size else 0,
        }


def minimize_landmark_stress(P: StressProblem) -> StageResult:
    """Jointly refine all landmarks against the landmark-landmark distances."""
    X0 = project_to_hyperboloid(P.X0.X_L)
    sk = np.sqrt(P.kappa)
    D_L = P.D.D_L
    res = lbfgs(lambda z: landmark_objective(z, D_L, sk), X0[:, 1:].ravel(),
                gtol=P.gtol, maxiter=P.maxiter, memory=P.memory, record=True)
    if not res.converged:
        log.info("landmark stage stopped with status %s after %d iterations", res.status_name, res.iterations)
    X = lift(res.x.reshape(P.D.l, -1))
    return StageResult(X, res.f0, res.f, np.array([res.iterations]), np.array([res.status]), res.history)


def minimize_nonlandmark_stress(P: StressProblem, landmarks, backend: str | None = None) -> StageResult:
    """Refine every non-landmark independently against fixed landmark coordinates."""
    X_L = np.ascontiguousarray(landmarks, dtype=np.float64)
    Z0 = np.ascontiguousarray(project_to_hyperboloid(P.X0.X_N)[:, 1:])
    k = kernels.get_backend(backend)
    Z, f0, f1, iters, status = k.refine_points(
        X_L, np.ascontiguousarray(P.D.D_N), Z0, float(np.sqrt(P.kappa)),
        P.gtol, P.maxiter, P.memory, kernels.num_threads())
    bad = int(np.count_nonzero(status))
    if bad:
        log.info("%d of %d non-landmark problems stopped before reaching the gradient tolerance", bad, status.size)
    return StageResult(lift(Z), float(np.sum(f0)), float(np.sum(f1)), iters, status)


def refine(P: StressProblem, backend: str | None = None) -> EmbeddingResult:
    """Two-stage stress minimization starting from ``P.X0`` at fixed curvature."""
    t0 = time.perf_counter()
    X_start = project_to_hyperboloid(P.X0.X)
    sums_before = (metrics.landmark_sums(X_start[:P.D.l], P.D.D_L, P.kappa)
                   + metrics.cross_sums(X_start[P.D.l:], X_start[:P.D.l], P.D.D_N, P.kappa))
    stage1 = minimize_landmark_stress(P)
    t1 = time.perf_counter()
    stage2 = minimize_nonlandmark_stress(P, stage1.X, backend)
    t2 = time.perf_counter()
    X = np.vstack([stage1.X, stage2.X])
    sums_after = (metrics.landmark_sums(X[:P.D.l], P.D.D_L, P.kappa)
                  + metrics.cross_sums(X[P.D.l:], X[:P.D.l], P.D.D_N, P.kappa))
    log_rows = [("landmark", it, float(np.sqrt(f)), g) for it, f, g in stage1.history]
    if P.D.m:
        log_rows.append(("nonlandmark", 0, float(np.sqrt(stage2.f_initial)), None))
        log_rows.append(("nonlandmark", int(stage2.iterations.max()), float(np.sqrt(stage2.f_final)), None))
    refinement = {
        "stress_before": sums_before.stress,
        "stress_after": sums_after.stress,
        "ree_before": sums_before.ree(),
        "ree_after": sums_after.ree(),
        "landmark_stage": stage1.summary(),
        "nonlandmark_stage": stage2.summary(),
        "convergence_log": log_rows,
    }
    times = dict(P.X0.wall_times)
    times.update({"refine_landmarks": t1 - t0, "refine_nonlandmarks": t2 - t1})
    return EmbeddingResult(X=X, kappa=P.kappa, dim=P.X0.dim, l=P.X0.l, m=P.X0.m,
                           eigenvalues_used=P.X0.eigenvalues_used,
                           strain_residual=P.X0.strain_residual, projected=True,
                           wall_times=times, kappa_table=P.X0.kappa_table,
                           refinement=refinement, method="lhydra-plus")


def lhydra_plus(D: DistanceBlocks, d: int, grid=None, gtol: float = 1e-6, maxiter: int = 500,
                backend: str | None = None, eigen_method: str = "auto") -> EmbeddingResult:
    """L-hydra with curvature search, then stress refinement at the selected curvature."""
    start, _ = optimize_curvature(D, d, grid, project=True, eigen_method=eigen_method)
    return refine(StressProblem(D, start.kappa, start, gtol=gtol, maxiter=maxiter), backend)


def write_convergence_log(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["stage", "iteration", "stress", "grad_norm"])
    for stage, it, s, g in rows:
        w.writerow([stage, it, format(s, ".17g"), "" if g is None else format(g, ".17g")])
