"""Hyperboloid-model primitives.

Points are rows ``(x1, x2, ..., x_{d+1})`` of real arrays with ``x1`` the
timelike coordinate. Distances use curvature ``-kappa``.
"""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

OFF_HYPERBOLOID_TOL = 1e-6
ON_HYPERBOLOID_TOL = 1e-9

# Incremented whenever a Lorentz product that should be >= 1 falls below
# 1 - OFF_HYPERBOLOID_TOL; the value is still clamped and used.
diagnostics = {"off_hyperboloid": 0}


def check_kappa(kappa: float) -> float:
    kappa = float(kappa)
    if not (kappa > 0.0 and np.isfinite(kappa)):
        raise ValueError(f"curvature parameter kappa must be positive and finite, got {kappa}")
    return kappa


def lorentz_product(x, y) -> float:
    """``x1*y1 - (x2*y2 + ... + x_{d+1}*y_{d+1})``."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValueError("Lorentz vectors need at least two coordinates")
    return float(x[0] * y[0] - x[1:] @ y[1:])


def lorentz_gram(X, Y=None) -> np.ndarray:
    """Matrix of Lorentz products between the rows of ``X`` and ``Y``."""
    X = np.asarray(X, dtype=np.float64)
    Y = X if Y is None else np.asarray(Y, dtype=np.float64)
    XJ = X.copy()
    XJ[:, 1:] *= -1.0
    return XJ @ Y.T


def note_off_hyperboloid(count: int) -> None:
    if count:
        diagnostics["off_hyperboloid"] += int(count)
        log.debug("%d Lorentz product(s) below 1 - %g were clamped to 1", count, OFF_HYPERBOLOID_TOL)


def _arcosh_clamped(u):
    u = np.asarray(u, dtype=np.float64)
    note_off_hyperboloid(int(np.count_nonzero(u < 1.0 - OFF_HYPERBOLOID_TOL)))
    return np.arccosh(np.maximum(u, 1.0))


def hyperbolic_distance(x, y, kappa: float = 1.0) -> float:
    kappa = check_kappa(kappa)
    u = lorentz_product(x, y)
    if u < 1.0 - OFF_HYPERBOLOID_TOL:
        log.warning("Lorentz product %.17g < 1 - %g: points are off the hyperboloid", u, OFF_HYPERBOLOID_TOL)
    return float(_arcosh_clamped(u) / np.sqrt(kappa))


def distances_from_products(U, kappa: float = 1.0) -> np.ndarray:
    """Hyperbolic distances from an array of Lorentz products."""
    return _arcosh_clamped(U) / np.sqrt(check_kappa(kappa))


def project_to_hyperboloid(X) -> np.ndarray:
    """Move points onto the hyperboloid parallel to the x1-axis.

    Works on a single vector or on rows of a matrix; spacelike coordinates
    are left untouched.
    """
    X = np.array(X, dtype=np.float64, copy=True)
    spatial = X[..., 1:]
    X[..., 0] = np.sqrt(1.0 + np.sum(spatial * spatial, axis=-1))
    return X


def lift(Z) -> np.ndarray:
    """Hyperboloid points from their spacelike coordinates."""
    Z = np.asarray(Z, dtype=np.float64)
    x1 = np.sqrt(1.0 + np.sum(Z * Z, axis=-1, keepdims=True))
    return np.concatenate([x1, Z], axis=-1)


@dataclass(frozen=True)
class PointConfiguration:
    """``n`` points in Lorentz space R^{1,d}, one per row."""

    X: np.ndarray
    on_hyperboloid: bool = False

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] < 2:
            raise ValueError(f"expected an n x (d+1) matrix with d >= 1, got shape {X.shape}")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        if self.on_hyperboloid:
            norms = np.einsum("ij,ij->i", X[:, :1], X[:, :1]) - np.einsum("ij,ij->i", X[:, 1:], X[:, 1:])
            bad = (np.abs(norms - 1.0) > ON_HYPERBOLOID_TOL * np.maximum(1.0, X[:, 0] ** 2)) | (X[:, 0] <= 0)
            if np.any(bad):
                raise ValueError(f"{int(bad.sum())} row(s) are not on the hyperboloid")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1] - 1

    def to_csv(self, fh, ids=None) -> None:
        write_points_csv(fh, self.X, ids)


def random_hyperbolic_points(n: int, d: int, radius: float = 2.0, seed: int = 0) -> PointConfiguration:
    """``n`` points on H_d whose spacelike parts are uniform in a Euclidean ball.

    The spacelike coordinates are drawn uniformly from the ball of the given
    radius, then lifted onto the hyperboloid.
    """
    if n < 1 or d < 1:
        raise ValueError("need n >= 1 and d >= 1")
    if radius < 0:
        raise ValueError("radius must be non-negative")
    rng = np.random.default_rng(np.uint64(seed))
    direction = rng.standard_normal((n, d))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return PointConfiguration(lift(direction * r[:, None]), on_hyperboloid=True)


def pairwise_distance_matrix(P, kappa: float = 1.0) -> np.ndarray:
    X = P.X if isinstance(P, PointConfiguration) else np.asarray(P, dtype=np.float64)
    U = lorentz_gram(X)
    U = 0.5 * (U + U.T)
    D = distances_from_products(U, kappa)
    np.fill_diagonal(D, 0.0)
    return D


def write_points_csv(fh, X, ids=None) -> None:
    """Write ``id,x1,...,x{d+1}`` rows with 17 significant digits."""
    X = np.asarray(X, dtype=np.float64)
    if ids is None:
        ids = range(X.shape[0])
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["id"] + [f"x{k + 1}" for k in range(X.shape[1])])
    for i, row in zip(ids, X):
        w.writerow([i] + [format(v, ".17g") for v in row])


def read_points_csv(fh) -> tuple[list[str], np.ndarray]:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    r = csv.reader(fh)
    header = next(r)
    if not header or header[0] != "id":
        raise ValueError("points CSV must start with an 'id' column")
    ids, rows = [], []
    for rec in r:
        ids.append(rec[0])
        rows.append([float(v) for v in rec[1:]])
    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(header) - 1)
    return ids, X
