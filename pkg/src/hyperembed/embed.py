"""Strain-minimizing landmark embedding (L-hydra) and curvature grid search.

Landmarks are embedded from the extreme eigenpairs of the cosh-transformed
landmark distance matrix; every other point is then placed by the
least-squares solution against the landmark coordinates, which reduces to
a single matrix product.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from . import metrics
from .geometry import check_kappa, project_to_hyperboloid
from .graph import DistanceBlocks

log = logging.getLogger(__name__)

DENSE_EIGEN_MAX = 512
NEGATIVE_RTOL = 1e-12
COSH_ARG_MAX = 700.0
DEFAULT_GRID = tuple(np.logspace(-3, 3, 16, base=2.0))


class EmbeddingError(RuntimeError):
    """Algorithmic failure of an embedding run."""


class NonNegativeTrailingEigenvalue(EmbeddingError):
    """Fewer than ``d`` strictly negative eigenvalues; rerun with ``d <= max_dim``."""

    def __init__(self, dim: int, max_dim: int, eigenvalues=None):
        self.dim = dim
        self.max_dim = max_dim
        self.eigenvalues = eigenvalues
        super().__init__(
            f"only {max_dim} strictly negative eigenvalue(s) available but dimension {dim} "
            f"was requested; rerun with d <= {max_dim}")


class EigenSolverError(EmbeddingError):
    pass


class CurvatureOverflowError(EmbeddingError, ValueError):
    pass


class CurvatureSearchError(EmbeddingError):
    def __init__(self, table):
        self.table = table
        hints = [row["max_dim"] for row in table if row.get("max_dim") is not None]
        msg = "L-hydra failed for every curvature in the grid"
        if hints:
            msg += f"; largest admissible dimension seen: {max(hints)}"
        super().__init__(msg)
        self.max_dim = max(hints) if hints else None


@dataclass(frozen=True)
class GramBlocks:
    A_L: np.ndarray
    A_N: np.ndarray
    kappa: float


@dataclass(frozen=True)
class EigenPairs:
    """Largest eigenpair plus the ``d`` smallest, smallest last."""

    lambda_top: float
    q_top: np.ndarray
    lambda_bottom: np.ndarray
    Q_bottom: np.ndarray
    strain_residual: float
    lambda_second: float = float("nan")

    @property
    def values(self) -> np.ndarray:
        return np.concatenate([[self.lambda_top], self.lambda_bottom])


@dataclass
class EmbeddingResult:
    X: np.ndarray
    kappa: float
    dim: int
    l: int
    m: int
    eigenvalues_used: np.ndarray
    strain_residual: float
    projected: bool
    wall_times: dict = field(default_factory=dict)
    kappa_table: list | None = None
    refinement: dict | None = None
    method: str = "lhydra"

    @property
    def X_L(self) -> np.ndarray:
        return self.X[: self.l]

    @property
    def X_N(self) -> np.ndarray:
        return self.X[self.l:]

    def sidecar(self, **extra) -> dict:
        out = {
            "method": self.method,
            "kappa": self.kappa,
            "dim": self.dim,
            "l": self.l,
            "m": self.m,
            "eigenvalues_used": [float(v) for v in self.eigenvalues_used],
            "strain_residual": float(self.strain_residual),
            "projected": self.projected,
            "wall_times": {k: round(v, 3) for k, v in self.wall_times.items()},
        }
        if self.kappa_table is not None:
            out["kappa_table"] = self.kappa_table
        if self.refinement is not None:
            out["refinement"] = self.refinement
        out.update(extra)
        return out


def _check_overflow(D, sqrt_kappa):
    if D.size and sqrt_kappa * float(np.max(D)) > COSH_ARG_MAX:
        raise CurvatureOverflowError(
            f"cosh(sqrt(kappa) * d) overflows: sqrt(kappa) * max distance = "
            f"{sqrt_kappa * float(np.max(D)):.1f} > {COSH_ARG_MAX:g}; use a smaller kappa")


def _cosh(D, sqrt_kappa):
    _check_overflow(D, sqrt_kappa)
    return np.cosh(sqrt_kappa * D)


def cosh_transform(D: DistanceBlocks, kappa: float) -> GramBlocks:
    kappa = check_kappa(kappa)
    sk = np.sqrt(kappa)
    return GramBlocks(_cosh(D.D_L, sk), _cosh(D.D_N, sk), kappa)


def _fix_signs(q_top, Q_bottom):
    if q_top.sum() < 0:
        q_top = -q_top
    if Q_bottom.size:
        pivots = np.argmax(np.abs(Q_bottom), axis=0)
        signs = np.sign(Q_bottom[pivots, np.arange(Q_bottom.shape[1])])
        signs[signs == 0] = 1.0
        Q_bottom = Q_bottom * signs
    return q_top, Q_bottom


def reduced_eigendecomposition(A_L, d: int, method: str = "auto") -> EigenPairs:
    """Largest eigenpair and the ``d`` algebraically smallest eigenpairs of ``A_L``.

    ``method`` is ``"dense"`` (full symmetric decomposition), ``"iterative"``
    (Lanczos via ARPACK) or ``"auto"``, which picks dense up to
    ``DENSE_EIGEN_MAX`` rows.
    """
    A = np.asarray(A_L, dtype=np.float64)
    l = A.shape[0]
    if A.ndim != 2 or A.shape[1] != l:
        raise ValueError("A_L must be square")
    if not 1 <= d <= l - 1:
        raise ValueError(f"need 1 <= d <= l - 1; got d={d}, l={l}")
    if method == "auto":
        method = "dense" if l <= DENSE_EIGEN_MAX else "iterative"
    if method == "dense":
        w, V = scipy.linalg.eigh(A)
        lam1, lam2, q1 = w[-1], w[-2], V[:, -1]
        bottom = w[:d][::-1]
        Qb = V[:, :d][:, ::-1]
        residual = float(np.sum(w[d:l - 1] ** 2))
    elif method == "iterative":
        try:
            wt, Vt = scipy.sparse.linalg.eigsh(A, k=2, which="LA")
            wb, Vb = scipy.sparse.linalg.eigsh(A, k=d, which="SA")
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise EigenSolverError(f"eigensolver did not converge: {exc}") from exc
        ot, ob = np.argsort(wt), np.argsort(wb)
        wt, Vt, wb, Vb = wt[ot], Vt[:, ot], wb[ob], Vb[:, ob]
        lam1, lam2, q1 = wt[-1], wt[-2], Vt[:, -1]
        bottom = wb[::-1]
        Qb = Vb[:, ::-1]
        frob2 = float(np.sum(A * A))
        residual = max(0.0, frob2 - lam1 ** 2 - float(np.sum(bottom ** 2)))
    else:
        raise ValueError(f"unknown eigen method {method!r}")
    if not lam1 > 0:
        raise EigenSolverError(f"largest eigenvalue {lam1:g} is not positive")
    norm = max(abs(lam1), abs(bottom[-1]))
    for lam, q in zip(np.concatenate([[lam1], bottom]), np.column_stack([q1, Qb]).T):
        if np.linalg.norm(A @ q - lam * q) > 1e-8 * norm:
            raise EigenSolverError("eigenpair residual exceeds tolerance")
    q1, Qb = _fix_signs(q1, Qb)
    return EigenPairs(float(lam1), q1, np.asarray(bottom, dtype=np.float64), Qb, residual, float(lam2))


def _check_negative(E: EigenPairs, d: int):
    neg = E.lambda_bottom < -NEGATIVE_RTOL * E.lambda_top
    if not np.all(neg[:d]):
        raise NonNegativeTrailingEigenvalue(d, int(np.count_nonzero(neg)), E.values)
    if E.lambda_second >= E.lambda_top - NEGATIVE_RTOL * abs(E.lambda_top):
        raise EigenSolverError("the largest eigenvalue is not simple; the leading direction is ambiguous")


def build_landmark_coords(E: EigenPairs, d: int) -> np.ndarray:
    """``[sqrt(l1) q1, sqrt(-l_{l-d+1}) q_{l-d+1}, ..., sqrt(-l_l) q_l]``."""
    _check_negative(E, d)
    cols = [np.sqrt(E.lambda_top) * E.q_top]
    cols += [np.sqrt(-lam) * E.Q_bottom[:, k] for k, lam in enumerate(E.lambda_bottom[:d])]
    return np.column_stack(cols)


def triangulation_matrix(E: EigenPairs, d: int) -> np.ndarray:
    """``l x (d+1)`` map taking cosh-transformed landmark distances to coordinates."""
    _check_negative(E, d)
    cols = [E.q_top / np.sqrt(E.lambda_top)]
    cols += [-E.Q_bottom[:, k] / np.sqrt(-lam) for k, lam in enumerate(E.lambda_bottom[:d])]
    return np.column_stack(cols)


def build_nonlandmark_coords(A_N, E: EigenPairs, d: int) -> np.ndarray:
    W = triangulation_matrix(E, d)
    A_N = np.asarray(A_N, dtype=np.float64)
    if A_N.size == 0:
        return np.zeros((A_N.shape[0] if A_N.ndim == 2 else 0, d + 1))
    return A_N @ W


def lhydra(D: DistanceBlocks, d: int, kappa: float = 1.0, project: bool = True,
           eigen_method: str = "auto", chunk_rows: int = 1 << 15) -> EmbeddingResult:
    """Embed landmarks and non-landmarks into H_d at curvature ``-kappa``.

    Rows of ``X`` are the landmarks (in ``D_L`` order) followed by the
    non-landmarks (in ``D_N`` order). With ``project`` the rows are moved
    onto the hyperboloid parallel to the x1-axis; otherwise they are the raw
    ambient solution.
    """
    kappa = check_kappa(kappa)
    l, m = D.l, D.m
    if d < 1 or d > l + m - 1:
        raise ValueError(f"embedding dimension must satisfy 1 <= d <= l+m-1 = {l + m - 1}, got {d}")
    if d > l - 1:
        raise ValueError(f"dimension {d} needs at least d+1 = {d + 1} landmarks, got {l}")
    sk = np.sqrt(kappa)
    times = {}
    t0 = time.perf_counter()
    _check_overflow(D.D_N, sk)
    A_L = _cosh(D.D_L, sk)
    E = reduced_eigendecomposition(A_L, d, eigen_method)
    t1 = time.perf_counter()
    X_L = build_landmark_coords(E, d)
    W = triangulation_matrix(E, d)
    X = np.empty((l + m, d + 1))
    X[:l] = X_L
    for lo in range(0, m, chunk_rows):
        hi = min(lo + chunk_rows, m)
        X[l + lo:l + hi] = np.cosh(sk * D.D_N[lo:hi]) @ W
    t2 = time.perf_counter()
    if project:
        X = project_to_hyperboloid(X)
    t3 = time.perf_counter()
    times.update({"eigen": t1 - t0, "coordinates": t2 - t1, "project": t3 - t2})
    return EmbeddingResult(X=X, kappa=kappa, dim=d, l=l, m=m, eigenvalues_used=E.values,
                           strain_residual=E.strain_residual, projected=project, wall_times=times)


def known_pair_ree(result: EmbeddingResult, D: DistanceBlocks) -> float:
    """REE over landmark-landmark and landmark-non-landmark pairs, on projected points."""
    X = result.X if result.projected else project_to_hyperboloid(result.X)
    sums = metrics.landmark_sums(X[:D.l], D.D_L, result.kappa)
    sums += metrics.cross_sums(X[D.l:], X[:D.l], D.D_N, result.kappa)
    return sums.ree()


def optimize_curvature(D: DistanceBlocks, d: int, grid=None, project: bool = True,
                       eigen_method: str = "auto"):
    """Run L-hydra for every curvature in ``grid`` and keep the best by known-pair REE.

    Ties go to the smaller curvature. Returns ``(best_result, table)``
    where ``table`` has one row per grid value (ascending).
    """
    grid = DEFAULT_GRID if grid is None else grid
    grid = sorted({check_kappa(k) for k in grid})
    if not grid:
        raise ValueError("curvature grid is empty")
    t0 = time.perf_counter()
    table, best, best_ree = [], None, np.inf
    for kappa in grid:
        row = {"kappa": kappa, "ree": None, "status": "ok"}
        try:
            res = lhydra(D, d, kappa, project=True, eigen_method=eigen_method)
            ree = known_pair_ree(res, D)
        except NonNegativeTrailingEigenvalue as exc:
            row.update(status="error", error=str(exc), max_dim=exc.max_dim)
        except (CurvatureOverflowError, EigenSolverError) as exc:
            row.update(status="error", error=str(exc))
        else:
            row["ree"] = ree
            if ree < best_ree:
                best, best_ree = res, ree
        table.append(row)
    if best is None:
        raise CurvatureSearchError(table)
    if not project:
        best = lhydra(D, d, best.kappa, project=False, eigen_method=eigen_method)
    best.kappa_table = table
    best.wall_times["curvature_search"] = time.perf_counter() - t0
    return best, table
