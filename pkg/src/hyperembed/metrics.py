"""Squared-error sums between target dissimilarities and embedded distances.

Known pairs follow the block layout of the input: every entry of ``D_L``
(so each landmark pair appears in both orders) and every entry of ``D_N``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import check_kappa, distances_from_products, lorentz_gram, note_off_hyperboloid


@dataclass
class PairSums:
    """Running totals over one class of pairs."""

    stress2: float = 0.0
    dist_sum: float = 0.0
    count: int = 0
    max_abs_error: float = 0.0

    def __iadd__(self, other: "PairSums") -> "PairSums":
        self.stress2 += other.stress2
        self.dist_sum += other.dist_sum
        self.count += other.count
        self.max_abs_error = max(self.max_abs_error, other.max_abs_error)
        return self

    def __add__(self, other: "PairSums") -> "PairSums":
        out = PairSums(self.stress2, self.dist_sum, self.count, self.max_abs_error)
        out += other
        return out

    @property
    def stress(self) -> float:
        return float(np.sqrt(self.stress2))

    def ree(self) -> float:
        if self.dist_sum <= 0:
            raise ValueError("relative embedding error undefined: all target distances are zero")
        return self.stress / np.sqrt(self.dist_sum)

    def rmse(self) -> float:
        if self.count <= 0:
            raise ValueError("RMSE undefined for an empty pair set")
        return float(np.sqrt(self.stress2 / self.count))


def _sums(target, embedded) -> PairSums:
    r = target - embedded
    return PairSums(float(np.sum(r * r)), float(np.sum(target)), int(target.size),
                    float(np.max(np.abs(r))) if r.size else 0.0)


def landmark_sums(X_L, D_L, kappa) -> PairSums:
    """Ordered landmark pairs ``i != j``."""
    kappa = check_kappa(kappa)
    U = lorentz_gram(X_L)
    U = 0.5 * (U + U.T)
    E = distances_from_products(U, kappa)
    mask = ~np.eye(D_L.shape[0], dtype=bool)
    return _sums(np.asarray(D_L)[mask], E[mask])


def cross_sums(X_N, X_L, D_N, kappa) -> PairSums:
    """Non-landmark/landmark pairs, one term per entry of ``D_N``."""
    kappa = check_kappa(kappa)
    s2, sd, mx, low = kernels.cross_sums(
        np.ascontiguousarray(X_N, dtype=np.float64), np.ascontiguousarray(X_L, dtype=np.float64),
        np.ascontiguousarray(D_N, dtype=np.float64), float(np.sqrt(kappa)), kernels.num_threads())
    note_off_hyperboloid(low)
    return PairSums(float(s2), float(sd), int(np.shape(D_N)[0] * np.shape(D_N)[1]), float(mx))


def pair_sums(X, u, v, target, kappa) -> PairSums:
    """Arbitrary row pairs ``(u[k], v[k])`` with target distances, each counted once."""
    kappa = check_kappa(kappa)
    A, B = X[u], X[v]
    U = A[:, 0] * B[:, 0] - np.einsum("ij,ij->i", A[:, 1:], B[:, 1:])
    return _sums(np.asarray(target, dtype=np.float64), distances_from_products(U, kappa))
