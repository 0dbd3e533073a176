"""Synthetic inputs: exact/noisy hyperbolic distance blocks and sparse test graphs."""
from __future__ import annotations

import numpy as np

from .geometry import check_kappa, distances_from_products, lorentz_gram, random_hyperbolic_points
from .graph import DistanceBlocks, Graph, largest_connected_component


def perturb_blocks(D_L, D_N, noise: float, rng) -> tuple[np.ndarray, np.ndarray]:
    """Add N(0, noise^2) to every known distance, clamp at zero, re-symmetrize D_L."""
    l = D_L.shape[0]
    E = rng.normal(0.0, noise, size=(l, l))
    iu = np.triu_indices(l, 1)
    D_L = np.array(D_L, dtype=np.float64)
    D_L[iu] = np.maximum(D_L[iu] + E[iu], 0.0)
    D_L = np.triu(D_L, 1)
    D_L = D_L + D_L.T
    D_N = np.maximum(D_N + rng.normal(0.0, noise, size=D_N.shape), 0.0)
    return D_L, D_N


def synthetic_blocks(n: int, d: int, l: int | None = None, radius: float = 2.0, noise: float = 0.0,
                     seed: int = 0, kappa: float = 1.0):
    """Points on H_d and their (optionally noisy) landmark distance blocks.

    The first ``l`` points are the landmarks (default ``d + 2``). Returns
    ``(points, blocks)``; ``points`` are the exact generating coordinates.
    """
    kappa = check_kappa(kappa)
    l = d + 2 if l is None else l
    if n < d + 2:
        raise ValueError(f"need n >= d+2 = {d + 2} points, got {n}")
    if not d + 1 <= l <= n:
        raise ValueError(f"landmark count must lie in [d+1, n], got {l}")
    if noise < 0:
        raise ValueError("noise must be non-negative")
    P = random_hyperbolic_points(n, d, radius, seed)
    X_L = P.X[:l]
    U_L = lorentz_gram(X_L)
    D_L = distances_from_products(0.5 * (U_L + U_L.T), kappa)
    np.fill_diagonal(D_L, 0.0)
    D_N = distances_from_products(lorentz_gram(P.X[l:], X_L), kappa)
    if noise > 0:
        rng = np.random.default_rng([np.uint64(seed), np.uint64(1)])
        D_L, D_N = perturb_blocks(D_L, D_N, noise, rng)
    idx = np.arange(n)
    return P, DistanceBlocks(D_L, D_N, idx[:l], idx[l:], meta={"kappa": kappa, "noise": noise})


def sparse_random_graph(n: int, avg_degree: float = 6.0, seed: int = 0) -> Graph:
    """Connected sparse graph: a random recursive tree plus degree-biased extra edges."""
    if n < 2:
        raise ValueError("need at least two nodes")
    rng = np.random.default_rng(np.uint64(seed))
    child = np.arange(1, n)
    parent = np.floor(rng.random(n - 1) * child).astype(np.int64)
    extra = max(0, int(round(n * (avg_degree / 2.0 - 1.0))))
    ends = np.concatenate([child, parent])
    a = rng.integers(0, n, size=extra)
    b = ends[rng.integers(0, ends.size, size=extra)]
    return Graph.from_edges(np.concatenate([child, a]), np.concatenate([parent, b]), n)


def random_hyperbolic_graph(n: int, avg_degree: float = 10.0, gamma: float = 2.5, seed: int = 0,
                            chunk: int = 2048) -> Graph:
    """Threshold random hyperbolic graph, reduced to its largest component.

    Nodes get radial coordinates with density ~ sinh(alpha r) on a disk of
    radius R and uniform angles; two nodes are adjacent when their
    hyperbolic distance is below R. ``alpha = (gamma - 1) / 2`` sets the
    power-law degree exponent ``gamma``.
    """
    alpha = (gamma - 1.0) / 2.0
    if alpha <= 0.5:
        raise ValueError("gamma must exceed 2")
    R = 2.0 * np.log(8.0 * n * alpha ** 2 / (np.pi * avg_degree * (2.0 * alpha - 1.0) ** 2))
    rng = np.random.default_rng(np.uint64(seed))
    u = rng.random(n)
    r = np.arccosh(1.0 + (np.cosh(alpha * R) - 1.0) * u) / alpha
    theta = rng.random(n) * 2.0 * np.pi
    ch, sh, cR = np.cosh(r), np.sinh(r), np.cosh(R)
    us, vs = [], []
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        dtheta = np.pi - np.abs(np.pi - np.abs(theta[lo:hi, None] - theta[None, :]))
        c = ch[lo:hi, None] * ch[None, :] - sh[lo:hi, None] * sh[None, :] * np.cos(dtheta)
        i, j = np.nonzero(c < cR)
        i = i + lo
        keep = i < j
        us.append(i[keep])
        vs.append(j[keep])
    g = Graph.from_edges(np.concatenate(us), np.concatenate(vs), n)
    return largest_connected_component(g)
