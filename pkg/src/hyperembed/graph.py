"""Graph ingestion, landmark selection and landmark-sourced hop distances."""
from __future__ import annotations

import gzip
import io
import logging
import os
import struct
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from . import kernels

log = logging.getLogger(__name__)

DEFAULT_LANDMARKS = 100

# Operation counters; ``counters["bfs"]`` is the number of single-source BFS runs.
counters: Counter = Counter()


def reset_counters() -> None:
    counters.clear()


class EdgeListError(ValueError):
    pass


class UnreachableNodeError(ValueError):
    pass


@dataclass(frozen=True)
class Graph:
    """Undirected, unweighted graph in compressed sparse row form.

    ``indices[indptr[u]:indptr[u+1]]`` are the neighbours of ``u`` (sorted,
    no self-loops, no duplicates). ``node_ids[u]`` is the external label.
    """

    indptr: np.ndarray
    indices: np.ndarray
    node_ids: np.ndarray

    def __post_init__(self):
        for name in ("indptr", "indices", "node_ids"):
            getattr(self, name).setflags(write=False)

    @property
    def n(self) -> int:
        return self.indptr.size - 1

    @property
    def num_edges(self) -> int:
        return self.indices.size // 2

    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u]:self.indptr[u + 1]]

    @classmethod
    def from_edges(cls, u, v, n: int | None = None, node_ids=None) -> "Graph":
        """Build from internal endpoint arrays; symmetrizes and deduplicates."""
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        if n is None:
            n = int(max(u.max(initial=-1), v.max(initial=-1))) + 1
        keep = u != v
        a = np.minimum(u[keep], v[keep])
        b = np.maximum(u[keep], v[keep])
        key = np.unique(a * n + b)
        a, b = key // n, key % n
        src = np.concatenate([a, b])
        dst = np.concatenate([b, a])
        order = np.lexsort((dst, src))
        src, dst = src[order], dst[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(src, minlength=n), out=indptr[1:])
        if node_ids is None:
            node_ids = np.arange(n, dtype=np.int64)
        return cls(indptr, dst.astype(np.int32), np.asarray(node_ids))


def _open_bytes(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            data = fh.read()
    elif isinstance(source, (bytes, bytearray)):
        data = bytes(source)
    else:
        data = source.read()
        if isinstance(data, str):
            data = data.encode()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def load_edge_list(source) -> Graph:
    """Read a SNAP-style edge list (path, bytes or binary stream; gzip accepted).

    One whitespace-separated integer pair per line; lines starting with
    ``#`` and blank lines are skipped. External ids are mapped to dense
    indices in ascending id order.
    """
    data = _open_bytes(source)
    us, vs = [], []
    for lineno, line in enumerate(io.BytesIO(data), start=1):
        line = line.strip()
        if not line or line.startswith(b"#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise EdgeListError(f"line {lineno}: expected two node ids, got {len(parts)} field(s)")
        try:
            us.append(int(parts[0]))
            vs.append(int(parts[1]))
        except ValueError:
            raise EdgeListError(f"line {lineno}: node ids must be integers: {line.decode(errors='replace')!r}") from None
    if not us:
        raise EdgeListError("edge list contains no edges")
    ext_u = np.array(us, dtype=np.int64)
    ext_v = np.array(vs, dtype=np.int64)
    ids = np.unique(np.concatenate([ext_u, ext_v]))
    g = Graph.from_edges(np.searchsorted(ids, ext_u), np.searchsorted(ids, ext_v), ids.size, ids)
    if g.num_edges == 0:
        raise EdgeListError("edge list contains only self-loops")
    return g


def write_edge_list(g: Graph, fh) -> None:
    """Write each undirected edge once as ``u<TAB>v`` using external ids."""
    fh.write(f"# Nodes: {g.n} Edges: {g.num_edges}\n")
    src = np.repeat(np.arange(g.n), g.degrees())
    mask = src < g.indices
    for a, b in zip(g.node_ids[src[mask]], g.node_ids[g.indices[mask]]):
        fh.write(f"{a}\t{b}\n")


def largest_connected_component(g: Graph) -> Graph:
    """Induced subgraph on the largest component (ties: smallest minimum index)."""
    adj = coo_matrix((np.ones(g.indices.size, dtype=np.int8),
                      (np.repeat(np.arange(g.n), g.degrees()), g.indices)), shape=(g.n, g.n))
    ncomp, labels = connected_components(adj, directed=False)
    if ncomp == 1:
        return g
    sizes = np.bincount(labels, minlength=ncomp)
    first = np.full(ncomp, g.n, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(g.n))
    best = np.flatnonzero(sizes == sizes.max())
    comp = best[np.argmin(first[best])]
    keep = np.flatnonzero(labels == comp)
    log.warning("graph has %d components; keeping the largest (%d of %d nodes)", ncomp, keep.size, g.n)
    remap = np.full(g.n, -1, dtype=np.int64)
    remap[keep] = np.arange(keep.size)
    src = np.repeat(np.arange(g.n), g.degrees())
    mask = labels[src] == comp
    return Graph.from_edges(remap[src[mask]], remap[g.indices[mask]], keep.size, g.node_ids[keep])


@dataclass(frozen=True)
class LandmarkSet:
    indices: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if np.unique(idx).size != idx.size:
            raise ValueError("landmark indices must be distinct")
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)

    def __len__(self) -> int:
        return self.indices.size


def check_landmark_count(l: int, d: int, force: bool = False) -> None:
    """Require at least ``d + 2`` landmarks for a d-dimensional embedding."""
    if l < d + 2 and not force:
        raise ValueError(
            f"{l} landmark(s) is too few for dimension {d}; need at least d+2 = {d + 2} "
            "(pass force=True / --force-landmarks to override)")


def select_landmarks(g: Graph, l: int = DEFAULT_LANDMARKS, seed: int = 0) -> LandmarkSet:
    """Draw ``l`` distinct nodes with probability proportional to degree, without replacement.

    Equivalent in distribution (including draw order) to repeatedly picking a
    node with probability ``degree / sum(remaining degrees)`` and removing it:
    each node gets an exponential key scaled by 1/degree and the ``l``
    smallest keys win (Efraimidis-Spirakis). Zero-degree nodes can only
    appear after every positive-degree node, in uniform random order.
    """
    n = g.n
    if not 1 <= l <= n:
        raise ValueError(f"cannot select {l} landmarks from {n} nodes")
    rng = np.random.default_rng(np.uint64(seed))
    w = g.degrees().astype(np.float64)
    e = rng.exponential(size=n)
    tie = rng.random(n)
    with np.errstate(divide="ignore"):
        key = np.where(w > 0, e / w, np.inf)
    order = np.lexsort((tie, key))
    return LandmarkSet(order[:l], seed)


def _check_reachable(dist, what):
    if np.any(dist < 0):
        raise UnreachableNodeError(f"{what}: {int(np.count_nonzero(dist < 0))} unreachable node(s); "
                                   "reduce the graph to its largest connected component first")


def bfs_distances(g: Graph, source: int) -> np.ndarray:
    """Hop distances from ``source`` to every node."""
    if not 0 <= source < g.n:
        raise IndexError(f"source {source} out of range for {g.n} nodes")
    counters["bfs"] += 1
    row = kernels.bfs_multi(g.indptr, g.indices, np.array([source], dtype=np.int64),
                            kernels.num_threads())[0]
    _check_reachable(row, f"BFS from node {source}")
    return row


@dataclass(frozen=True)
class DistanceBlocks:
    """Known dissimilarities: landmark-landmark ``D_L`` and non-landmark-landmark ``D_N``.

    ``landmarks``/``nonlandmarks`` optionally record which graph nodes the
    rows belong to (landmark order matches the columns of both blocks).
    """

    D_L: np.ndarray
    D_N: np.ndarray
    landmarks: np.ndarray | None = None
    nonlandmarks: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        D_L = np.ascontiguousarray(self.D_L, dtype=np.float64)
        D_N = np.ascontiguousarray(self.D_N, dtype=np.float64)
        if D_N.size == 0:
            D_N = D_N.reshape(0, D_L.shape[0])
        if D_L.ndim != 2 or D_L.shape[0] != D_L.shape[1]:
            raise ValueError(f"D_L must be square, got {D_L.shape}")
        if D_N.ndim != 2 or D_N.shape[1] != D_L.shape[0]:
            raise ValueError(f"D_N must have {D_L.shape[0]} columns, got shape {D_N.shape}")
        if not (np.all(np.isfinite(D_L)) and np.all(np.isfinite(D_N))):
            raise ValueError("distance blocks must be finite")
        if np.any(D_L < 0) or np.any(D_N < 0):
            raise ValueError("distances must be non-negative")
        if np.any(np.diag(D_L) != 0):
            raise ValueError("D_L must have a zero diagonal")
        if not np.array_equal(D_L, D_L.T):
            raise ValueError("D_L must be symmetric")
        D_L.setflags(write=False)
        D_N.setflags(write=False)
        object.__setattr__(self, "D_L", D_L)
        object.__setattr__(self, "D_N", D_N)

    @property
    def l(self) -> int:
        return self.D_L.shape[0]

    @property
    def m(self) -> int:
        return self.D_N.shape[0]

    @property
    def node_order(self) -> np.ndarray | None:
        """Graph node of each embedding row (landmarks first)."""
        if self.landmarks is None or self.nonlandmarks is None:
            return None
        return np.concatenate([self.landmarks, self.nonlandmarks])


def landmark_distance_blocks(g: Graph, L: LandmarkSet) -> DistanceBlocks:
    """Run one BFS per landmark and split the rows into ``D_L`` and ``D_N``.

    Non-landmark rows of ``D_N`` follow ascending node index.
    """
    lm = L.indices
    if lm.size and (lm.max() >= g.n or lm.min() < 0):
        raise IndexError("landmark index out of range")
    counters["bfs"] += lm.size
    rows = kernels.bfs_multi(g.indptr, g.indices, lm, kernels.num_threads())
    _check_reachable(rows, "landmark BFS")
    is_lm = np.zeros(g.n, dtype=bool)
    is_lm[lm] = True
    nonlm = np.flatnonzero(~is_lm)
    D_L = rows[:, lm].astype(np.float64)
    D_N = np.empty((nonlm.size, lm.size), dtype=np.float64)
    D_N[...] = rows[:, nonlm].T
    return DistanceBlocks(D_L, D_N, lm.copy(), nonlm)


@dataclass(frozen=True)
class ValidationPairs:
    """Sampled non-landmark node pairs (internal indices) with their hop distances."""

    u: np.ndarray
    v: np.ndarray
    distance: np.ndarray
    sources: int = 0

    def __len__(self) -> int:
        return self.u.size

    def __iter__(self):
        return zip(self.u.tolist(), self.v.tolist(), self.distance.tolist())

    @classmethod
    def empty(cls) -> "ValidationPairs":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z.copy(), np.zeros(0), 0)


def _sample_pair_indices(M: int, count: int, rng) -> tuple[np.ndarray, np.ndarray]:
    total = M * (M - 1) // 2
    if count * 2 > total:
        flat = np.sort(rng.choice(total, size=count, replace=False))
        # invert the row-major upper-triangle index
        starts = np.cumsum(np.arange(M - 1, 0, -1)) - np.arange(M - 1, 0, -1)
        a = np.searchsorted(starts, flat, side="right") - 1
        b = flat - starts[a] + a + 1
        perm = rng.permutation(count)
        return a[perm], b[perm]
    seen: set[int] = set()
    out_a, out_b = [], []
    while len(out_a) < count:
        need = count - len(out_a)
        x = rng.integers(0, M, size=2 * need + 16)
        y = rng.integers(0, M, size=2 * need + 16)
        for p, q in zip(x.tolist(), y.tolist()):
            if p == q:
                continue
            if p > q:
                p, q = q, p
            key = p * M + q
            if key in seen:
                continue
            seen.add(key)
            out_a.append(p)
            out_b.append(q)
            if len(out_a) == count:
                break
    return np.array(out_a, dtype=np.int64), np.array(out_b, dtype=np.int64)


def sample_validation_pairs(g: Graph, L: LandmarkSet, count: int = 100_000, seed: int = 0) -> ValidationPairs:
    """Uniform distinct unordered pairs of non-landmark nodes with their hop distances.

    Pairs are grouped by source so that each distinct source needs a single
    BFS; each pair is oriented towards its more frequently sampled endpoint
    to keep the number of sources small.
    """
    is_lm = np.zeros(g.n, dtype=bool)
    is_lm[L.indices] = True
    nonlm = np.flatnonzero(~is_lm)
    M = nonlm.size
    if M < 2:
        raise ValueError("need at least two non-landmark nodes for validation pairs")
    total = M * (M - 1) // 2
    if count > total:
        raise ValueError(f"requested {count} validation pairs but only {total} distinct pairs exist")
    if count <= 0:
        return ValidationPairs.empty()
    rng = np.random.default_rng(np.uint64(seed))
    a, b = _sample_pair_indices(M, count, rng)
    u, v = nonlm[a], nonlm[b]
    freq = np.bincount(np.concatenate([u, v]), minlength=g.n)
    flip = (freq[v] > freq[u]) | ((freq[v] == freq[u]) & (v < u))
    src = np.where(flip, v, u)
    dst = np.where(flip, u, v)
    order = np.argsort(src, kind="stable")
    sources, starts = np.unique(src[order], return_index=True)
    target_ptr = np.append(starts, order.size).astype(np.int64)
    counters["bfs"] += sources.size
    dist_sorted = kernels.bfs_gather(g.indptr, g.indices, sources.astype(np.int64), target_ptr,
                                     dst[order].astype(np.int64), kernels.num_threads())
    _check_reachable(dist_sorted, "validation BFS")
    dist = np.empty(count, dtype=np.float64)
    dist[order] = dist_sorted
    return ValidationPairs(u, v, dist, int(sources.size))


BLOCKS_MAGIC = b"LHYD"
BLOCKS_VERSION = 1
_HEADER = struct.Struct("<4sHQQ")


def write_blocks(D: DistanceBlocks, fh) -> None:
    """Binary cache: magic, u16 version, u64 l, u64 m, then D_L and D_N as little-endian f64."""
    fh.write(_HEADER.pack(BLOCKS_MAGIC, BLOCKS_VERSION, D.l, D.m))
    fh.write(D.D_L.astype("<f8").tobytes(order="C"))
    fh.write(D.D_N.astype("<f8").tobytes(order="C"))


def read_blocks(fh) -> DistanceBlocks:
    head = fh.read(_HEADER.size)
    if len(head) != _HEADER.size:
        raise ValueError("truncated distance-block file")
    magic, version, l, m = _HEADER.unpack(head)
    if magic != BLOCKS_MAGIC:
        raise ValueError("not a distance-block file (bad magic)")
    if version != BLOCKS_VERSION:
        raise ValueError(f"unsupported distance-block version {version}")
    need = 8 * (l * l + m * l)
    body = fh.read(need)
    if len(body) != need:
        raise ValueError("truncated distance-block file")
    arr = np.frombuffer(body, dtype="<f8").astype(np.float64)
    return DistanceBlocks(arr[: l * l].reshape(l, l), arr[l * l:].reshape(m, l))


def is_blocks_file(path) -> bool:
    with open(path, "rb") as fh:
        return fh.read(4) == BLOCKS_MAGIC
