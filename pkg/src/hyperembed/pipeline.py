"""Run configuration, input preparation and artifact writing for the CLI."""
from __future__ import annotations

import dataclasses
import hashlib
import io
import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .embed import DEFAULT_GRID
from .evaluation import METHODS, ErrorReport
from .geometry import write_points_csv
from .graph import (BLOCKS_MAGIC, DEFAULT_LANDMARKS, DistanceBlocks, Graph, LandmarkSet, ValidationPairs,
                    check_landmark_count, counters, landmark_distance_blocks, largest_connected_component,
                    load_edge_list, read_blocks, sample_validation_pairs, select_landmarks, write_blocks)

log = logging.getLogger(__name__)

SIDECAR_SCHEMA = "hyperembed.embedding/1"
DEFAULT_VALIDATION = 100_000


def parse_kappa_grid(spec) -> list[float]:
    """``"min:max:count"`` (log-spaced, endpoints included), ``"a,b,c"``, or a sequence."""
    if spec is None:
        return [float(k) for k in DEFAULT_GRID]
    if not isinstance(spec, str):
        grid = [float(k) for k in spec]
    elif ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"curvature grid must look like min:max:count, got {spec!r}")
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1 or not 0 < lo <= hi or not np.isfinite(hi):
            raise ValueError(f"invalid curvature grid {spec!r}: need 0 < min <= max and count >= 1")
        grid = [lo] if count == 1 else np.geomspace(lo, hi, count).tolist()
    else:
        grid = [float(k) for k in spec.split(",") if k.strip()]
    if not grid or any(not (k > 0 and np.isfinite(k)) for k in grid):
        raise ValueError(f"curvature grid must be a non-empty list of positive values, got {spec!r}")
    return grid


def parse_int_list(spec) -> list[int]:
    """``"2:10"`` (inclusive range), ``"2,3,5"`` or a sequence."""
    if not isinstance(spec, str):
        return [int(v) for v in spec]
    if ":" in spec:
        lo, hi = (int(v) for v in spec.split(":"))
        return list(range(lo, hi + 1))
    return [int(v) for v in spec.split(",") if v.strip()]


@dataclass
class RunConfig:
    input: str
    method: str = "lhydra"
    dim: int = 2
    landmarks: int = DEFAULT_LANDMARKS
    kappa_grid: str | list | None = None
    seed_landmarks: int = 0
    seed_validation: int = 1
    validation_count: int = DEFAULT_VALIDATION
    output: str = "out"
    cache: bool = False
    force_landmarks: bool = False
    gtol: float = 1e-6
    maxiter: int = 500

    def validate(self) -> "RunConfig":
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.dim < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dim}")
        if self.landmarks < 1:
            raise ValueError(f"landmark count must be >= 1, got {self.landmarks}")
        if self.validation_count < 0:
            raise ValueError("validation count must be non-negative")
        if self.gtol <= 0 or self.maxiter < 1:
            raise ValueError("gtol must be positive and maxiter >= 1")
        self.grid()
        return self

    def grid(self) -> list[float]:
        return parse_kappa_grid(self.kappa_grid)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["kappa_grid"] = self.grid()
        return d


@dataclass
class PreparedInput:
    blocks: DistanceBlocks
    node_ids: np.ndarray
    validation: ValidationPairs
    input_sha256: str
    graph: Graph | None = None
    landmarks: LandmarkSet | None = None
    wall_times: dict = field(default_factory=dict)
    from_cache: bool = False


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _cache_paths(cfg: RunConfig, digest: str) -> tuple[str, str]:
    base = os.path.join(cfg.output, ".cache",
                        f"{digest[:16]}-l{cfg.landmarks}-s{cfg.seed_landmarks}")
    return base + ".lhyd", f"{base}-v{cfg.validation_count}-s{cfg.seed_validation}.npz"


def _load_cached(cfg, digest, g, L):
    blocks_path, val_path = _cache_paths(cfg, digest)
    if not os.path.exists(blocks_path):
        return None
    with open(blocks_path, "rb") as fh:
        raw = read_blocks(fh)
    is_lm = np.zeros(g.n, dtype=bool)
    is_lm[L.indices] = True
    D = DistanceBlocks(raw.D_L, raw.D_N, L.indices.copy(), np.flatnonzero(~is_lm))
    if D.l != len(L) or D.m != g.n - len(L):
        log.warning("ignoring cache %s: shape does not match the input", blocks_path)
        return None
    val = None
    if os.path.exists(val_path):
        z = np.load(val_path)
        val = ValidationPairs(z["u"], z["v"], z["distance"], int(z["sources"]))
    return D, val


def _store_cache(cfg, digest, D, val):
    blocks_path, val_path = _cache_paths(cfg, digest)
    os.makedirs(os.path.dirname(blocks_path), exist_ok=True)
    with open(blocks_path, "wb") as fh:
        write_blocks(D, fh)
    if val is not None:
        np.savez(val_path, u=val.u, v=val.v, distance=val.distance, sources=val.sources)


def prepare_input(cfg: RunConfig) -> PreparedInput:
    """Load the input, select landmarks and compute (or load) the known distances.

    Edge lists are reduced to their largest component. A distance-block file
    (``LHYD`` magic) is used as is, with rows numbered landmarks first and no
    validation pairs.
    """
    t0 = time.perf_counter()
    with open(cfg.input, "rb") as fh:
        data = fh.read()
    digest = sha256_bytes(data)
    if data[:4] == BLOCKS_MAGIC:
        raw = read_blocks(io.BytesIO(data))
        check_landmark_count(raw.l, cfg.dim, cfg.force_landmarks)
        D = DistanceBlocks(raw.D_L, raw.D_N, np.arange(raw.l), np.arange(raw.l, raw.l + raw.m))
        return PreparedInput(D, np.arange(raw.l + raw.m), ValidationPairs.empty(), digest,
                             wall_times={"load": time.perf_counter() - t0, "distances": 0.0})
    g = largest_connected_component(load_edge_list(data))
    t1 = time.perf_counter()
    if cfg.landmarks > g.n:
        raise ValueError(f"{cfg.landmarks} landmarks requested but the graph has only {g.n} nodes")
    check_landmark_count(cfg.landmarks, cfg.dim, cfg.force_landmarks)
    L = select_landmarks(g, cfg.landmarks, cfg.seed_landmarks)
    cached = _load_cached(cfg, digest, g, L) if cfg.cache else None
    val = None
    if cached is not None:
        D, val = cached
        log.info("loaded distance blocks from cache")
    else:
        D = landmark_distance_blocks(g, L)
    if val is None:
        m = g.n - len(L)
        count = min(cfg.validation_count, m * (m - 1) // 2)
        val = sample_validation_pairs(g, L, count, cfg.seed_validation) if count > 0 else ValidationPairs.empty()
    if cfg.cache and cached is None:
        _store_cache(cfg, digest, D, val)
    elif cfg.cache and cached is not None and cached[1] is None:
        _store_cache(cfg, digest, D, val)
    t2 = time.perf_counter()
    return PreparedInput(D, g.node_ids, val, digest, g, L,
                         wall_times={"load": t1 - t0, "distances": t2 - t1},
                         from_cache=cached is not None)


def _dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_artifacts(cfg: RunConfig, prep: PreparedInput, result, report: ErrorReport) -> dict:
    """Coordinates CSV, JSON sidecar, error report and (for L-hydra+) the convergence log."""
    from .stress import write_convergence_log

    os.makedirs(cfg.output, exist_ok=True)
    paths = {
        "coordinates": os.path.join(cfg.output, "coordinates.csv"),
        "sidecar": os.path.join(cfg.output, "embedding.json"),
        "report": os.path.join(cfg.output, "report.json"),
    }
    order = prep.blocks.node_order
    ids = prep.node_ids[order] if order is not None else None
    with open(paths["coordinates"], "w", newline="") as fh:
        write_points_csv(fh, result.X, ids)
    refinement = result.refinement
    if refinement is not None:
        paths["convergence"] = os.path.join(cfg.output, "convergence.csv")
        with open(paths["convergence"], "w", newline="") as fh:
            write_convergence_log(refinement["convergence_log"], fh)
        result.refinement = {k: v for k, v in refinement.items() if k != "convergence_log"}
    times = dict(result.wall_times)
    times.update({f"input_{k}": v for k, v in prep.wall_times.items()})
    result.wall_times = times
    side = result.sidecar(schema=SIDECAR_SCHEMA, config=cfg.to_dict(), input_sha256=prep.input_sha256,
                          seed=cfg.seed_landmarks, bfs_runs=int(counters["bfs"]),
                          validation_pairs=len(prep.validation), distances_from_cache=prep.from_cache)
    result.refinement = refinement
    _dump_json(side, paths["sidecar"])
    rep = report.to_dict()
    rep["config"] = cfg.to_dict()
    rep["input_sha256"] = prep.input_sha256
    _dump_json(rep, paths["report"])
    return paths
