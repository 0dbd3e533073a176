"""Error reports over the three pair classes and dimension sweeps.

Pair classes: ordered landmark pairs, landmark/non-landmark pairs (one per
entry of ``D_N``) and sampled validation pairs of non-landmarks.
"""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import metrics
from .embed import EmbeddingError, EmbeddingResult, optimize_curvature
from .geometry import project_to_hyperboloid
from .graph import DistanceBlocks, ValidationPairs

log = logging.getLogger(__name__)

REPORT_SCHEMA = "hyperembed.error-report/1"
PAIR_CLASSES = ("landmark", "landmark_nonlandmark", "validation")
METHODS = ("lhydra", "lhydra-plus")


@dataclass
class ClassError:
    ree: float
    rmse: float
    stress: float
    pairs: int
    max_abs_error: float

    @classmethod
    def from_sums(cls, s: metrics.PairSums) -> "ClassError":
        return cls(s.ree(), s.rmse(), s.stress, s.count, s.max_abs_error)


@dataclass
class ErrorReport:
    method: str
    kappa: float
    dim: int
    l: int
    m: int
    landmark: ClassError | None
    landmark_nonlandmark: ClassError | None
    validation: ClassError | None
    wall_times: dict = field(default_factory=dict)
    pair_convention: str = "ordered"

    @property
    def ree_landmark(self):
        return None if self.landmark is None else self.landmark.ree

    @property
    def ree_landmark_nonlandmark(self):
        return None if self.landmark_nonlandmark is None else self.landmark_nonlandmark.ree

    @property
    def ree_validation(self):
        return None if self.validation is None else self.validation.ree

    def to_dict(self) -> dict:
        d = asdict(self)
        return {"schema": REPORT_SCHEMA, **d}

    @classmethod
    def from_dict(cls, d: dict) -> "ErrorReport":
        d = dict(d)
        schema = d.pop("schema", None)
        if schema != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {schema!r}")
        names = {f.name for f in fields(cls)}
        d = {k: v for k, v in d.items() if k in names}
        for name in PAIR_CLASSES:
            if d.get(name) is not None:
                d[name] = ClassError(**d[name])
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ErrorReport":
        return cls.from_dict(json.loads(text))

    def rows(self) -> list[dict]:
        """Long-format rows ``(method, d, error_class, metric, value)``."""
        out = []
        for name in PAIR_CLASSES:
            ce = getattr(self, name)
            if ce is None:
                continue
            for metric in ("ree", "rmse"):
                out.append({"method": self.method, "d": self.dim, "error_class": name,
                            "metric": metric, "value": getattr(ce, metric), "status": "ok"})
        return out


def _rows_of_nodes(D: DistanceBlocks, n_rows: int) -> np.ndarray | None:
    order = D.node_order
    if order is None:
        return None
    pos = np.full(int(order.max()) + 1 if order.size else 0, -1, dtype=np.int64)
    pos[order] = np.arange(n_rows)
    return pos


def evaluate(result: EmbeddingResult, D: DistanceBlocks, validation: ValidationPairs | None = None) -> ErrorReport:
    """REE/RMSE per pair class at the result's curvature.

    Validation pairs carry graph node indices and are mapped to embedding
    rows through ``D.node_order``.
    """
    X = result.X if result.projected else project_to_hyperboloid(result.X)
    if X.shape[0] != D.l + D.m:
        raise ValueError("embedding rows do not match the distance blocks")
    kappa = result.kappa
    lm = metrics.landmark_sums(X[:D.l], D.D_L, kappa) if D.l > 1 else None
    ln = metrics.cross_sums(X[D.l:], X[:D.l], D.D_N, kappa) if D.m else None
    val = None
    if validation is not None and len(validation):
        pos = _rows_of_nodes(D, X.shape[0])
        if pos is None:
            raise ValueError("validation pairs need distance blocks that record node order")
        val = metrics.pair_sums(X, pos[validation.u], pos[validation.v], validation.distance, kappa)

    def wrap(s):
        if s is None or s.count == 0 or s.dist_sum <= 0:
            return None
        return ClassError.from_sums(s)

    times = {k: round(float(v), 3) for k, v in result.wall_times.items()}
    return ErrorReport(result.method, float(kappa), result.dim, D.l, D.m, wrap(lm), wrap(ln), wrap(val), times)


def run_method(D: DistanceBlocks, d: int, method: str = "lhydra", grid=None, gtol: float = 1e-6,
               maxiter: int = 500, start: EmbeddingResult | None = None) -> EmbeddingResult:
    """L-hydra with curvature search, optionally followed by stress refinement.

    ``start`` reuses an already computed L-hydra result for the refinement.
    """
    from .stress import StressProblem, refine

    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; choose from {', '.join(METHODS)}")
    if start is None:
        start, _ = optimize_curvature(D, d, grid)
    if method == "lhydra":
        return start
    return refine(StressProblem(D, start.kappa, start, gtol=gtol, maxiter=maxiter))


def sweep_dimensions(D: DistanceBlocks, dims, methods=("lhydra",), grid=None,
                     validation: ValidationPairs | None = None, gtol: float = 1e-6,
                     maxiter: int = 500) -> tuple[list[dict], list[ErrorReport]]:
    """Embed and evaluate for every dimension in ``dims`` and every method.

    The distance blocks are computed once by the caller and reused. A
    failing dimension yields a single ``status="error"`` row per method and
    the sweep continues. L-hydra+ reuses the L-hydra start of the same ``d``.
    """
    dims = list(dims)
    if not dims:
        raise ValueError("dimension list is empty")
    rows, reports = [], []
    for d in dims:
        start = None
        for method in methods:
            t0 = time.perf_counter()
            try:
                if method == "lhydra-plus" and start is None:
                    start = run_method(D, d, "lhydra", grid)
                res = run_method(D, d, method, grid, gtol, maxiter, start=start)
                if method == "lhydra":
                    start = res
                rep = evaluate(res, D, validation)
            except (EmbeddingError, ValueError) as exc:
                log.warning("d=%d %s failed: %s", d, method, exc)
                rows.append({"method": method, "d": d, "error_class": "", "metric": "",
                             "value": math.nan, "status": f"error: {exc}"})
                continue
            rep.wall_times["sweep_step"] = round(time.perf_counter() - t0, 3)
            reports.append(rep)
            rows.extend(rep.rows())
    return rows, reports


LONG_COLUMNS = ("method", "d", "error_class", "metric", "value", "status")


def write_long_csv(rows, fh) -> None:
    w = csv.DictWriter(fh, fieldnames=LONG_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        r = dict(r)
        r["value"] = "" if r["value"] is None or (isinstance(r["value"], float) and math.isnan(r["value"])) \
            else format(r["value"], ".17g")
        w.writerow(r)


def write_plot_data(rows, fh, metric: str = "ree") -> None:
    """Whitespace-separated columns for gnuplot: ``d`` then one column per method and class.

    Missing values are written as ``NaN``.
    """
    cols, table = [], {}
    for r in rows:
        if r["status"] != "ok" or r["metric"] != metric:
            continue
        key = f"{r['method']}:{r['error_class']}"
        if key not in cols:
            cols.append(key)
        table.setdefault(r["d"], {})[key] = r["value"]
    dims = sorted({r["d"] for r in rows})
    fh.write("# d " + " ".join(cols) + "\n")
    for d in dims:
        vals = [table.get(d, {}).get(c) for c in cols]
        fh.write(" ".join([str(d)] + ["NaN" if v is None else format(v, ".10g") for v in vals]) + "\n")
