"""Statistical analysis and reporting.

Pearson correlations with exact t-distribution p-values, PCA projection of
pooled embeddings, minimal-distance (spider) reports, and the correlation
studies joining metric scores to downstream results (classifier prediction
counts, fine-tuning mIoU).
"""

from __future__ import annotations

import csv
import importlib.resources
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .embeddings import EmbeddingSet
from .errors import (
    ConstantSeriesError,
    InsufficientSamplesError,
    InvalidDataError,
    LengthMismatchError,
    ParseError,
)
from .metrics import DistanceMatrix


@dataclass(frozen=True)
class CorrelationResult:
    """Pearson coefficient, two-tailed p-value, and sample count."""

    r: float
    p: float
    n: int


def pearson(x, y) -> CorrelationResult:
    """Pearson correlation with an exact two-tailed t-distribution p-value.

    r = cov(x, y) / (sd_x sd_y); under the null, t = r sqrt((n-2)/(1-r^2))
    follows a t-distribution with n-2 degrees of freedom, whose two-tailed
    tail mass is the regularized incomplete beta I_{v/(v+t^2)}(v/2, 1/2).
    The exact form matters here: observed p-values reach the 1e-20 range,
    far outside normal-approximation validity.
    """
    xa = np.asarray(x, dtype=np.float64)
    ya = np.asarray(y, dtype=np.float64)
    if xa.ndim != 1 or ya.ndim != 1:
        raise InvalidDataError("series must be 1-D")
    if xa.shape[0] != ya.shape[0]:
        raise LengthMismatchError(f"lengths {xa.shape[0]} vs {ya.shape[0]}")
    n = xa.shape[0]
    if n < 3:
        raise InsufficientSamplesError(f"need n >= 3, got {n}")
    xm = xa - xa.mean()
    ym = ya - ya.mean()
    sx = math.sqrt(float(xm @ xm))
    sy = math.sqrt(float(ym @ ym))
    if sx == 0.0 or sy == 0.0:
        raise ConstantSeriesError("correlation undefined for a constant series")
    r = float(xm @ ym) / (sx * sy)
    r = max(-1.0, min(1.0, r))
    # Exactly collinear inputs land within rounding error of |r| = 1; snap so
    # perfect linearity reports r = +-1, p = 0 rather than rounding noise.
    if 1.0 - abs(r) < 4 * np.finfo(np.float64).eps:
        r = math.copysign(1.0, r)
    p = _t_two_tailed(r, n)
    return CorrelationResult(r=r, p=p, n=n)


def _t_two_tailed(r: float, n: int) -> float:
    if abs(r) == 1.0:
        return 0.0
    dof = n - 2
    t2 = r * r * dof / (1.0 - r * r)
    return float(special.betainc(dof / 2.0, 0.5, dof / (dof + t2)))


# ---------------------------------------------------------------------------
# PCA projection


@dataclass(frozen=True)
class ProjectedPoints:
    """2-D projection of pooled embeddings with per-point set labels."""

    labels: tuple[str, ...]
    coords: np.ndarray
    explained_variance: tuple[float, float]


def pca_project(sets: dict[str, EmbeddingSet]) -> ProjectedPoints:
    """Project pooled, mean-centered embeddings onto their top-2 components.

    ``sets`` maps a label (typically a trigger name) to its embeddings; all
    points are pooled for the fit, so the projection is shared. Density
    rendering is left to plot consumers.
    """
    if not sets:
        raise InsufficientSamplesError("no embedding sets given")
    dims = {es.dim for es in sets.values()}
    if len(dims) != 1:
        raise InvalidDataError(f"sets have mixed dims: {sorted(dims)}")
    labels: list[str] = []
    blocks = []
    for name, es in sets.items():
        labels.extend([name] * es.n)
        blocks.append(es.data.astype(np.float64))
    pooled = np.vstack(blocks)
    if pooled.shape[0] < 3:
        raise InsufficientSamplesError("pooled n must be >= 3")
    centered = pooled - pooled.mean(axis=0)
    cov = (centered.T @ centered) / (pooled.shape[0] - 1)
    cov = np.atleast_2d(cov)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    components = eigvecs[:, :2] if cov.shape[0] >= 2 else eigvecs[:, :1]
    # Deterministic sign: largest-magnitude loading positive.
    for k in range(components.shape[1]):
        pivot = np.argmax(np.abs(components[:, k]))
        if components[pivot, k] < 0:
            components[:, k] = -components[:, k]
    coords = centered @ components
    if coords.shape[1] < 2:
        coords = np.hstack([coords, np.zeros((coords.shape[0], 1))])
    total = float(eigvals.sum())
    if total <= 0:
        ev = (0.0, 0.0)
    else:
        top = [float(eigvals[k]) / total if k < eigvals.size else 0.0 for k in (0, 1)]
        ev = (top[0], top[1])
    return ProjectedPoints(labels=tuple(labels), coords=coords,
                           explained_variance=ev)


# ---------------------------------------------------------------------------
# Minimal-distance report


@dataclass(frozen=True)
class MinDistanceReport:
    """Per (group label, trigger) minima over a distance matrix's rows."""

    triggers: tuple[str, ...]
    series: dict  # metric -> label -> {trigger: value}
    argmin: dict  # metric -> label -> {trigger: set name}

    def to_csv(self) -> str:
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["metric", "group", *self.triggers])
        for metric in sorted(self.series):
            for label in sorted(self.series[metric]):
                row = self.series[metric][label]
                w.writerow([metric, label] + [f"{row[t]:.6g}" for t in self.triggers])
        return out.getvalue()

    def to_text(self) -> str:
        lines = []
        for metric in sorted(self.series):
            lines.append(f"[{metric}] minimal distance per trigger")
            for label in sorted(self.series[metric]):
                cells = ", ".join(
                    f"{t}={self.series[metric][label][t]:.4g}"
                    f" ({self.argmin[metric][label][t]})"
                    for t in self.triggers
                )
                lines.append(f"  {label}: {cells}")
        return "\n".join(lines) + "\n"


def min_distance_report(matrix: DistanceMatrix,
                        grouping: dict[str, str] | None = None) -> MinDistanceReport:
    """Minimum distance to each trigger within each group of rows.

    ``grouping`` maps a row-set name to a group label (e.g. every
    augmentation subset of one toolkit to that toolkit's name); ungrouped
    rows form their own singleton groups. Output series are ready for
    spider-chart plotting.
    """
    if not matrix.row_sets:
        raise InvalidDataError("empty distance matrix")
    grouping = grouping or {}
    series: dict = {}
    argmin: dict = {}
    for metric in ("fid", "cmmd"):
        m = getattr(matrix, metric)
        if m is None:
            continue
        series[metric] = {}
        argmin[metric] = {}
        for i, name in enumerate(matrix.row_sets):
            label = grouping.get(name, name)
            dst = series[metric].setdefault(label, {})
            src = argmin[metric].setdefault(label, {})
            for j, trig in enumerate(matrix.col_triggers):
                v = float(m[i, j])
                if math.isnan(v):
                    continue
                if trig not in dst or v < dst[trig]:
                    dst[trig] = v
                    src[trig] = name
    return MinDistanceReport(triggers=matrix.col_triggers, series=series,
                             argmin=argmin)


# ---------------------------------------------------------------------------
# Results table and correlation studies


# Evaluation protocol constant: classifier predictions per subset.
CLASSIFIER_SAMPLE_SIZE = 800

TRIGGERS_ACDC = ("fog", "rain", "snow", "sun")


@dataclass(frozen=True)
class ResultsTable:
    """Per-subset metric scores joined with downstream results.

    Columns use dotted names: ``fid.<dataset>_<trigger>``,
    ``cmmd.<dataset>_<trigger>``, ``c_fid.<trigger>``, ``c_cmmd.<trigger>``,
    ``counts.<trigger>``, and ``retrain_miou``.
    """

    names: tuple[str, ...]
    columns: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise InvalidDataError("subset names must be unique")
        n = len(self.names)
        for key, col in self.columns.items():
            arr = np.asarray(col, dtype=np.float64)
            if arr.shape != (n,):
                raise InvalidDataError(f"column {key} has shape {arr.shape}")
            self.columns[key] = arr
        counts = [k for k in self.columns if k.startswith("counts.")]
        if counts:
            stack = np.vstack([self.columns[k] for k in counts])
            if stack.min() < 0:
                raise InvalidDataError("prediction counts must be >= 0")
            if stack.sum(axis=0).max() > CLASSIFIER_SAMPLE_SIZE:
                raise InvalidDataError(
                    f"per-subset counts exceed sample size {CLASSIFIER_SAMPLE_SIZE}"
                )

    def column(self, key: str) -> np.ndarray:
        try:
            return self.columns[key]
        except KeyError:
            raise InvalidDataError(
                f"no column {key!r}; available: {sorted(self.columns)}"
            ) from None

    def select(self, row_filter) -> np.ndarray:
        """Boolean row mask from a name predicate."""
        return np.array([bool(row_filter(n)) for n in self.names])


def is_abdd_subset(name: str) -> bool:
    """Rows from the augmented-BDD toolkit (everything not albumentations)."""
    return not name.startswith("albu_")


@dataclass(frozen=True)
class CorrelationStudy:
    x_field: str
    y_field: str
    filter_name: str
    result: CorrelationResult


def correlate_study(table: ResultsTable, x_field: str, y_field: str,
                    row_filter=is_abdd_subset,
                    filter_name: str = "abdd") -> CorrelationStudy:
    """Pearson correlation between two result columns over filtered rows."""
    mask = table.select(row_filter)
    if mask.sum() < 3:
        raise InsufficientSamplesError(
            f"filter keeps {int(mask.sum())} rows; need >= 3"
        )
    x = table.column(x_field)[mask]
    y = table.column(y_field)[mask]
    return CorrelationStudy(
        x_field=x_field,
        y_field=y_field,
        filter_name=filter_name,
        result=pearson(x, y),
    )


def _read_csv(text: str, expect: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or expect not in rows[0]:
        raise ParseError(f"results CSV missing column {expect!r}")
    return rows


def results_table_from_csvs(fid_text: str, cmmd_text: str,
                            contrastive_text: str) -> ResultsTable:
    """Join the three score tables (FID, CMMD, contrastive + counts).

    Header names follow the shipped fixtures: the score tables carry
    ``bdd_*`` / ``acdc_*`` distance columns plus ``retrain_miou``; the
    contrastive table carries ``c_fid_*`` / ``c_cmmd_*`` / ``count_*``.
    """
    fid_rows = _read_csv(fid_text, "augmentation")
    cmmd_rows = _read_csv(cmmd_text, "augmentation")
    con_rows = _read_csv(contrastive_text, "augmentation")
    names = tuple(r["augmentation"] for r in fid_rows)
    if names != tuple(r["augmentation"] for r in cmmd_rows) or names != tuple(
        r["augmentation"] for r in con_rows
    ):
        raise ParseError("the three tables list different subsets")

    columns: dict[str, list[float]] = {}

    def put(key, rows, col):
        columns[key] = [float(r[col]) for r in rows]

    dist_cols = [c for c in fid_rows[0] if c.startswith(("bdd_", "acdc_"))]
    for c in dist_cols:
        put(f"fid.{c}", fid_rows, c)
        put(f"cmmd.{c}", cmmd_rows, c)
    put("retrain_miou", fid_rows, "retrain_miou")
    for t in TRIGGERS_ACDC:
        put(f"c_fid.{t}", con_rows, f"c_fid_{t}")
        put(f"c_cmmd.{t}", con_rows, f"c_cmmd_{t}")
        put(f"counts.{t}", con_rows, f"count_{t}")
    return ResultsTable(names=names, columns=columns)


def _fixture_text(name: str) -> str:
    return (
        importlib.resources.files("wxforge").joinpath(f"fixtures/{name}").read_text()
    )


def bundled_results_table() -> ResultsTable:
    """The transcribed published benchmark tables shipped with the package."""
    return results_table_from_csvs(
        _fixture_text("abdd_fid_scores.csv"),
        _fixture_text("abdd_cmmd_scores.csv"),
        _fixture_text("abdd_contrastive_scores.csv"),
    )


def bundled_trigger_matrix(dataset: str) -> DistanceMatrix:
    """Cross-trigger distance fixtures (``bdd`` or ``acdc``)."""
    from .metrics import matrix_from_csv

    if dataset not in ("bdd", "acdc"):
        raise InvalidDataError("dataset must be 'bdd' or 'acdc'")
    return matrix_from_csv(_fixture_text(f"{dataset}_trigger_distances.csv"))
