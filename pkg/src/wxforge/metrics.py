"""Embedding-distance metrics: Gaussian stats, Fréchet distance, kernel MMD,
contrastive scores, and cross-trigger distance matrices.

The Fréchet (FID-style) distance between Gaussian fits N(mu_a, S_a) and
N(mu_b, S_b) is

    ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).

The matrix square-root trace is computed from the eigenvalues of the
symmetrized product S_a^{1/2} S_b S_a^{1/2}, which keeps the computation on
a symmetric-PSD path: Tr((S_a S_b)^{1/2}) = sum_i sqrt(lambda_i).

The MMD^2 estimator uses a Gaussian kernel k(u, v) = exp(-||u-v||^2 / (2
sigma^2)). Defaults (unbiased estimator, sigma = 10, result x 1000) follow
the conventions of CLIP-embedding MMD scoring; all three are configurable.
"""

from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingSet
from .errors import (
    DimensionMismatchError,
    InsufficientSamplesError,
    InvalidDataError,
    NonPsdCovarianceError,
    SpaceTagMismatchError,
    UnknownTriggerError,
    ZeroDenominatorError,
)

DEFAULT_MMD_SIGMA = 10.0
DEFAULT_MMD_SCALE = 1000.0

NEGATIVE_FLOOR = -1e-9


class SampleSizeWarning(UserWarning):
    """Sample count below the embedding dimension; moment estimates are
    rank-deficient and the Fréchet distance may not have converged."""


@dataclass(frozen=True)
class GaussStats:
    """Sample mean and unbiased covariance (divisor n - 1) of one set."""

    mu: np.ndarray
    sigma: np.ndarray
    n: int


def gaussian_stats(es: EmbeddingSet) -> GaussStats:
    """Fit mean and unbiased covariance to an embedding set.

    Warns (non-fatally) when n < dim, the regime where the Fréchet distance
    is known not to converge.
    """
    if es.n < 2:
        raise InsufficientSamplesError(f"need n >= 2 samples, got {es.n}")
    if es.n < es.dim:
        warnings.warn(
            f"n = {es.n} < dim = {es.dim}: covariance is rank-deficient",
            SampleSizeWarning,
            stacklevel=2,
        )
    data = es.data.astype(np.float64)
    mu = data.mean(axis=0)
    sigma = np.cov(data, rowvar=False, ddof=1)
    sigma = np.atleast_2d(sigma)
    return GaussStats(mu=mu, sigma=sigma, n=es.n)


def _psd_sqrt(matrix: np.ndarray, name: str) -> np.ndarray:
    """Symmetric PSD square root via eigendecomposition."""
    eigvals, eigvecs = np.linalg.eigh(matrix)
    floor = -1e-6 * max(eigvals.max(), 1.0)
    if eigvals.min() < floor:
        raise NonPsdCovarianceError(
            f"{name} has negative eigenvalue {eigvals.min():.3e}"
        )
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(a: GaussStats, b: GaussStats) -> float:
    """Squared Fréchet (2-Wasserstein) distance between two Gaussian fits."""
    if a.mu.shape != b.mu.shape:
        raise DimensionMismatchError(
            f"dim {a.mu.shape[0]} vs {b.mu.shape[0]}"
        )
    diff = a.mu - b.mu
    a_half = _psd_sqrt(a.sigma, "covariance a")
    product = a_half @ b.sigma @ a_half
    product = (product + product.T) / 2.0
    eigvals = np.linalg.eigvalsh(product)
    floor = -1e-6 * max(eigvals.max(), 1.0)
    if eigvals.min() < floor:
        raise NonPsdCovarianceError(
            f"cross term has negative eigenvalue {eigvals.min():.3e}"
        )
    trace_sqrt = np.sqrt(np.clip(eigvals, 0.0, None)).sum()
    value = float(
        diff @ diff + np.trace(a.sigma) + np.trace(b.sigma) - 2.0 * trace_sqrt
    )
    if value < NEGATIVE_FLOOR:
        raise NonPsdCovarianceError(f"distance {value:.3e} below numerical floor")
    return max(value, 0.0)


# Cache Gaussian fits per content hash; fits dominate cross-matrix cost.
_stats_cache: dict[str, GaussStats] = {}
_stats_lock = threading.Lock()


def _cached_stats(es: EmbeddingSet) -> GaussStats:
    key = es.content_hash()
    with _stats_lock:
        hit = _stats_cache.get(key)
    if hit is not None:
        return hit
    stats = gaussian_stats(es)
    with _stats_lock:
        _stats_cache[key] = stats
    return stats


def fid(x: EmbeddingSet, y: EmbeddingSet) -> float:
    """Fréchet distance between the Gaussian fits of two embedding sets."""
    if x.dim != y.dim:
        raise DimensionMismatchError(f"dim {x.dim} vs {y.dim}")
    return frechet_distance(_cached_stats(x), _cached_stats(y))


def mmd2(x: EmbeddingSet, y: EmbeddingSet, sigma: float = DEFAULT_MMD_SIGMA,
         estimator: str = "unbiased", scale: float = DEFAULT_MMD_SCALE) -> float:
    """Squared maximum mean discrepancy under a Gaussian kernel.

    The unbiased estimator drops the diagonal terms and divides by
    n(n - 1); the biased one keeps full sums over n^2. The result is
    multiplied by ``scale``.
    """
    if x.dim != y.dim:
        raise DimensionMismatchError(f"dim {x.dim} vs {y.dim}")
    if estimator not in ("unbiased", "biased"):
        raise InvalidDataError(f"estimator must be unbiased|biased, got {estimator}")
    if sigma <= 0:
        raise InvalidDataError(f"bandwidth must be > 0, got {sigma}")
    nx, ny = x.n, y.n
    if estimator == "unbiased" and (nx < 2 or ny < 2):
        raise InsufficientSamplesError("unbiased estimator needs n >= 2 per set")
    if nx < 1 or ny < 1:
        raise InsufficientSamplesError("need at least one sample per set")

    xd = x.data.astype(np.float64)
    yd = y.data.astype(np.float64)
    gamma = 1.0 / (2.0 * sigma * sigma)

    def kernel(u, v):
        uu = (u * u).sum(axis=1)[:, None]
        vv = (v * v).sum(axis=1)[None, :]
        d2 = np.maximum(uu + vv - 2.0 * (u @ v.T), 0.0)
        return np.exp(-gamma * d2)

    kxx = kernel(xd, xd)
    kyy = kernel(yd, yd)
    kxy = kernel(xd, yd)
    if estimator == "unbiased":
        np.fill_diagonal(kxx, 0.0)
        np.fill_diagonal(kyy, 0.0)
        value = (
            kxx.sum() / (nx * (nx - 1))
            + kyy.sum() / (ny * (ny - 1))
            - 2.0 * kxy.sum() / (nx * ny)
        )
    else:
        value = kxx.mean() + kyy.mean() - 2.0 * kxy.sum() / (nx * ny)
    return float(value * scale)


def cmmd(x: EmbeddingSet, y: EmbeddingSet) -> float:
    """MMD^2 with the default bandwidth/scale conventions."""
    return mmd2(x, y)


# ---------------------------------------------------------------------------
# Contrastive scores


def contrastive(distances: dict[str, float], target: str) -> float:
    """Contrastive score toward one trigger.

    Given per-trigger distances d(t_1..t_n), the score is

        sum_{j != target} d(t_j) / d(target) - (n - 1),

    which grows when the set sits close to the target trigger while staying
    far from the others. Scale-invariant: multiplying all distances by a
    positive constant changes nothing.
    """
    if target not in distances:
        raise UnknownTriggerError(f"target {target!r} not among {sorted(distances)}")
    if len(distances) < 2:
        raise InsufficientSamplesError("need at least 2 triggers")
    denom = distances[target]
    if not denom > 0:
        raise ZeroDenominatorError(f"d({target}) = {denom}; must be > 0")
    total = sum(d / denom for t, d in distances.items() if t != target)
    return float(total - (len(distances) - 1))


# ---------------------------------------------------------------------------
# Cross-trigger distance matrices


@dataclass(frozen=True)
class DistanceMatrix:
    """Distances from named sets (rows) to named triggers (columns)."""

    row_sets: tuple[str, ...]
    col_triggers: tuple[str, ...]
    fid: np.ndarray | None = None
    cmmd: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, m in (("fid", self.fid), ("cmmd", self.cmmd)):
            if m is None:
                continue
            m = np.asarray(m, dtype=np.float64)
            if m.shape != (len(self.row_sets), len(self.col_triggers)):
                raise InvalidDataError(f"{name} matrix shape {m.shape} mismatch")
            if m.min() < NEGATIVE_FLOOR:
                raise InvalidDataError(f"{name} entries below numerical floor")
            object.__setattr__(self, name, np.clip(m, 0.0, None))

    def value(self, metric: str, row: str, col: str) -> float:
        matrix = getattr(self, metric)
        if matrix is None:
            raise InvalidDataError(f"matrix has no {metric} values")
        return float(matrix[self.row_sets.index(row), self.col_triggers.index(col)])

    def row(self, metric: str, row: str) -> dict[str, float]:
        matrix = getattr(self, metric)
        if matrix is None:
            raise InvalidDataError(f"matrix has no {metric} values")
        i = self.row_sets.index(row)
        return {t: float(matrix[i, j]) for j, t in enumerate(self.col_triggers)}


def _pick(entry, metric: str) -> EmbeddingSet:
    if isinstance(entry, EmbeddingSet):
        return entry
    try:
        return entry[metric]
    except (TypeError, KeyError):
        raise InvalidDataError(
            f"no embeddings for metric {metric!r}; pass an EmbeddingSet or a "
            "{'fid': ..., 'cmmd': ...} mapping"
        ) from None


def _check_space(sets: list[EmbeddingSet], metric: str) -> str:
    tags = {es.space_tag for es in sets}
    if len(tags) != 1:
        raise SpaceTagMismatchError(
            f"{metric} inputs span multiple embedding spaces: {sorted(tags)}"
        )
    return tags.pop()


def cross_matrix(sets: dict, triggers: dict, which: str = "both",
                 mmd_sigma: float = DEFAULT_MMD_SIGMA,
                 mmd_scale: float = DEFAULT_MMD_SCALE,
                 workers: int = 1) -> DistanceMatrix:
    """Full distance matrix between named sets and named trigger sets.

    Values may be plain :class:`EmbeddingSet` objects or, when ``which`` is
    ``both``, mappings ``{"fid": set_in_fid_space, "cmmd": set_in_cmmd_space}``
    (the two metrics conventionally use different embedding spaces). All
    participants of one metric must share a space tag.

    ``workers`` > 1 evaluates (row, column) pairs on a thread pool; every
    entry is independent, so the result is identical for any worker count.
    """
    if which not in ("fid", "cmmd", "both"):
        raise InvalidDataError(f"which must be fid|cmmd|both, got {which}")
    row_names = tuple(sets)
    col_names = tuple(triggers)
    metrics = ("fid", "cmmd") if which == "both" else (which,)
    out: dict[str, np.ndarray] = {}
    meta: dict = {"space_tags": {}, "sample_counts": {}}
    for metric in metrics:
        rows = [_pick(sets[n], metric) for n in row_names]
        cols = [_pick(triggers[n], metric) for n in col_names]
        meta["space_tags"][metric] = _check_space(rows + cols, metric)
        meta["sample_counts"][metric] = {
            **{n: e.n for n, e in zip(row_names, rows)},
            **{n: e.n for n, e in zip(col_names, cols)},
        }

        def one_pair(pair, metric=metric):
            row_set, col_set = pair
            if metric == "fid":
                return fid(row_set, col_set)
            # The unbiased estimator may go below zero for nearly
            # identical sets; as a distance the matrix floors at 0.
            return max(mmd2(row_set, col_set, sigma=mmd_sigma,
                            scale=mmd_scale), 0.0)

        pairs = [(r, c) for r in rows for c in cols]
        if workers > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=workers) as pool:
                values = list(pool.map(one_pair, pairs))
        else:
            values = [one_pair(p) for p in pairs]
        out[metric] = np.array(values).reshape(len(rows), len(cols))
    return DistanceMatrix(
        row_sets=row_names,
        col_triggers=col_names,
        fid=out.get("fid"),
        cmmd=out.get("cmmd"),
        metadata=meta,
    )


def matrix_to_csv(matrix: DistanceMatrix) -> str:
    """CSV with one row per set; columns named ``<trigger>_<metric>``."""
    headers = ["set"]
    for metric in ("fid", "cmmd"):
        if getattr(matrix, metric) is not None:
            headers.extend(f"{t}_{metric}" for t in matrix.col_triggers)
    lines = [",".join(headers)]
    for i, name in enumerate(matrix.row_sets):
        cells = [name]
        for metric in ("fid", "cmmd"):
            m = getattr(matrix, metric)
            if m is not None:
                cells.extend(f"{m[i, j]:.6g}" for j in range(len(matrix.col_triggers)))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def matrix_from_csv(text: str) -> DistanceMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise InvalidDataError("empty distance matrix CSV")
    headers = lines[0].split(",")
    if headers[0] != "set":
        raise InvalidDataError("first column must be 'set'")
    fid_cols = [(i, h[: -len("_fid")]) for i, h in enumerate(headers) if h.endswith("_fid")]
    cmmd_cols = [(i, h[: -len("_cmmd")]) for i, h in enumerate(headers) if h.endswith("_cmmd")]
    triggers = [t for _, t in fid_cols] or [t for _, t in cmmd_cols]
    if cmmd_cols and fid_cols and [t for _, t in cmmd_cols] != triggers:
        raise InvalidDataError("fid and cmmd trigger columns disagree")
    names, fid_rows, cmmd_rows = [], [], []
    for line in lines[1:]:
        cells = line.split(",")
        names.append(cells[0])
        if fid_cols:
            fid_rows.append([float(cells[i]) for i, _ in fid_cols])
        if cmmd_cols:
            cmmd_rows.append([float(cells[i]) for i, _ in cmmd_cols])
    return DistanceMatrix(
        row_sets=tuple(names),
        col_triggers=tuple(triggers),
        fid=np.array(fid_rows) if fid_cols else None,
        cmmd=np.array(cmmd_rows) if cmmd_cols else None,
    )
