"""Observed correlation matrices from expression profiles.

Five metrics are supported: Pearson (PCC), distance correlation (DCC) and
mutual information with three entropy estimators (MI1 plug-in, MI2
Miller-Madow, MI3 James-Stein shrinkage). Every metric is standardized into
[0, 1] before it lands in a :class:`CorrelationMatrix`.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import (
    ConstantProfile,
    CorrelationMatrix,
    CorrelationMeta,
    ExpressionMatrix,
    InputError,
    LengthMismatch,
    validate_correlation_matrix,
)

log = logging.getLogger(__name__)

AUTO = "auto"


class Metric(str, Enum):
    PCC = "pcc"
    DCC = "dcc"
    MI1 = "mi1"
    MI2 = "mi2"
    MI3 = "mi3"

    @property
    def is_mi(self) -> bool:
        return self in (Metric.MI1, Metric.MI2, Metric.MI3)


class Discretization(str, Enum):
    EQUAL_WIDTH = "equal-width"
    EQUAL_FREQUENCY = "equal-frequency"


@dataclass(frozen=True)
class MetricConfig:
    metric: Metric = Metric.PCC
    discretization: Discretization = Discretization.EQUAL_FREQUENCY
    bins: int | str = AUTO

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        object.__setattr__(self, "discretization", Discretization(self.discretization))
        if self.bins != AUTO and (not isinstance(self.bins, int) or self.bins < 2):
            raise InputError(f"bins must be an integer >= 2 or 'auto', got {self.bins!r}")


def _pair_arrays(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"sequences have shapes {x.shape} and {y.shape}")
    if len(x) < 3:
        raise InputError("need at least 3 observations")
    return x, y


def pearson(x, y) -> float:
    x, y = _pair_arrays(x, y)
    xc = x - x.mean()
    yc = y - y.mean()
    sx = math.sqrt(xc @ xc)
    sy = math.sqrt(yc @ yc)
    if sx == 0 or sy == 0:
        raise ConstantProfile()
    r = (xc @ yc) / (sx * sy)
    return float(min(1.0, max(-1.0, r)))


def _double_centered(x: np.ndarray) -> np.ndarray:
    """Double-centered pairwise distance matrices, one per row of ``x``.

    ``x`` has shape (k, m); the result has shape (k, m, m).
    """
    d = np.abs(x[:, :, None] - x[:, None, :])
    return (d - d.mean(axis=2, keepdims=True) - d.mean(axis=1, keepdims=True)
            + d.mean(axis=(1, 2), keepdims=True))


def distance_correlation(x, y) -> float:
    """Szekely's (V-statistic) distance correlation of two profiles."""
    x, y = _pair_arrays(x, y)
    a, b = _double_centered(np.stack([x, y]))
    dcov2 = np.mean(a * b)
    dvar_x = np.mean(a * a)
    dvar_y = np.mean(b * b)
    if dvar_x <= 0 or dvar_y <= 0:
        raise ConstantProfile()
    r2 = max(dcov2, 0.0) / math.sqrt(dvar_x * dvar_y)
    return float(min(1.0, math.sqrt(r2)))


def resolve_bins(bins, m: int) -> int:
    if bins == AUTO:
        return max(2, math.ceil(math.sqrt(m)))
    return int(bins)


def discretize(x, scheme=Discretization.EQUAL_FREQUENCY, bins=AUTO) -> np.ndarray:
    """Integer bin labels in ``0..bins-1``.

    Equal-width bins split [min, max] evenly with the last bin right-closed.
    Equal-frequency bins are rank blocks of ``ceil(m / bins)`` values, ties
    broken by position.
    """
    x = np.asarray(x, dtype=float)
    m = len(x)
    k = resolve_bins(bins, m)
    if k < 2:
        raise InputError("bins must be >= 2")
    scheme = Discretization(scheme)
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    lo, hi = x.min(), x.max()
    if lo == hi:
        return np.zeros(m, dtype=np.int64)
    if scheme is Discretization.EQUAL_WIDTH:
        labels = np.floor((x - lo) / (hi - lo) * k).astype(np.int64)
        return np.minimum(labels, k - 1)
    block = math.ceil(m / k)
    ranks = np.empty(m, dtype=np.int64)
    ranks[np.argsort(x, kind="stable")] = np.arange(m)
    return ranks // block


# ---------------------------------------------------------------------------
# Entropy estimators. All operate on count arrays along the last axis, so one
# call can estimate many tables at once.
# ---------------------------------------------------------------------------

def _plugin_entropy(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    if counts.ndim == 1:
        # empty cells dropped so that equal occupied tables sum identically
        p = counts[counts > 0] / counts.sum()
        return -np.sum(p * np.log(p))
    n = counts.sum(axis=-1, keepdims=True)
    p = counts / n
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, -p * np.log(p), 0.0)
    return terms.sum(axis=-1)


def _miller_madow_entropy(counts: np.ndarray) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=-1)
    occupied = np.count_nonzero(counts, axis=-1)
    return _plugin_entropy(counts) + (occupied - 1) / (2 * n)


def _shrink_entropy(counts: np.ndarray) -> np.ndarray:
    """Plug-in entropy of James-Stein shrunk frequencies.

    Target is the uniform distribution over all cells of the table; the
    shrinkage intensity is the closed-form optimum, clipped to [0, 1].
    """
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=-1, keepdims=True)
    cells = counts.shape[-1]
    theta = counts / n
    target = 1.0 / cells
    num = 1.0 - np.sum(theta ** 2, axis=-1, keepdims=True)
    den = (n - 1) * np.sum((target - theta) ** 2, axis=-1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(den > 0, num / den, 1.0)
    lam = np.clip(lam, 0.0, 1.0)
    shrunk = lam * target + (1 - lam) * theta
    return _plugin_entropy(shrunk)


_ENTROPY = {
    Metric.MI1: _plugin_entropy,
    Metric.MI2: _miller_madow_entropy,
    Metric.MI3: _shrink_entropy,
}


def entropy(labels, estimator=Metric.MI1, n_bins: int | None = None) -> float:
    labels = np.asarray(labels, dtype=np.int64)
    k = int(labels.max()) + 1 if n_bins is None else n_bins
    return float(_ENTROPY[Metric(estimator)](np.bincount(labels, minlength=k)))


def mutual_information(xb, yb, estimator=Metric.MI1, n_bins_x: int | None = None,
                       n_bins_y: int | None = None) -> float:
    """Mutual information (nats) between two discretized profiles.

    ``n_bins_*`` set the table sizes for the shrinkage estimator; by default
    they are taken from the largest label present.
    """
    xb = np.asarray(xb, dtype=np.int64)
    yb = np.asarray(yb, dtype=np.int64)
    if xb.shape != yb.shape:
        raise LengthMismatch(f"label sequences have shapes {xb.shape} and {yb.shape}")
    est = _ENTROPY[Metric(estimator)]
    kx = int(xb.max()) + 1 if n_bins_x is None else n_bins_x
    ky = int(yb.max()) + 1 if n_bins_y is None else n_bins_y
    cx = np.bincount(xb, minlength=kx)
    cy = np.bincount(yb, minlength=ky)
    cxy = np.bincount(xb * ky + yb, minlength=kx * ky)
    if np.count_nonzero(cx) <= 1 or np.count_nonzero(cy) <= 1:
        return 0.0
    mi = est(cx) + est(cy) - est(cxy)
    return float(max(mi, 0.0))


# ---------------------------------------------------------------------------
# Matrix construction
# ---------------------------------------------------------------------------

def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    env = os.environ.get("MODCLUST_WORKERS")
    return max(1, int(env)) if env else 1


def _check_constant(expr: ExpressionMatrix) -> None:
    v = expr.values
    const = np.ptp(v, axis=1) == 0
    if np.any(const):
        raise ConstantProfile(expr.genes[int(np.argmax(const))])


def _pcc_matrix(v: np.ndarray) -> np.ndarray:
    c = v - v.mean(axis=1, keepdims=True)
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    r = c @ c.T
    r = (r + r.T) / 2
    return np.clip(np.abs(r), 0.0, 1.0)


def _dcc_matrix(v: np.ndarray, chunk: int = 256) -> np.ndarray:
    n, m = v.shape
    flat = np.empty((n, m * m))
    for s in range(0, n, chunk):
        flat[s:s + chunk] = _double_centered(v[s:s + chunk]).reshape(-1, m * m)
    dcov2 = flat @ flat.T / (m * m)
    dvar = np.diag(dcov2).copy()
    if np.any(dvar <= 0):
        raise ConstantProfile()
    r2 = np.maximum(dcov2, 0.0) / np.sqrt(np.outer(dvar, dvar))
    r = np.sqrt(np.clip(r2, 0.0, 1.0))
    return (r + r.T) / 2


def _mi_matrix(v: np.ndarray, cfg: MetricConfig, workers: int) -> np.ndarray:
    n, m = v.shape
    k = resolve_bins(cfg.bins, m)
    labels = np.stack([discretize(row, cfg.discretization, k) for row in v])
    est = _ENTROPY[cfg.metric]
    marg = np.stack([np.bincount(row, minlength=k) for row in labels])
    h = est(marg)
    offsets = (np.arange(n) * k * k)[:, None]

    def row_mi(i: int) -> np.ndarray:
        # joint tables of gene i against all genes j >= i at once
        rest = labels[i:]
        codes = labels[i] * k + rest + offsets[: len(rest)]
        joint = np.bincount(codes.ravel(), minlength=len(rest) * k * k)
        hj = est(joint.reshape(len(rest), k * k))
        return h[i] + h[i:] - hj

    mi = np.zeros((n, n))
    nw = _worker_count(workers)
    if nw > 1:
        with ThreadPoolExecutor(nw) as pool:
            rows = list(pool.map(row_mi, range(n)))
    else:
        rows = [row_mi(i) for i in range(n)]
    for i, r in enumerate(rows):
        mi[i, i:] = r
        mi[i:, i] = r
    mi = np.maximum(mi, 0.0)
    # Self-information is the normalizer: it equals H(X) for MI1 and MI2 and
    # keeps MI3 of identical profiles at exactly 1.
    self_info = np.diag(mi).copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(np.outer(self_info, self_info) > 0,
                       mi / np.sqrt(np.outer(self_info, self_info)), 0.0)
    return np.clip(out, 0.0, 1.0)


def build_correlation_matrix(expr: ExpressionMatrix, cfg: MetricConfig | None = None,
                             workers: int | None = None) -> CorrelationMatrix:
    """Standardized all-pairs correlation matrix of the expression profiles.

    PCC is standardized by its absolute value, DCC is used as is and MI is
    normalized by the geometric mean of the two self-informations.
    """
    cfg = cfg or MetricConfig()
    _check_constant(expr)
    v = np.asarray(expr.values, dtype=float)
    if cfg.metric is Metric.PCC:
        out = _pcc_matrix(v)
    elif cfg.metric is Metric.DCC:
        out = _dcc_matrix(v)
    else:
        out = _mi_matrix(v, cfg, workers)
    np.fill_diagonal(out, 1.0)
    cm = CorrelationMatrix(expr.genes, out, CorrelationMeta(metric=cfg.metric.value))
    return validate_correlation_matrix(cm)
