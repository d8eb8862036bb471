"""Supervision of a correlation matrix by prior clusters.

Each prior cluster C has its off-diagonal sub-block divided by
``gamma = rho * d(C)``, where ``d(C)`` is the largest off-diagonal value in the
block. Reliability is given as ``rho_hat`` in [0, 1], mapped per cluster onto
``rho = 1 + rho_hat * (1 / d(C) - 1)``: ``rho_hat = 0`` trusts the prior fully
(block maximum raised to 1) and ``rho_hat = 1`` leaves the matrix untouched.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import (
    CorrelationMatrix,
    DegeneratePriorBlock,
    EmptyPriorCluster,
    InputError,
    PriorCluster,
    PriorClusterSet,
    UnknownGene,
    validate_correlation_matrix,
)

log = logging.getLogger(__name__)

CERTAIN = 0.0
OFF = 1.0


@dataclass(frozen=True)
class SupervisionConfig:
    rho_hat: float = CERTAIN
    mode: str = "global"

    def __post_init__(self):
        if not 0.0 <= self.rho_hat <= 1.0:
            raise InputError(f"rho_hat must lie in [0, 1], got {self.rho_hat}")
        if self.mode not in ("global", "local"):
            raise InputError(f"mode must be 'global' or 'local', got {self.mode!r}")

    @classmethod
    def certain(cls, mode: str = "global") -> "SupervisionConfig":
        return cls(CERTAIN, mode)

    @classmethod
    def off(cls, mode: str = "global") -> "SupervisionConfig":
        return cls(OFF, mode)


def _rho_hat(policy) -> float:
    if isinstance(policy, SupervisionConfig):
        return policy.rho_hat
    if policy == "certain":
        return CERTAIN
    if policy == "off":
        return OFF
    return float(policy)


def communities_from_edges(genes: Sequence[str], edges: Iterable[tuple[str, str]],
                           prefix: str = "C") -> PriorClusterSet:
    """One prior cluster per connected component (of size >= 2) of the edges.

    Clusters are ordered by the position of their first gene in ``genes``.
    """
    genes = list(dict.fromkeys(genes))
    index = {g: i for i, g in enumerate(genes)}
    rows, cols = [], []
    for a, b in edges:
        for g in (a, b):
            if g not in index:
                raise UnknownGene(f"edge references unknown gene {g!r}")
        rows.append(index[a])
        cols.append(index[b])
    if not rows:
        return PriorClusterSet(())
    n = len(genes)
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    sizes = np.bincount(labels)
    members: dict[int, list[str]] = {}
    for i, lab in enumerate(labels):
        if sizes[lab] >= 2:
            members.setdefault(lab, []).append(genes[i])
    return PriorClusterSet(tuple(
        PriorCluster(f"{prefix}{k + 1}", frozenset(g))
        for k, g in enumerate(members.values())))


def _block_index(d: CorrelationMatrix, genes: Iterable[str], name: str = "") -> np.ndarray:
    index = d.index()
    genes = set(genes)
    present = sorted(index[g] for g in genes if g in index)
    missing = len(genes) - len(present)
    if missing:
        log.warning("prior cluster %s: %d gene(s) absent from the matrix were dropped",
                    name or "<unnamed>", missing)
    if len(present) < 2:
        raise EmptyPriorCluster(
            f"prior cluster {name!r} has fewer than 2 genes in the matrix")
    return np.array(present, dtype=np.int64)


def block_gamma(values: np.ndarray, idx: np.ndarray, rho_hat: float,
                name: str = "") -> float:
    """Divisor ``gamma = rho * d(C)`` for the sub-block ``idx``.

    Written as ``d + rho_hat * (1 - d)`` which is monotone in ``rho_hat`` under
    floating-point rounding and exact at both ends.
    """
    block = values[np.ix_(idx, idx)]
    off = ~np.eye(len(idx), dtype=bool)
    dmax = float(block[off].max())
    if dmax <= 0:
        raise DegeneratePriorBlock(f"prior cluster {name!r} has an all-zero block")
    if rho_hat >= 1.0:
        return 1.0
    return min(1.0, dmax + rho_hat * (1.0 - dmax))


def _apply_divisor(d: CorrelationMatrix, divisor: np.ndarray) -> CorrelationMatrix:
    v = np.array(d.values)
    mask = divisor < 1.0
    v[mask] = np.minimum(v[mask] / divisor[mask], 1.0)
    np.fill_diagonal(v, 1.0)
    return validate_correlation_matrix(d.with_values(v, supervised=True))


def magnify_cluster(d: CorrelationMatrix, cluster, rho_policy=CERTAIN,
                    name: str = "") -> CorrelationMatrix:
    """Magnify the off-diagonal block of one prior cluster."""
    if isinstance(cluster, PriorCluster):
        name, cluster = cluster.name, cluster.genes
    idx = _block_index(d, cluster, name)
    gamma = block_gamma(d.values, idx, _rho_hat(rho_policy), name)
    divisor = np.ones(d.values.shape)
    divisor[np.ix_(idx, idx)] = gamma
    return _apply_divisor(d, divisor)


def incorporate_global(d: CorrelationMatrix, priors: PriorClusterSet,
                       cfg: SupervisionConfig | None = None) -> CorrelationMatrix:
    """Apply every prior cluster to one matrix.

    A pair shared by several clusters is divided by the smallest of their
    gammas, so the result does not depend on cluster order.
    """
    cfg = cfg or SupervisionConfig()
    if len(priors) == 0:
        return d
    divisor = np.ones(d.values.shape)
    for c in priors:
        idx = _block_index(d, c.genes, c.name)
        gamma = block_gamma(d.values, idx, cfg.rho_hat, c.name)
        sub = np.ix_(idx, idx)
        divisor[sub] = np.minimum(divisor[sub], gamma)
    return _apply_divisor(d, divisor)


def incorporate_local(d: CorrelationMatrix, priors: PriorClusterSet,
                      cfg: SupervisionConfig | None = None,
                      workers: int = 1) -> list[tuple[str, CorrelationMatrix]]:
    cfg = cfg or SupervisionConfig(mode="local")

    def one(c: PriorCluster) -> tuple[str, CorrelationMatrix]:
        return c.name, magnify_cluster(d, c.genes, cfg.rho_hat, c.name)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(one, priors))
    return [one(c) for c in priors]
