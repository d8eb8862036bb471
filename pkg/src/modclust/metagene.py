"""Merging of near-duplicate expression profiles into meta-genes."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .core import ExpressionMatrix, InputError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MetageneMap:
    metagenes: tuple[tuple[str, tuple[str, ...]], ...]

    def members(self) -> dict[str, tuple[str, ...]]:
        return dict(self.metagenes)

    def rows(self):
        for mg, members in self.metagenes:
            for g in members:
                yield mg, g


def _signed_pcc(v: np.ndarray) -> np.ndarray:
    c = v - v.mean(axis=1, keepdims=True)
    c /= np.linalg.norm(c, axis=1, keepdims=True)
    return c @ c.T


def merge_metagenes(expr: ExpressionMatrix, tau: float = 0.95
                    ) -> tuple[ExpressionMatrix, MetageneMap]:
    """Merge genes linked by signed PCC > ``tau`` (transitive closure).

    Each connected component becomes one meta-gene whose profile is the mean
    of its members. Singletons keep their gene id; merged components are
    named ``MG<k>:<first member>``.
    """
    if not 0.0 < tau <= 1.0:
        raise InputError(f"tau must lie in (0, 1], got {tau}")
    v = np.asarray(expr.values, dtype=float)
    n = len(expr.genes)
    constant = np.ptp(v, axis=1) == 0
    for i in np.flatnonzero(constant):
        log.warning("gene %s has a constant profile and is not merged", expr.genes[i])
    ok = np.flatnonzero(~constant)
    rows, cols = [], []
    if len(ok) > 1:
        r = _signed_pcc(v[ok])
        iu, ju = np.nonzero(np.triu(r > tau, k=1))
        rows, cols = ok[iu], ok[ju]
    if len(rows) == 0:
        mapping = tuple((g, (g,)) for g in expr.genes)
        return expr, MetageneMap(mapping)
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    _, labels = connected_components(adj, directed=False)
    groups: dict[int, list[int]] = {}
    for i, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(i)
    names, profiles, mapping = [], [], []
    merged = 0
    for members in groups.values():
        if len(members) == 1:
            name = expr.genes[members[0]]
        else:
            merged += 1
            name = f"MG{merged}:{expr.genes[members[0]]}"
        names.append(name)
        profiles.append(v[members].mean(axis=0))
        mapping.append((name, tuple(expr.genes[i] for i in members)))
    out = ExpressionMatrix(tuple(names), expr.samples, np.vstack(profiles))
    return out, MetageneMap(tuple(mapping))
