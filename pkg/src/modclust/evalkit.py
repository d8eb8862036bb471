"""Pairwise evaluation of clusterings against gold-standard modules.

A gene pair is *positive* in a module set when both genes occur together in
at least one module, which handles overlapping gold standards. Counting goes
through sparse co-membership products, so cost scales with the sum of squared
module sizes rather than with the number of gene pairs.
"""
from __future__ import annotations

import math
from collections import defaultdict
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse

from .core import (
    ConfusionCounts,
    DegenerateGold,
    EmptyUniverse,
    Module,
    ModuleSet,
    RocCurve,
    RocPoint,
    TooFewPoints,
)

Sweep = Sequence[tuple[float, ModuleSet]]

KNEE_TIE_TOL = 1e-9


def _comembership(modules: ModuleSet, index: dict[str, int]) -> sparse.csr_matrix:
    """Upper-triangular boolean matrix of positive pairs within ``index``."""
    rows, cols = [], []
    for k, m in enumerate(modules):
        members = [index[g] for g in m.genes if g in index]
        rows.extend(members)
        cols.extend([k] * len(members))
    g = len(index)
    memb = sparse.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)),
                             shape=(g, max(len(modules), 1)))
    co = sparse.triu(memb @ memb.T, k=1).tocsr()
    co.data[:] = 1
    co.eliminate_zeros()
    return co


def evaluation_universe(pred: ModuleSet, gold: ModuleSet) -> list[str]:
    return sorted(pred.genes & gold.genes)


def pair_confusion(pred: ModuleSet, gold: ModuleSet) -> ConfusionCounts:
    """Pair counts over the genes covered by both ``pred`` and ``gold``."""
    universe = evaluation_universe(pred, gold)
    g = len(universe)
    if g < 2:
        raise EmptyUniverse(f"evaluation universe has {g} gene(s); need at least 2")
    index = {x: i for i, x in enumerate(universe)}
    p = _comembership(pred, index)
    q = _comembership(gold, index)
    pred_pos = p.nnz
    gold_pos = q.nnz
    tp = p.multiply(q).nnz
    total = g * (g - 1) // 2
    fp = pred_pos - tp
    fn = gold_pos - tp
    return ConfusionCounts(tp=tp, fp=fp, tn=total - tp - fp - fn, fn=fn)


def _ratio(a: int, b: int) -> float:
    return a / b if b else 0.0


def precision_recall_f(c: ConfusionCounts) -> tuple[float, float, float]:
    precision = _ratio(c.tp, c.tp + c.fp)
    recall = _ratio(c.tp, c.tp + c.fn)
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f


def roc(sweep: Sweep, gold: ModuleSet) -> RocCurve:
    """ROC over a threshold sweep, with (0, 0) and (1, 1) endpoints added.

    The endpoints are the all-singletons and all-in-one clusterings of the
    same universe; their thresholds are +inf and 0.
    """
    if not sweep:
        raise ValueError("empty sweep")
    points = []
    for eps, pred in sweep:
        c = pair_confusion(pred, gold)
        pos, neg = c.tp + c.fn, c.fp + c.tn
        if pos == 0 or neg == 0:
            raise DegenerateGold(
                f"gold standard has {pos} positive and {neg} negative pairs")
        points.append(RocPoint(float(eps), c.fp / neg, c.tp / pos, c))
    pos, neg = points[0].counts.tp + points[0].counts.fn, points[0].counts.fp + points[0].counts.tn
    points.append(RocPoint(math.inf, 0.0, 0.0, ConfusionCounts(0, 0, neg, pos)))
    points.append(RocPoint(0.0, 1.0, 1.0, ConfusionCounts(pos, neg, 0, 0)))
    points.sort(key=lambda p: (p.fpr, p.tpr))
    return RocCurve(tuple(points))


def auc(curve: RocCurve | Iterable[tuple[float, float]]) -> float:
    """Trapezoidal area under an ROC curve, after sorting by (FPR, TPR)."""
    if isinstance(curve, RocCurve):
        pts = [(p.fpr, p.tpr) for p in curve.points]
    else:
        pts = [(float(f), float(t)) for f, t in curve]
    if len(pts) < 2:
        raise TooFewPoints("AUC needs at least 2 points")
    pts.sort()
    area = 0.0
    for (f0, t0), (f1, t1) in zip(pts, pts[1:]):
        area += (f1 - f0) * (t0 + t1) / 2
    return float(min(1.0, max(0.0, area)))


def best_f(sweep: Sweep, gold: ModuleSet) -> tuple[float, float, float, float]:
    """Sweep point with maximal F; ties go to the larger threshold."""
    if not sweep:
        raise ValueError("empty sweep")
    best = None
    for eps, pred in sweep:
        p, r, f = precision_recall_f(pair_confusion(pred, gold))
        key = (f, eps)
        if best is None or key > best[0]:
            best = (key, (float(eps), p, r, f))
    return best[1]


def _normalize(values: np.ndarray) -> np.ndarray:
    lo, hi = values.min(), values.max()
    return (values - lo) / (hi - lo) if hi > lo else np.zeros_like(values)


def knee_angles(xs, ys) -> np.ndarray:
    """Angle (radians) at each interior point between its two neighbours."""
    x = _normalize(np.asarray(xs, dtype=float))
    y = _normalize(np.asarray(ys, dtype=float))
    a = np.stack([x[:-2] - x[1:-1], y[:-2] - y[1:-1]], axis=1)
    b = np.stack([x[2:] - x[1:-1], y[2:] - y[1:-1]], axis=1)
    cos = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
    return np.arccos(np.clip(cos, -1.0, 1.0))


def knee(curve: RocCurve | Sequence[tuple[float, float]]) -> int:
    """Index of the knee point, the interior point with the sharpest turn.

    Points are taken in (FPR, TPR) order with exact duplicates collapsed;
    the returned index refers to the input sequence. Angles within
    ``KNEE_TIE_TOL`` are tied and resolved by the smallest FPR.
    """
    if isinstance(curve, RocCurve):
        pts = [(p.fpr, p.tpr) for p in curve.points]
    else:
        pts = [(float(f), float(t)) for f, t in curve]
    order = sorted(range(len(pts)), key=lambda i: (pts[i], i))
    uniq = []
    for i in order:
        if not uniq or pts[i] != pts[uniq[-1]]:
            uniq.append(i)
    if len(uniq) < 3:
        raise TooFewPoints("knee detection needs at least 3 distinct points")
    xs = [pts[i][0] for i in uniq]
    ys = [pts[i][1] for i in uniq]
    angles = knee_angles(xs, ys)
    smallest = angles.min()
    # interior points are already in FPR order, so the first tied one wins
    k = int(np.flatnonzero(angles <= smallest + KNEE_TIE_TOL)[0])
    return uniq[k + 1]


def minimal_modules(edges: Iterable[tuple[str, str]]) -> ModuleSet:
    """One module per regulator holding its targets (overlapping)."""
    targets: dict[str, set[str]] = defaultdict(set)
    for reg, tgt in edges:
        targets[reg].add(tgt)
    seen = set()
    modules = []
    for reg in sorted(targets):
        genes = frozenset(targets[reg])
        if len(genes) < 2 or genes in seen:
            continue
        seen.add(genes)
        modules.append(Module(reg, genes))
    return ModuleSet(tuple(modules), overlapping=True)


def strict_modules(edges: Iterable[tuple[str, str]]) -> ModuleSet:
    """Targets grouped by their exact regulator set (disjoint)."""
    regulators: dict[str, set[str]] = defaultdict(set)
    for reg, tgt in edges:
        regulators[tgt].add(reg)
    groups: dict[tuple[str, ...], list[str]] = defaultdict(list)
    for tgt, regs in regulators.items():
        groups[tuple(sorted(regs))].append(tgt)
    modules = []
    for key in sorted(groups):
        genes = groups[key]
        if len(genes) >= 2:
            modules.append(Module("+".join(key), frozenset(genes)))
    return ModuleSet(tuple(modules), overlapping=False)
