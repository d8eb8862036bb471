"""Tab-separated file formats read and written by the command line tool.

All files are UTF-8 with ``#``-prefixed comment lines. Reals that must
round-trip (matrices, dendrogram heights) are written with ``repr``; report
tables use 12 significant digits.
"""
from __future__ import annotations

import hashlib
import math
import re
from pathlib import Path
from typing import Iterable, TextIO

import numpy as np

from .core import (
    CorrelationMatrix,
    CorrelationMeta,
    Dendrogram,
    ExpressionMatrix,
    InputError,
    Module,
    ModuleSet,
    PriorCluster,
    PriorClusterSet,
    RocCurve,
)

_NODE = re.compile(r"^#(\d+)$")


def fmt(x: float) -> str:
    """Report-table real: 12 significant digits."""
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.12g}"


def _data_lines(path: Path) -> Iterable[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            yield no, line.split("\t")


def _open_out(path) -> TextIO:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", encoding="utf-8", newline="\n")


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# --- expression ------------------------------------------------------------

def read_expression(path, samples_as_rows: bool = False) -> ExpressionMatrix:
    rows = list(_data_lines(Path(path)))
    if len(rows) < 2:
        raise InputError(f"{path}: expression file needs a header and data rows")
    header = rows[0][1][1:]
    labels, values = [], []
    for no, fields in rows[1:]:
        if len(fields) != len(header) + 1:
            raise InputError(f"{path}:{no}: expected {len(header) + 1} fields, "
                             f"got {len(fields)}")
        labels.append(fields[0])
        try:
            values.append([float(x) for x in fields[1:]])
        except ValueError as exc:
            raise InputError(f"{path}:{no}: {exc}") from None
    v = np.array(values, dtype=float)
    if samples_as_rows:
        return ExpressionMatrix(tuple(header), tuple(labels), v.T)
    return ExpressionMatrix(tuple(labels), tuple(header), v)


def write_expression(expr: ExpressionMatrix, path) -> None:
    with _open_out(path) as fh:
        fh.write("gene\t" + "\t".join(expr.samples) + "\n")
        for g, row in zip(expr.genes, expr.values):
            fh.write(g + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")


# --- module files (GMT-like) -----------------------------------------------

def read_modules(path, overlapping: bool = True) -> ModuleSet:
    modules = []
    for no, fields in _data_lines(Path(path)):
        genes = [g for g in fields[1:] if g]
        if not genes:
            raise InputError(f"{path}:{no}: module {fields[0]!r} has no genes")
        modules.append(Module(fields[0], frozenset(genes)))
    ms = ModuleSet(tuple(modules), overlapping=True)
    if not overlapping:
        ms = ModuleSet(ms.modules, overlapping=False)
    return ms


def read_priors(path) -> PriorClusterSet:
    clusters = []
    for no, fields in _data_lines(Path(path)):
        genes = frozenset(g for g in fields[1:] if g)
        if len(genes) < 2:
            continue
        clusters.append(PriorCluster(fields[0], genes))
    return PriorClusterSet(tuple(clusters))


def _write_sets(items: Iterable[tuple[str, Iterable[str]]], path, order=None) -> None:
    with _open_out(path) as fh:
        for name, genes in items:
            members = sorted(genes, key=order) if order else sorted(genes)
            fh.write(name + "\t" + "\t".join(members) + "\n")


def write_modules(modules: ModuleSet, path, gene_order: Iterable[str] | None = None) -> None:
    order = None
    if gene_order is not None:
        rank = {g: i for i, g in enumerate(gene_order)}
        order = lambda g: (rank.get(g, len(rank)), g)  # noqa: E731
    _write_sets(((m.id, m.genes) for m in modules), path, order)


def write_priors(priors: PriorClusterSet, path) -> None:
    _write_sets(((c.name, c.genes) for c in priors), path)


# --- edges -----------------------------------------------------------------

def read_edges(path) -> list[tuple[str, str]]:
    edges = []
    for no, fields in _data_lines(Path(path)):
        if len(fields) < 2 or not fields[0] or not fields[1]:
            raise InputError(f"{path}:{no}: expected regulator<TAB>target")
        edges.append((fields[0], fields[1]))
    return edges


def write_edges(edges: Iterable[tuple[str, str]], path) -> None:
    with _open_out(path) as fh:
        for a, b in edges:
            fh.write(f"{a}\t{b}\n")


# --- correlation matrices --------------------------------------------------

def write_correlation(m: CorrelationMatrix, path) -> None:
    with _open_out(path) as fh:
        meta = m.meta
        fh.write(f"#meta\tmetric={meta.metric}\tsupervised={int(meta.supervised)}"
                 f"\tdeconvolved={int(meta.deconvolved)}\n")
        fh.write("gene\t" + "\t".join(m.genes) + "\n")
        for g, row in zip(m.genes, m.values):
            fh.write(g + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")


def read_correlation(path) -> CorrelationMatrix:
    path = Path(path)
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#meta"):
                for field in line.rstrip("\n").split("\t")[1:]:
                    k, _, v = field.partition("=")
                    meta[k] = v
                break
    rows = list(_data_lines(path))
    if not rows:
        raise InputError(f"{path}: empty correlation file")
    genes = rows[0][1][1:]
    if [r[1][0] for r in rows[1:]] != genes:
        raise InputError(f"{path}: row labels do not match the header")
    try:
        v = np.array([[float(x) for x in r[1][1:]] for r in rows[1:]])
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None
    cm_meta = CorrelationMeta(metric=meta.get("metric", "unknown"),
                              supervised=meta.get("supervised") == "1",
                              deconvolved=meta.get("deconvolved") == "1")
    return CorrelationMatrix(tuple(genes), v, cm_meta)


# --- dendrogram ------------------------------------------------------------

def write_dendrogram(t: Dendrogram, path) -> None:
    n = t.n

    def name(node: int) -> str:
        return t.leaves[node] if node < n else f"#{node - n}"

    with _open_out(path) as fh:
        fh.write("#leaves\t" + "\t".join(t.leaves) + "\n")
        for a, b, h in t.merges:
            fh.write(f"{name(int(a))}\t{name(int(b))}\t{float(h)!r}\n")


def read_dendrogram(path) -> Dendrogram:
    """Parse a dendrogram file.

    Internal nodes are written ``#k`` (the node made by merge k), so here a
    ``#`` line is a comment only when it is not a three-field merge line.
    """
    leaves: list[str] | None = None
    merges = []
    with open(path, encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if fields[0] == "#leaves":
                leaves = fields[1:]
                continue
            if line.startswith("#") and not (len(fields) == 3 and _NODE.match(fields[0])):
                continue
            if len(fields) != 3:
                raise InputError(f"{path}:{no}: expected left<TAB>right<TAB>height")
            merges.append((no, fields))
    if leaves is None:
        leaves = []
        for _, (a, b, _h) in merges:
            for x in (a, b):
                if not _NODE.match(x) and x not in leaves:
                    leaves.append(x)
    index = {g: i for i, g in enumerate(leaves)}
    n = len(leaves)
    out = []
    for no, (a, b, h) in merges:
        ids = []
        for x in (a, b):
            m = _NODE.match(x)
            if m:
                ids.append(n + int(m.group(1)))
            elif x in index:
                ids.append(index[x])
            else:
                raise InputError(f"{path}:{no}: unknown leaf {x!r}")
        try:
            out.append((ids[0], ids[1], float(h)))
        except ValueError:
            raise InputError(f"{path}:{no}: bad height {h!r}") from None
    return Dendrogram(tuple(leaves), np.array(out, dtype=float).reshape(-1, 3))


# --- report tables ---------------------------------------------------------

ROC_HEADER = ("threshold", "fpr", "tpr", "tp", "fp", "tn", "fn")


def write_roc(curve: RocCurve, path) -> None:
    with _open_out(path) as fh:
        fh.write("\t".join(ROC_HEADER) + "\n")
        for p in curve.points:
            c = p.counts
            fh.write("\t".join([fmt(p.threshold), fmt(p.fpr), fmt(p.tpr),
                                str(c.tp), str(c.fp), str(c.tn), str(c.fn)]) + "\n")


def write_table(header: Iterable[str], rows: Iterable[Iterable], path) -> None:
    with _open_out(path) as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(fmt(x) if isinstance(x, float) else str(x) for x in row) + "\n")


def read_table(path) -> list[dict[str, str]]:
    rows = list(_data_lines(Path(path)))
    if not rows:
        return []
    header = rows[0][1]
    return [dict(zip(header, r)) for _, r in rows[1:]]
