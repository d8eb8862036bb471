"""Shared domain types for module detection.

All containers are frozen dataclasses holding read-only numpy arrays, so they
can be passed between threads without copying.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Sequence

import numpy as np

SYMMETRY_TOL = 1e-12
RANGE_TOL = 1e-12


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------

class ModclustError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 1


class InputError(ModclustError, ValueError):
    """Malformed input data or file."""

    exit_code = 2


class NumericError(ModclustError, ArithmeticError):
    """A numerical routine could not produce a valid result."""

    exit_code = 3


class DegenerateEvaluation(ModclustError, ValueError):
    exit_code = 4


class AsymmetricMatrix(InputError):
    pass


class OutOfRangeEntry(InputError):
    pass


class BadDiagonal(InputError):
    pass


class LengthMismatch(InputError):
    pass


class UnknownGene(InputError):
    pass


class ConstantProfile(InputError):
    def __init__(self, gene: str | None = None, message: str | None = None):
        self.gene = gene
        if message is None:
            message = (f"constant expression profile for gene {gene!r}"
                       if gene is not None else "constant expression profile")
        super().__init__(message)


class EmptyPriorCluster(InputError):
    pass


class DegeneratePriorBlock(NumericError):
    pass


class SingularShift(NumericError):
    pass


class NonConvergentEigensolve(NumericError):
    pass


class SpectralRadiusTooLarge(NumericError):
    pass


class EmptyUniverse(DegenerateEvaluation):
    pass


class DegenerateGold(DegenerateEvaluation):
    pass


class TooFewPoints(DegenerateEvaluation):
    pass


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

def check_gene_id(symbol: str) -> str:
    if not isinstance(symbol, str) or not symbol:
        raise InputError(f"gene identifier must be a non-empty string, got {symbol!r}")
    if any(c in symbol for c in "\t\n\r"):
        raise InputError(f"gene identifier {symbol!r} contains tab or newline")
    return symbol


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ExpressionMatrix:
    """Genes x samples expression table (gene-major)."""

    genes: tuple[str, ...]
    samples: tuple[str, ...]
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        genes = tuple(check_gene_id(g) for g in self.genes)
        samples = tuple(str(s) for s in self.samples)
        values = _frozen_array(self.values)
        object.__setattr__(self, "genes", genes)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape != (len(genes), len(samples)):
            raise InputError(
                f"expression values have shape {values.shape}, expected "
                f"({len(genes)}, {len(samples)})")
        if len(genes) < 2:
            raise InputError("expression matrix needs at least 2 genes")
        if len(samples) < 3:
            raise InputError("expression matrix needs at least 3 samples")
        if len(set(genes)) != len(genes):
            raise InputError("gene identifiers are not unique")
        if not np.all(np.isfinite(values)):
            raise InputError("expression matrix contains non-finite values")

    @property
    def n_genes(self) -> int:
        return len(self.genes)

    @property
    def n_samples(self) -> int:
        return len(self.samples)

    def subset(self, genes: Sequence[str]) -> "ExpressionMatrix":
        index = {g: i for i, g in enumerate(self.genes)}
        rows = [index[g] for g in genes]
        return ExpressionMatrix(tuple(genes), self.samples, self.values[rows])


@dataclass(frozen=True)
class CorrelationMeta:
    metric: str = "unknown"
    supervised: bool = False
    deconvolved: bool = False


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric similarity matrix with unit diagonal and entries in [0, 1].

    The constructor only checks the shape; use
    :func:`validate_correlation_matrix` to enforce the value invariants.
    """

    genes: tuple[str, ...]
    values: np.ndarray = field(repr=False)
    meta: CorrelationMeta = CorrelationMeta()

    def __post_init__(self):
        genes = tuple(check_gene_id(g) for g in self.genes)
        values = _frozen_array(self.values)
        object.__setattr__(self, "genes", genes)
        object.__setattr__(self, "values", values)
        n = len(genes)
        if values.shape != (n, n):
            raise InputError(f"matrix shape {values.shape} does not match {n} genes")
        if len(set(genes)) != n:
            raise InputError("gene identifiers are not unique")

    @property
    def n(self) -> int:
        return len(self.genes)

    def index(self) -> dict[str, int]:
        return {g: i for i, g in enumerate(self.genes)}

    def with_values(self, values: np.ndarray, **meta_changes) -> "CorrelationMatrix":
        return CorrelationMatrix(self.genes, values, replace(self.meta, **meta_changes))


def validate_correlation_matrix(m: CorrelationMatrix) -> CorrelationMatrix:
    """Check the correlation-matrix invariants and return a cleaned copy.

    Asymmetry up to ``SYMMETRY_TOL`` is removed by averaging with the
    transpose; entries within ``RANGE_TOL`` outside [0, 1] are clipped.
    """
    v = np.array(m.values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise OutOfRangeEntry("correlation matrix contains non-finite values")
    asym = np.max(np.abs(v - v.T)) if v.size else 0.0
    if asym > SYMMETRY_TOL:
        raise AsymmetricMatrix(f"matrix asymmetry {asym:.3g} exceeds {SYMMETRY_TOL}")
    if asym > 0:
        v = (v + v.T) / 2
    diag = np.diag(v)
    if np.any(np.abs(diag - 1.0) > RANGE_TOL):
        raise BadDiagonal("diagonal entries must equal 1")
    if np.any(v < -RANGE_TOL) or np.any(v > 1 + RANGE_TOL):
        i, j = np.unravel_index(np.argmax(np.maximum(v - 1, -v)), v.shape)
        raise OutOfRangeEntry(
            f"entry ({m.genes[i]}, {m.genes[j]}) = {v[i, j]!r} outside [0, 1]")
    np.clip(v, 0.0, 1.0, out=v)
    np.fill_diagonal(v, 1.0)
    return CorrelationMatrix(m.genes, v, m.meta)


@dataclass(frozen=True)
class PriorCluster:
    name: str
    genes: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "genes", frozenset(self.genes))
        if len(self.genes) < 2:
            raise EmptyPriorCluster(f"prior cluster {self.name!r} has fewer than 2 genes")


@dataclass(frozen=True)
class PriorClusterSet:
    clusters: tuple[PriorCluster, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "clusters", tuple(self.clusters))

    @classmethod
    def from_mapping(cls, mapping) -> "PriorClusterSet":
        return cls(tuple(PriorCluster(k, frozenset(v)) for k, v in mapping.items()))

    def __len__(self) -> int:
        return len(self.clusters)

    def __iter__(self) -> Iterator[PriorCluster]:
        return iter(self.clusters)


@dataclass(frozen=True)
class Dendrogram:
    """Single-linkage merge tree.

    Node ids follow the usual convention: leaves are ``0..n-1`` and the node
    created by merge ``k`` is ``n + k``. Heights are dissimilarities
    (``1 - similarity``).
    """

    leaves: tuple[str, ...]
    merges: np.ndarray = field(repr=False)  # (n-1, 3): left, right, height

    def __post_init__(self):
        leaves = tuple(check_gene_id(g) for g in self.leaves)
        merges = _frozen_array(np.asarray(self.merges, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "leaves", leaves)
        object.__setattr__(self, "merges", merges)
        n = len(leaves)
        if merges.shape[0] != n - 1:
            raise InputError(f"dendrogram over {n} leaves needs {n - 1} merges, "
                             f"got {merges.shape[0]}")
        h = merges[:, 2]
        if np.any(np.diff(h) < 0):
            raise InputError("merge heights must be non-decreasing")
        seen = np.zeros(2 * n - 1, dtype=bool)
        for k, (a, b) in enumerate(merges[:, :2].astype(np.int64)):
            for node in (a, b):
                if node < 0 or node >= n + k or seen[node]:
                    raise InputError(f"merge {k} references invalid node {node}")
                seen[node] = True

    @property
    def n(self) -> int:
        return len(self.leaves)

    @property
    def heights(self) -> np.ndarray:
        return self.merges[:, 2]


@dataclass(frozen=True)
class Module:
    id: str
    genes: frozenset[str]


@dataclass(frozen=True)
class ModuleSet:
    modules: tuple[Module, ...]
    overlapping: bool = False

    def __post_init__(self):
        mods = tuple(Module(m.id, frozenset(m.genes)) for m in self.modules)
        object.__setattr__(self, "modules", mods)
        for m in mods:
            if not m.genes:
                raise InputError(f"module {m.id!r} is empty")
        if not self.overlapping:
            total = sum(len(m.genes) for m in mods)
            if total != len(self.genes):
                raise InputError("modules overlap but overlapping=False")

    @classmethod
    def from_lists(cls, groups: Iterable[Iterable[str]], overlapping: bool = False,
                   prefix: str = "M") -> "ModuleSet":
        return cls(tuple(Module(f"{prefix}{k + 1}", frozenset(g))
                         for k, g in enumerate(groups)), overlapping)

    @property
    def genes(self) -> frozenset[str]:
        return frozenset().union(*(m.genes for m in self.modules))

    def __len__(self) -> int:
        return len(self.modules)

    def __iter__(self) -> Iterator[Module]:
        return iter(self.modules)

    def partition_key(self) -> frozenset[frozenset[str]]:
        return frozenset(m.genes for m in self.modules)

    def largest(self) -> Module:
        # ties go to the first module in listing order
        return max(self.modules, key=lambda m: len(m.genes))


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    fpr: float
    tpr: float
    counts: ConfusionCounts


@dataclass(frozen=True)
class RocCurve:
    points: tuple[RocPoint, ...]

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        for p in self.points:
            if not (0.0 <= p.fpr <= 1.0 and 0.0 <= p.tpr <= 1.0):
                raise ValueError("FPR and TPR must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def fpr(self) -> np.ndarray:
        return np.array([p.fpr for p in self.points])

    @property
    def tpr(self) -> np.ndarray:
        return np.array([p.tpr for p in self.points])
