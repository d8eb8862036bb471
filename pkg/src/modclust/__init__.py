"""Semi-supervised single-linkage module detection on deconvolved correlation matrices."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ConfusionCounts,
    CorrelationMatrix,
    CorrelationMeta,
    Dendrogram,
    ExpressionMatrix,
    Module,
    ModuleSet,
    PriorCluster,
    PriorClusterSet,
    RocCurve,
    RocPoint,
    validate_correlation_matrix,
)

__all__ = [
    "ConfusionCounts",
    "CorrelationMatrix",
    "CorrelationMeta",
    "Dendrogram",
    "ExpressionMatrix",
    "Module",
    "ModuleSet",
    "PriorCluster",
    "PriorClusterSet",
    "RocCurve",
    "RocPoint",
    "validate_correlation_matrix",
]
