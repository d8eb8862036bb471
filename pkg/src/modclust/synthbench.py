"""Seeded synthetic benchmark with planted modules.

Each module has one latent activity profile; a member gene's profile is its
loading times the latent profile plus Gaussian noise. Every module is driven
by one synthetic regulator, so the strict gold standard derived from the
regulatory edges equals the planted truth.

Module latents may share an upstream driver (``latent_corr``), which puts
transitive correlation between modules.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ExpressionMatrix,
    InputError,
    Module,
    ModuleSet,
    PriorCluster,
    PriorClusterSet,
)


@dataclass(frozen=True)
class BenchConfig:
    n_genes: int = 100
    n_modules: int = 5
    n_samples: int = 40
    loading: tuple[float, float] = (0.5, 1.0)
    sigma: float = 1.0
    latent_corr: float = 0.0
    p_corrupt: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.n_genes >= self.n_modules >= 2:
            raise InputError("need n_genes >= n_modules >= 2")
        if self.n_samples < 10:
            raise InputError("need at least 10 samples")
        if self.sigma < 0:
            raise InputError("sigma must be non-negative")
        if not 0.0 <= self.latent_corr < 1.0:
            raise InputError("latent_corr must lie in [0, 1)")
        if not 0.0 <= self.p_corrupt <= 1.0:
            raise InputError("p_corrupt must lie in [0, 1]")
        lo, hi = self.loading
        if lo > hi:
            raise InputError("loading range is reversed")


@dataclass(frozen=True)
class Benchmark:
    expr: ExpressionMatrix
    truth: ModuleSet
    edges: tuple[tuple[str, str], ...]
    priors: PriorClusterSet


def _assignment(cfg: BenchConfig) -> np.ndarray:
    # contiguous, near-equal module sizes
    sizes = np.full(cfg.n_modules, cfg.n_genes // cfg.n_modules)
    sizes[: cfg.n_genes % cfg.n_modules] += 1
    return np.repeat(np.arange(cfg.n_modules), sizes)


def corrupt_assignment(labels: np.ndarray, p: float, rng: np.random.Generator) -> np.ndarray:
    """Shuffle the module labels of a random ``round(p * n)`` subset of genes."""
    out = labels.copy()
    k = int(round(p * len(labels)))
    if k >= 2:
        chosen = rng.choice(len(labels), size=k, replace=False)
        out[chosen] = labels[rng.permutation(chosen)]
    return out


def generate_benchmark(cfg: BenchConfig) -> Benchmark:
    rng = np.random.default_rng(cfg.seed)
    labels = _assignment(cfg)
    width = len(str(cfg.n_genes))
    genes = tuple(f"G{i + 1:0{width}d}" for i in range(cfg.n_genes))
    samples = tuple(f"S{j + 1}" for j in range(cfg.n_samples))
    drivers = rng.standard_normal((cfg.n_modules + 1, cfg.n_samples))
    c = cfg.latent_corr
    latent = np.sqrt(1.0 - c) * drivers[1:] + np.sqrt(c) * drivers[0]
    loadings = rng.uniform(*cfg.loading, size=cfg.n_genes)
    noise = rng.standard_normal((cfg.n_genes, cfg.n_samples))
    values = loadings[:, None] * latent[labels] + cfg.sigma * noise

    truth = ModuleSet(tuple(
        Module(f"R{k + 1}", frozenset(g for g, lab in zip(genes, labels) if lab == k))
        for k in range(cfg.n_modules)))
    edges = tuple((m.id, g) for m in truth for g in sorted(m.genes))

    prior_labels = corrupt_assignment(labels, cfg.p_corrupt, rng)
    priors = PriorClusterSet(tuple(
        PriorCluster(f"P{k + 1}", frozenset(g for g, lab in zip(genes, prior_labels) if lab == k))
        for k in range(cfg.n_modules)
        if np.count_nonzero(prior_labels == k) >= 2))
    return Benchmark(ExpressionMatrix(genes, samples, values), truth, edges, priors)
