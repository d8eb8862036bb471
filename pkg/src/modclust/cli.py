"""Command line interface and pipeline orchestration.

``modclust run`` chains metagene merging, correlation, prior incorporation,
deconvolution, single-linkage clustering, threshold sweep and evaluation.
Every other subcommand wraps one library operation and reads/writes the
formats in :mod:`modclust.formats`.
"""
from __future__ import annotations

import argparse
import json
import logging
import shutil
import sys
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__
from . import formats as io
from .core import InputError, ModclustError, ModuleSet, validate_correlation_matrix
from .corrmat import AUTO, Discretization, Metric, MetricConfig, build_correlation_matrix
from .deconv import DeconvConfig, deconvolve
from .evalkit import (
    auc,
    best_f,
    knee,
    minimal_modules,
    pair_confusion,
    precision_recall_f,
    roc,
    strict_modules,
)
from .hac import cut, single_linkage, threshold_sweep
from .metagene import merge_metagenes
from .priors import (
    SupervisionConfig,
    communities_from_edges,
    incorporate_global,
    incorporate_local,
)
from .synthbench import BenchConfig, generate_benchmark

log = logging.getLogger("modclust")

METRICS_HEADER = ("auc", "best_epsilon", "precision", "recall", "f",
                  "knee_epsilon", "knee_fpr", "knee_tpr",
                  "selected_epsilon", "n_modules", "largest_module_size")


class StageError(ModclustError):
    """An error raised inside a pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 2 if isinstance(cause, OSError) else 1)
        super().__init__(f"[{stage}] {cause}")


@dataclass
class RunConfig:
    expr: Path
    out_dir: Path
    metric: MetricConfig = field(default_factory=MetricConfig)
    supervision: SupervisionConfig | None = None
    prior: Path | None = None
    prior_edges: Path | None = None
    deconv: DeconvConfig | None = None
    gold: Path | None = None
    step: float = 0.01
    metagene_tau: float | None = None
    epsilon: float | None = None
    select: str = "best-f"
    samples_as_rows: bool = False
    seed: int = 0

    def __post_init__(self):
        self.expr = Path(self.expr)
        self.out_dir = Path(self.out_dir)
        for name in ("prior", "prior_edges", "gold"):
            value = getattr(self, name)
            if value is not None:
                setattr(self, name, Path(value))
        if not 0.0 < self.step <= 1.0:
            raise InputError("sweep step must lie in (0, 1]")
        if self.metagene_tau is not None and not 0.0 < self.metagene_tau <= 1.0:
            raise InputError("metagene tau must lie in (0, 1]")
        if self.epsilon is not None and not 0.0 <= self.epsilon <= 1.0:
            raise InputError("epsilon must lie in [0, 1]")
        if self.select not in ("best-f", "knee"):
            raise InputError("select must be 'best-f' or 'knee'")
        if self.prior is not None and self.prior_edges is not None:
            raise InputError("give either a prior module file or a prior edge file, not both")

    def inputs(self) -> dict[str, Path]:
        return {k: v for k, v in (("expr", self.expr), ("prior", self.prior),
                                  ("prior_edges", self.prior_edges), ("gold", self.gold))
                if v is not None}

    def echo(self) -> dict:
        def plain(x):
            if isinstance(x, Path):
                return x.name
            if isinstance(x, (Metric, Discretization)):
                return x.value
            if isinstance(x, dict):
                return {k: plain(v) for k, v in x.items()}
            return x

        out = {}
        for k in ("metric", "supervision", "deconv"):
            v = getattr(self, k)
            out[k] = None if v is None else plain(asdict(v))
        for k in ("expr", "prior", "prior_edges", "gold", "step", "metagene_tau",
                  "epsilon", "select", "samples_as_rows", "seed"):
            out[k] = plain(getattr(self, k))
        return out


class _Stage:
    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and isinstance(exc, (ModclustError, ArithmeticError, ValueError,
                                                OSError)) and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _cluster_and_report(matrix, genes_order, gold: ModuleSet | None, cfg: RunConfig,
                        out: Path) -> dict:
    with _Stage("cluster"):
        tree = single_linkage(matrix)
        io.write_dendrogram(tree, out / "dendrogram.txt")
    with _Stage("sweep"):
        sweep = threshold_sweep(tree, cfg.step)
        io.write_table(("epsilon", "n_modules", "largest_module_size"),
                       [(eps, len(ms), len(ms.largest().genes)) for eps, ms in sweep],
                       out / "sweep.tsv")
    report: dict = {"n_genes": matrix.n, "sweep_points": len(sweep)}
    selected = cfg.epsilon
    if gold is not None:
        with _Stage("evaluate"):
            curve = roc(sweep, gold)
            io.write_roc(curve, out / "roc.tsv")
            area = auc(curve)
            eps_f, p, r, f = best_f(sweep, gold)
            k = curve.points[knee(curve)]
            if selected is None:
                selected = eps_f if cfg.select == "best-f" else _finite(k.threshold, eps_f)
            modules = cut(tree, selected)
            io.write_table(METRICS_HEADER, [(
                area, eps_f, p, r, f, k.threshold, k.fpr, k.tpr,
                float(selected), len(modules), len(modules.largest().genes))],
                out / "metrics.tsv")
            report.update(auc=area, best_epsilon=eps_f, f=f, knee_epsilon=k.threshold)
    if selected is not None:
        with _Stage("cut"):
            modules = cut(tree, selected)
            io.write_modules(modules, out / "modules.tsv", genes_order)
            largest = modules.largest()
            rank = {g: i for i, g in enumerate(genes_order)}
            with open(out / "largest_module.txt", "w", encoding="utf-8", newline="\n") as fh:
                for g in sorted(largest.genes, key=rank.__getitem__):
                    fh.write(g + "\n")
            report.update(selected_epsilon=selected, n_modules=len(modules))
    else:
        log.info("no gold standard and no --epsilon: modules.tsv not written")
    return report


def _finite(x: float, fallback: float) -> float:
    return x if 0.0 <= x <= 1.0 else fallback


def run_pipeline(cfg: RunConfig) -> dict:
    """Run the full pipeline and write all outputs into ``cfg.out_dir``.

    Outputs are staged in a scratch directory and moved into place only when
    every stage succeeded, so a failed run leaves nothing behind.
    """
    for name, path in cfg.inputs().items():
        if not path.exists():
            raise InputError(f"{name} file {path} does not exist")
    cfg.out_dir.parent.mkdir(parents=True, exist_ok=True)
    scratch = Path(tempfile.mkdtemp(prefix=".modclust-", dir=cfg.out_dir.parent))
    try:
        report = _run(cfg, scratch)
        manifest = {
            "tool": "modclust",
            "version": __version__,
            "config": cfg.echo(),
            "inputs": {k: {"name": p.name, "sha256": io.file_digest(p)}
                       for k, p in cfg.inputs().items()},
            "report": report,
        }
        with open(scratch / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")
        cfg.out_dir.mkdir(parents=True, exist_ok=True)
        for item in sorted(scratch.iterdir()):
            target = cfg.out_dir / item.name
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
            shutil.move(str(item), str(target))
        return report
    finally:
        shutil.rmtree(scratch, ignore_errors=True)


def _run(cfg: RunConfig, out: Path) -> dict:
    with _Stage("read"):
        expr = io.read_expression(cfg.expr, cfg.samples_as_rows)
        gold = io.read_modules(cfg.gold) if cfg.gold else None
    if cfg.metagene_tau is not None:
        with _Stage("metagene"):
            expr, mapping = merge_metagenes(expr, cfg.metagene_tau)
            io.write_table(("metagene", "member"), mapping.rows(), out / "metagenes.tsv")
    with _Stage("correlate"):
        d = build_correlation_matrix(expr, cfg.metric)
    genes_order = list(expr.genes)

    priors = None
    if cfg.prior is not None or cfg.prior_edges is not None:
        with _Stage("priors"):
            if cfg.prior is not None:
                priors = io.read_priors(cfg.prior)
            else:
                priors = communities_from_edges(expr.genes, io.read_edges(cfg.prior_edges))
    sup = cfg.supervision or SupervisionConfig()

    def finish(matrix, target: Path) -> dict:
        if cfg.deconv is not None:
            with _Stage("deconvolve"):
                matrix = deconvolve(matrix, cfg.deconv)
        return _cluster_and_report(matrix, genes_order, gold, cfg, target)

    if priors is not None and sup.mode == "local":
        with _Stage("supervise"):
            local = incorporate_local(d, priors, sup)
        reports = {}
        for name, matrix in local:
            sub = out / name
            sub.mkdir(parents=True, exist_ok=True)
            reports[name] = finish(matrix, sub)
        return {"mode": "local", "clusters": reports}
    if priors is not None:
        with _Stage("supervise"):
            d = incorporate_global(d, priors, sup)
    return finish(validate_correlation_matrix(d), out)


# ---------------------------------------------------------------------------
# argparse plumbing
# ---------------------------------------------------------------------------

def _bins(value: str):
    return AUTO if value == AUTO else int(value)


def _add_metric_args(p):
    p.add_argument("--metric", choices=[m.value for m in Metric], default="pcc")
    p.add_argument("--discretization", choices=[d.value for d in Discretization],
                   default=Discretization.EQUAL_FREQUENCY.value)
    p.add_argument("--bins", type=_bins, default=AUTO, help="bin count or 'auto'")


def _add_supervision_args(p):
    p.add_argument("--mode", choices=["global", "local"], default="global")
    p.add_argument("--rho-hat", type=float, default=0.0,
                   help="prior reliability: 0 trusts priors fully, 1 ignores them")


def _add_deconv_args(p):
    p.add_argument("--delta", type=float, default=DeconvConfig.delta)
    p.add_argument("--scaling", choices=["auto", "none"], default="auto")


def _metric_cfg(a) -> MetricConfig:
    return MetricConfig(a.metric, a.discretization, a.bins)


def _emit_line(header, row, out):
    if out:
        io.write_table(header, [row], out)
    else:
        sys.stdout.write("\t".join(header) + "\n")
        sys.stdout.write("\t".join(io.fmt(x) if isinstance(x, float) else str(x)
                                   for x in row) + "\n")


def cmd_run(a):
    cfg = RunConfig(
        expr=a.expr, out_dir=a.out, metric=_metric_cfg(a),
        supervision=SupervisionConfig(a.rho_hat, a.mode),
        prior=a.prior, prior_edges=a.prior_edges,
        deconv=DeconvConfig(a.delta, a.scaling) if a.deconvolve else None,
        gold=a.gold, step=a.step, metagene_tau=a.metagene_tau, epsilon=a.epsilon,
        select=a.select, samples_as_rows=a.samples_as_rows, seed=a.seed)
    report = run_pipeline(cfg)
    log.info("done: %s", json.dumps(report, sort_keys=True, default=str))


def cmd_correlate(a):
    expr = io.read_expression(a.expr, a.samples_as_rows)
    io.write_correlation(build_correlation_matrix(expr, _metric_cfg(a)), a.out)


def cmd_supervise(a):
    d = validate_correlation_matrix(io.read_correlation(a.corr))
    if a.prior:
        priors = io.read_priors(a.prior)
    else:
        priors = communities_from_edges(d.genes, io.read_edges(a.prior_edges))
    cfg = SupervisionConfig(a.rho_hat, a.mode)
    if cfg.mode == "global":
        io.write_correlation(incorporate_global(d, priors, cfg), a.out)
    else:
        for name, m in incorporate_local(d, priors, cfg):
            io.write_correlation(m, Path(a.out) / f"{name}.tsv")


def cmd_deconvolve(a):
    d = validate_correlation_matrix(io.read_correlation(a.corr))
    io.write_correlation(deconvolve(d, DeconvConfig(a.delta, a.scaling)), a.out)


def cmd_cluster(a):
    d = validate_correlation_matrix(io.read_correlation(a.corr))
    io.write_dendrogram(single_linkage(d), a.out)


def cmd_cut(a):
    tree = io.read_dendrogram(a.dendrogram)
    io.write_modules(cut(tree, a.epsilon), a.out, tree.leaves)


def cmd_sweep(a):
    tree = io.read_dendrogram(a.dendrogram)
    sweep = threshold_sweep(tree, a.step)
    out = Path(a.out)
    io.write_table(("epsilon", "n_modules", "largest_module_size"),
                   [(eps, len(ms), len(ms.largest().genes)) for eps, ms in sweep],
                   out / "sweep.tsv")
    for k, (eps, ms) in enumerate(sweep):
        io.write_modules(ms, out / f"cut_{k:04d}.tsv", tree.leaves)


def cmd_evaluate(a):
    gold = io.read_modules(a.gold)
    if a.pred:
        pred = io.read_modules(a.pred)
        c = pair_confusion(pred, gold)
        p, r, f = precision_recall_f(c)
        _emit_line(("tp", "fp", "tn", "fn", "precision", "recall", "f"),
                   (c.tp, c.fp, c.tn, c.fn, p, r, f), a.out)
        return
    tree = io.read_dendrogram(a.dendrogram)
    sweep = threshold_sweep(tree, a.step)
    curve = roc(sweep, gold)
    out = Path(a.out or ".")
    io.write_roc(curve, out / "roc.tsv")
    eps_f, p, r, f = best_f(sweep, gold)
    k = curve.points[knee(curve)]
    modules = cut(tree, eps_f)
    io.write_table(METRICS_HEADER, [(auc(curve), eps_f, p, r, f, k.threshold, k.fpr, k.tpr,
                                     eps_f, len(modules), len(modules.largest().genes))],
                   out / "metrics.tsv")


def cmd_metagene(a):
    expr = io.read_expression(a.expr, a.samples_as_rows)
    merged, mapping = merge_metagenes(expr, a.tau)
    io.write_expression(merged, a.out)
    io.write_table(("metagene", "member"), mapping.rows(), a.map)


def cmd_synth(a):
    cfg = BenchConfig(n_genes=a.n_genes, n_modules=a.n_modules, n_samples=a.samples,
                      loading=(a.loading_min, a.loading_max), sigma=a.sigma,
                      latent_corr=a.latent_corr, p_corrupt=a.p_corrupt, seed=a.seed)
    b = generate_benchmark(cfg)
    out = Path(a.out)
    io.write_expression(b.expr, out / "expression.tsv")
    io.write_modules(b.truth, out / "truth.gmt", b.expr.genes)
    io.write_edges(b.edges, out / "edges.tsv")
    io.write_priors(b.priors, out / "priors.gmt")


def cmd_derive_gold(a):
    edges = io.read_edges(a.edges)
    gold = minimal_modules(edges) if a.kind == "minimal" else strict_modules(edges)
    if a.out:
        io.write_modules(gold, a.out)
    else:
        for m in gold:
            sys.stdout.write(m.id + "\t" + "\t".join(sorted(m.genes)) + "\n")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modclust",
        description="Semi-supervised single-linkage module detection on "
                    "deconvolved correlation matrices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="full pipeline")
    p.add_argument("--expr", required=True)
    p.add_argument("--samples-as-rows", action="store_true")
    _add_metric_args(p)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--prior", help="prior clusters (module file)")
    g.add_argument("--prior-edges", help="prior interactions (edge file)")
    _add_supervision_args(p)
    p.add_argument("--deconvolve", action="store_true")
    _add_deconv_args(p)
    p.add_argument("--gold")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--metagene-tau", type=float, default=None,
                   help="merge genes with PCC above this before clustering (e.g. 0.95)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="similarity threshold for modules.tsv (default: chosen from gold)")
    p.add_argument("--select", choices=["best-f", "knee"], default="best-f")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="modclust_out")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("correlate", help="expression -> correlation matrix")
    p.add_argument("--expr", required=True)
    p.add_argument("--samples-as-rows", action="store_true")
    _add_metric_args(p)
    p.add_argument("--out", default="corr.tsv")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("supervise", help="magnify prior-cluster blocks")
    p.add_argument("--corr", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--prior")
    g.add_argument("--prior-edges")
    _add_supervision_args(p)
    p.add_argument("--out", default="corr_supervised.tsv",
                   help="output file (global) or directory (local)")
    p.set_defaults(func=cmd_supervise)

    p = sub.add_parser("deconvolve", help="direct-correlation matrix")
    p.add_argument("--corr", required=True)
    _add_deconv_args(p)
    p.add_argument("--out", default="corr_direct.tsv")
    p.set_defaults(func=cmd_deconvolve)

    p = sub.add_parser("cluster", help="single-linkage dendrogram")
    p.add_argument("--corr", required=True)
    p.add_argument("--out", default="dendrogram.txt")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("cut", help="cut a dendrogram at a similarity threshold")
    p.add_argument("--dendrogram", required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--out", default="modules.tsv")
    p.set_defaults(func=cmd_cut)

    p = sub.add_parser("sweep", help="cuts over a threshold range")
    p.add_argument("--dendrogram", required=True)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--out", default="sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("evaluate", help="score modules or a dendrogram against a gold standard")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--pred")
    g.add_argument("--dendrogram")
    p.add_argument("--gold", required=True)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("metagene", help="merge near-identical profiles")
    p.add_argument("--expr", required=True)
    p.add_argument("--samples-as-rows", action="store_true")
    p.add_argument("--tau", type=float, default=0.95)
    p.add_argument("--out", default="metagene_expression.tsv")
    p.add_argument("--map", default="metagenes.tsv")
    p.set_defaults(func=cmd_metagene)

    p = sub.add_parser("synth", help="write a synthetic benchmark")
    p.add_argument("--n-genes", type=int, default=100)
    p.add_argument("--n-modules", type=int, default=5)
    p.add_argument("--samples", type=int, default=40)
    p.add_argument("--loading-min", type=float, default=0.5)
    p.add_argument("--loading-max", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--latent-corr", type=float, default=0.0)
    p.add_argument("--p-corrupt", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="synth")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("derive-gold", help="gold-standard modules from a regulatory network")
    p.add_argument("--edges", required=True)
    p.add_argument("--kind", choices=["minimal", "strict"], default="minimal")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_derive_gold)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ModclustError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except FileNotFoundError as exc:
        log.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
