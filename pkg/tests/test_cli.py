import json

import pytest

from modclust.cli import RunConfig, StageError, main, run_pipeline
from modclust.core import InputError
from modclust.deconv import DeconvConfig
from modclust.formats import read_dendrogram, read_modules, read_table


@pytest.fixture(scope="module")
def bench(tmp_path_factory):
    d = tmp_path_factory.mktemp("bench")
    assert main(["synth", "--n-genes", "24", "--n-modules", "3", "--samples", "15",
                 "--sigma", "0.8", "--latent-corr", "0.3", "--p-corrupt", "0.2",
                 "--seed", "4", "--out", str(d)]) == 0
    assert main(["derive-gold", "--edges", str(d / "edges.tsv"), "--kind", "strict",
                 "--out", str(d / "gold.gmt")]) == 0
    return d


def read_all(folder):
    return {p.relative_to(folder).as_posix(): p.read_bytes()
            for p in sorted(folder.rglob("*")) if p.is_file()}


def test_synth_outputs(bench):
    names = {p.name for p in bench.iterdir()}
    assert {"expression.tsv", "truth.gmt", "edges.tsv", "priors.gmt", "gold.gmt"} <= names
    assert read_modules(bench / "gold.gmt") == read_modules(bench / "truth.gmt")


def test_full_run(bench, tmp_path):
    out = tmp_path / "run"
    code = main(["run", "--expr", str(bench / "expression.tsv"), "--metric", "dcc",
                 "--prior", str(bench / "priors.gmt"), "--rho-hat", "0.25", "--deconvolve",
                 "--gold", str(bench / "gold.gmt"), "--out", str(out)])
    assert code == 0
    files = {p.name for p in out.iterdir()}
    assert {"roc.tsv", "metrics.tsv", "modules.tsv", "dendrogram.txt", "sweep.tsv",
            "largest_module.txt", "manifest.json"} <= files
    metrics = read_table(out / "metrics.tsv")[0]
    assert 0.0 <= float(metrics["auc"]) <= 1.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["deconv"]["delta"] == DeconvConfig.delta
    assert len(manifest["inputs"]["expr"]["sha256"]) == 64
    # modules.tsv re-ingests and matches the selected threshold
    mods = read_modules(out / "modules.tsv", overlapping=False)
    assert len(mods) == int(metrics["n_modules"])


def test_run_twice_is_byte_identical(bench, tmp_path):
    pe = tmp_path / "prior_edges.tsv"
    pe.write_text("G01\tG02\nG02\tG05\nG10\tG12\n")
    args = ["run", "--expr", str(bench / "expression.tsv"), "--metric", "mi2",
            "--prior-edges", str(pe), "--deconvolve",
            "--gold", str(bench / "gold.gmt"), "--select", "knee"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    assert main(args[:5] + ["--prior-edges", str(bench / "edges.tsv"),
                            "--out", str(tmp_path / "c")]) == 2
    assert read_all(tmp_path / "a") == read_all(tmp_path / "b")


def test_degenerate_pipeline_equals_plain_clustering(bench, tmp_path):
    assert main(["correlate", "--expr", str(bench / "expression.tsv"),
                 "--out", str(tmp_path / "c.tsv")]) == 0
    assert main(["cluster", "--corr", str(tmp_path / "c.tsv"),
                 "--out", str(tmp_path / "plain.txt")]) == 0
    assert main(["run", "--expr", str(bench / "expression.tsv"),
                 "--prior", str(bench / "priors.gmt"), "--rho-hat", "1",
                 "--out", str(tmp_path / "run")]) == 0
    assert (tmp_path / "plain.txt").read_bytes() == \
        (tmp_path / "run" / "dendrogram.txt").read_bytes()


def test_stepwise_subcommands(bench, tmp_path, capsys):
    c, s, dd, t = (tmp_path / x for x in ("c.tsv", "s.tsv", "d.tsv", "tree.txt"))
    assert main(["correlate", "--expr", str(bench / "expression.tsv"), "--metric", "mi3",
                 "--out", str(c)]) == 0
    assert main(["supervise", "--corr", str(c), "--prior", str(bench / "priors.gmt"),
                 "--out", str(s)]) == 0
    assert main(["deconvolve", "--corr", str(s), "--out", str(dd)]) == 0
    assert main(["cluster", "--corr", str(dd), "--out", str(t)]) == 0
    assert main(["cut", "--dendrogram", str(t), "--epsilon", "0.5",
                 "--out", str(tmp_path / "m.tsv")]) == 0
    assert main(["sweep", "--dendrogram", str(t), "--out", str(tmp_path / "sw")]) == 0
    n_cuts = len(read_table(tmp_path / "sw" / "sweep.tsv"))
    assert len(list((tmp_path / "sw").glob("cut_*.tsv"))) == n_cuts
    capsys.readouterr()
    assert main(["evaluate", "--pred", str(tmp_path / "m.tsv"),
                 "--gold", str(bench / "gold.gmt")]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split("\t") == ["tp", "fp", "tn", "fn", "precision", "recall", "f"]
    assert main(["evaluate", "--dendrogram", str(t), "--gold", str(bench / "gold.gmt"),
                 "--out", str(tmp_path / "ev")]) == 0
    assert (tmp_path / "ev" / "roc.tsv").exists()
    assert len(read_dendrogram(t).leaves) == 24


def test_local_mode_layout(bench, tmp_path):
    out = tmp_path / "local"
    assert main(["run", "--expr", str(bench / "expression.tsv"),
                 "--prior", str(bench / "priors.gmt"), "--mode", "local",
                 "--gold", str(bench / "gold.gmt"), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert names == ["P1", "P2", "P3"]
    assert (out / "P2" / "roc.tsv").exists()


def test_metagene_subcommand(bench, tmp_path):
    assert main(["metagene", "--expr", str(bench / "expression.tsv"), "--tau", "0.99",
                 "--out", str(tmp_path / "e.tsv"), "--map", str(tmp_path / "map.tsv")]) == 0
    assert len(read_table(tmp_path / "map.tsv")) == 24


def test_exit_codes(bench, tmp_path):
    missing = ["run", "--expr", str(tmp_path / "nope.tsv"), "--out", str(tmp_path / "x")]
    assert main(missing) == 2
    bad = tmp_path / "bad.tsv"
    bad.write_text("gene\ts1\ts2\ts3\na\t1\t1\t1\nb\t1\t2\t3\n")
    assert main(["run", "--expr", str(bad), "--out", str(tmp_path / "x")]) == 2
    zero = tmp_path / "zero.tsv"
    zero.write_text("#meta\tmetric=pcc\tsupervised=0\tdeconvolved=0\n"
                    "gene\ta\tb\tc\na\t1.0\t0.0\t0.5\nb\t0.0\t1.0\t0.5\nc\t0.5\t0.5\t1.0\n")
    prior = tmp_path / "p.gmt"
    prior.write_text("p\ta\tb\n")
    assert main(["supervise", "--corr", str(zero), "--prior", str(prior),
                 "--out", str(tmp_path / "s.tsv")]) == 3
    one = tmp_path / "one.gmt"
    one.write_text("all\t" + "\t".join(f"G{i:02d}" for i in range(1, 25)) + "\n")
    assert main(["run", "--expr", str(bench / "expression.tsv"), "--gold", str(one),
                 "--out", str(tmp_path / "x")]) == 4
    assert not (tmp_path / "x").exists()
    assert not list(tmp_path.glob(".modclust-*"))


def test_stage_error_carries_stage(bench, tmp_path):
    one = tmp_path / "one.gmt"
    one.write_text("all\tG01\tG02\n")
    cfg = RunConfig(expr=bench / "expression.tsv", out_dir=tmp_path / "y", gold=one)
    with pytest.raises(StageError) as err:
        run_pipeline(cfg)
    assert err.value.stage == "evaluate" and err.value.exit_code == 4


def test_run_config_validation(tmp_path):
    with pytest.raises(InputError):
        RunConfig(expr=tmp_path / "e", out_dir=tmp_path, step=0.0)
    with pytest.raises(InputError):
        RunConfig(expr=tmp_path / "e", out_dir=tmp_path, prior="a", prior_edges="b")
