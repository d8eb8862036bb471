import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modclust.core import (
    ConfusionCounts,
    DegenerateGold,
    EmptyUniverse,
    ModuleSet,
    TooFewPoints,
)
from modclust.evalkit import (
    auc,
    best_f,
    knee,
    minimal_modules,
    pair_confusion,
    precision_recall_f,
    roc,
    strict_modules,
)
from modclust.hac import cut, single_linkage, threshold_sweep
from conftest import corr
from oracles import angle_deg, pair_counts, strict_groups


def ms(*groups, overlapping=False):
    return ModuleSet.from_lists([list(g) for g in groups], overlapping=overlapping)


def counts_tuple(c):
    return c.tp, c.fp, c.tn, c.fn


class TestPairConfusion:
    def test_hand_example(self):
        c = pair_confusion(ms("ab", "c"), ms("abc"))
        assert counts_tuple(c) == (1, 0, 0, 2)

    def test_perfect_and_singletons(self):
        gold = ms("ab", "cd", "e")
        c = pair_confusion(ms("ab", "cd", "e"), gold)
        assert c.fp == c.fn == 0
        c = pair_confusion(ms("a", "b", "c", "d", "e"), gold)
        assert c.tp == c.fp == 0

    def test_universe_is_intersection(self):
        # x and y are unknown to gold and ignored
        c = pair_confusion(ms("abx", "cy"), ms("ab", "c"))
        assert counts_tuple(c) == (1, 0, 2, 0)

    def test_empty_universe(self):
        with pytest.raises(EmptyUniverse):
            pair_confusion(ms("ab"), ms("cd"))


class TestPRF:
    def test_hand(self):
        p, r, f = precision_recall_f(ConfusionCounts(1, 0, 0, 2))
        assert (p, r) == (1.0, pytest.approx(1 / 3, abs=1e-15))
        assert f == pytest.approx(0.5, abs=1e-15)

    def test_degenerate(self):
        assert precision_recall_f(ConfusionCounts(0, 3, 2, 1)) == (0.0, 0.0, 0.0)
        assert precision_recall_f(ConfusionCounts(4, 0, 2, 0)) == (1.0, 1.0, 1.0)


class TestAuc:
    def test_fixtures(self):
        assert auc([(0, 0), (0, 1), (1, 1)]) == 1.0
        assert auc([(0, 0), (1, 1)]) == 0.5
        assert auc([(0, 0), (0.5, 0.5), (0.5, 1), (1, 1)]) == pytest.approx(0.625, abs=1e-12)

    def test_order_does_not_matter(self):
        assert auc([(1, 1), (0.5, 1), (0, 0), (0.5, 0.5)]) == pytest.approx(0.625, abs=1e-12)

    def test_too_few(self):
        with pytest.raises(TooFewPoints):
            auc([(0, 0)])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=8))
    def test_mirrored_curve(self, raw):
        # monotone staircase and its reflection across the diagonal
        f = np.sort([p[0] for p in raw])
        t = np.sort([p[1] for p in raw])
        pts = [(0.0, 0.0), *zip(f, t), (1.0, 1.0)]
        a = auc(pts)
        assert 0.0 <= a <= 1.0
        assert auc([(y, x) for x, y in pts]) == pytest.approx(1.0 - a, abs=1e-12)


class TestRoc:
    def test_perfect_cut_reaches_corner(self):
        s = np.array([[1, .9, .1, .1], [.9, 1, .1, .1], [.1, .1, 1, .8], [.1, .1, .8, 1]])
        t = single_linkage(corr(s))
        gold = ms("ab", "cd")
        curve = roc(threshold_sweep(t), gold)
        assert (0.0, 1.0) in list(zip(curve.fpr, curve.tpr))
        assert auc(curve) == 1.0
        eps, p, r, f = best_f(threshold_sweep(t), gold)
        assert f == 1.0 and partition_equal(cut(t, eps), gold)

    def test_single_cut_has_endpoints(self):
        curve = roc([(0.5, ms("ab", "c", "d"))], ms("ab", "cd"))
        assert len(curve.points) == 3
        assert curve.points[0].threshold == math.inf
        assert curve.points[-1].threshold == 0.0
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)

    def test_degenerate_gold(self):
        with pytest.raises(DegenerateGold):
            roc([(0.5, ms("ab", "c"))], ms("abc"))

    def test_random_instance_matches_enumeration(self):
        rng = np.random.default_rng(4)
        genes = [f"g{i}" for i in range(12)]
        s = rng.uniform(0, 1, (12, 12))
        s = np.triu(s, 1) + np.triu(s, 1).T + np.eye(12)
        sweep = threshold_sweep(single_linkage(corr(s, genes)))
        gold_groups = [set(rng.choice(genes, 4, replace=False)) for _ in range(3)]
        gold = ModuleSet.from_lists([sorted(g) for g in gold_groups], overlapping=True)
        curve = roc(sweep, gold)
        universe = sorted(gold.genes)
        by_eps = {p.threshold: p for p in curve.points}
        for eps, pred in sweep:
            tp, fp, tn, fn = pair_counts([set(m.genes) for m in pred], gold_groups, universe)
            assert by_eps[eps].fpr == fp / (fp + tn)
            assert by_eps[eps].tpr == tp / (tp + fn)


def partition_equal(a, b):
    return {m.genes for m in a} == {m.genes for m in b}


class TestBestF:
    def test_tie_goes_to_larger_threshold(self):
        gold = ms("ab", "cd", "ef")
        f02 = ms("abce", "df")
        f05a = ms("ab", "c", "d", "e", "f")
        f05b = ms("a", "b", "cd", "e", "f")
        sweep = [(0.1, f02), (0.4, f05a), (0.6, f05b)]
        fs = [precision_recall_f(pair_confusion(p, gold))[2] for _, p in sweep]
        assert fs == pytest.approx([0.2, 0.5, 0.5], abs=1e-15)
        assert best_f(sweep, gold)[0] == 0.6

    def test_all_singletons(self):
        gold = ms("ab", "cd")
        assert best_f([(0.9, ms("a", "b", "c", "d"))], gold)[3] == 0.0


class TestKnee:
    def test_corner(self):
        assert knee([(0, 0), (0.1, 0.9), (1, 1)]) == 1

    def test_l_curve(self):
        pts = [(0, 0), (0, 0.5), (0, 1), (0.5, 1), (1, 1)]
        assert knee(pts) == 2

    def test_collinear_tie_break(self):
        pts = [(0, 0), (0.25, 0.25), (0.5, 0.5), (0.75, 0.75), (1, 1)]
        assert knee(pts) == 1
        assert knee(list(reversed(pts))) == 3

    def test_index_refers_to_input(self):
        pts = [(1, 1), (0.1, 0.9), (0, 0), (0.1, 0.9)]
        assert knee(pts) == 1

    def test_staircase_matches_angle_oracle(self):
        pts = [(0, 0), (0.2, 0.6), (0.4, 0.7), (0.7, 0.9), (1, 1)]
        angles = [angle_deg(pts[i - 1], pts[i], pts[i + 1]) for i in range(1, 4)]
        assert knee(pts) == 1 + int(np.argmin(angles))

    def test_scale_invariance(self):
        pts = [(0, 0), (0.02, 0.6), (0.04, 0.7), (0.1, 1.0)]
        scaled = [(10 * f, t) for f, t in pts]
        assert knee(pts) == knee(scaled)

    def test_too_few(self):
        with pytest.raises(TooFewPoints):
            knee([(0, 0), (1, 1), (1, 1)])


class TestGoldDerivation:
    def test_minimal(self):
        m = minimal_modules([("R1", "a"), ("R1", "b"), ("R2", "b"), ("R2", "c"), ("R3", "d")])
        assert [set(x.genes) for x in m] == [{"a", "b"}, {"b", "c"}]
        assert m.overlapping
        dup = minimal_modules([("R1", "a"), ("R1", "b"), ("R2", "a"), ("R2", "b")])
        assert len(dup) == 1

    def test_strict(self):
        assert len(strict_modules([("R1", "a"), ("R1", "b"), ("R2", "b"), ("R2", "c")])) == 0
        m = strict_modules([("R1", "a"), ("R1", "b")])
        assert [set(x.genes) for x in m] == [{"a", "b"}]

    def test_random_instance_matches_oracle(self):
        rng = np.random.default_rng(9)
        targets = [f"t{i}" for i in range(20)]
        edges = [(f"R{r}", t) for t in targets for r in range(4) if rng.random() < 0.4]
        strict = strict_modules(edges)
        assert {frozenset(m.genes) for m in strict} == strict_groups(edges)
        minimal = minimal_modules(edges)
        for m in strict:
            assert any(m.genes <= x.genes for x in minimal)


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), g=st.integers(2, 15))
def test_confusion_matches_enumeration(seed, g):
    rng = np.random.default_rng(seed)
    genes = [f"g{i}" for i in range(g)]
    labels = rng.integers(0, max(1, g // 3), g)
    pred_groups = [{x for x, lab in zip(genes, labels) if lab == k} for k in set(labels)]
    gold_groups = [set(rng.choice(genes, rng.integers(1, g + 1), replace=False))
                   for _ in range(rng.integers(1, 4))]
    pred = ModuleSet.from_lists([sorted(x) for x in pred_groups])
    gold = ModuleSet.from_lists([sorted(x) for x in gold_groups], overlapping=True)
    universe = sorted(pred.genes & gold.genes)
    if len(universe) < 2:
        with pytest.raises(EmptyUniverse):
            pair_confusion(pred, gold)
        return
    c = pair_confusion(pred, gold)
    assert counts_tuple(c) == pair_counts(pred_groups, gold_groups, universe)
    assert c.total == len(universe) * (len(universe) - 1) // 2
