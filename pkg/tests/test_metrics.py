import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiercl.corpus import Instance
from hiercl.metrics import (
    consistency,
    evaluate,
    export_representations,
    format_report,
    labelwise_f1,
    level_metrics,
    load_representations,
    write_representations,
)

from .oracles import f1_counts

# Ten instances over a three-level sense naming; instance 3 carries two golds.
CBH = ("Comp", "Contrast", "but")
CCH = ("Comp", "Contrast", "however")
CCO = ("Comp", "Concession", "although")
ECA = ("Exp", "Conj", "and")
ECB = ("Exp", "Conj", "also")
EIF = ("Exp", "Inst", "for")

PREDS = [CBH, CCH, ECA, ECA, CCO, EIF, CBH, ECB, CCH, EIF]
GOLDS = [
    [CBH],
    [CBH],
    [ECA],
    [CBH, ECA],   # multi-gold: prediction matches the second annotation
    [CCH],
    [ECA],
    [EIF],
    [ECB],
    [CCH],
    [EIF],
]


def counting_resolve(level):
    """Gold label per instance: the predicted label if any annotation has it, else the first."""
    out = []
    for p, gs in zip(PREDS, GOLDS):
        labels = [g[level] for g in gs]
        out.append(p[level] if p[level] in labels else labels[0])
    return out


def oracle_level(level):
    gold = counting_resolve(level)
    pred = [p[level] for p in PREDS]
    classes = sorted(set(gold))
    macro = sum(f1_counts(pred, gold, c) for c in classes) / len(classes)
    acc = sum(p == g for p, g in zip(pred, gold)) / len(pred)
    return macro, acc


class TestFixture:
    @pytest.mark.parametrize("level", [1, 2, 3])
    def test_level_metrics_match_counting_oracle(self, level):
        f1, acc = level_metrics(PREDS, GOLDS, level)
        ef1, eacc = oracle_level(level - 1)
        assert f1 == pytest.approx(ef1, abs=1e-12)
        assert acc == pytest.approx(eacc, abs=1e-12)

    def test_hand_values(self):
        # level 1: only instance 6 (gold Exp, pred Comp) is wrong
        assert level_metrics(PREDS, GOLDS, 1)[1] == pytest.approx(0.9)
        # level 3: instances 1, 4, 5, 6 are wrong
        assert level_metrics(PREDS, GOLDS, 3)[1] == pytest.approx(0.6)

    def test_multi_gold_counts_as_correct(self):
        f1, acc = level_metrics(PREDS[3:4], GOLDS[3:4], 3)
        assert (f1, acc) == (1.0, 1.0)

    def test_labelwise(self):
        got = labelwise_f1(PREDS, GOLDS, 3, classes=["but", "however", "although", "and", "also", "for", "since"])
        gold = counting_resolve(2)
        pred = [p[2] for p in PREDS]
        for c, v in got.items():
            assert v == pytest.approx(f1_counts(pred, gold, c), abs=1e-12)
        assert got["since"] == 0.0

    def test_consistency(self):
        ok = [[p[m] == g for p, g in zip(PREDS, counting_resolve(m))] for m in range(3)]
        ts = sum(a and b for a, b in zip(ok[0], ok[1])) / 10
        tsc = sum(a and b and c for a, b, c in zip(*ok)) / 10
        assert consistency(PREDS, GOLDS) == (pytest.approx(ts), pytest.approx(tsc))
        assert ts == pytest.approx(0.7) and tsc == pytest.approx(0.6)

    def test_report(self):
        rep = evaluate(PREDS, GOLDS, labelwise=True)
        assert rep["n"] == 10
        assert [e["level"] for e in rep["levels"]] == [1, 2, 3]
        assert rep["mean_macro_f1"] == pytest.approx(np.mean([oracle_level(m)[0] for m in range(3)]))
        text = format_report(rep)
        assert "top_sec = 0.7000" in text and "top_sec_conn = 0.6000" in text
        assert "level3.f1[but]" in text


class TestSpecExamples:
    def test_perfect(self):
        seqs = [CBH, ECA, EIF]
        f1, acc = level_metrics(seqs, [[s] for s in seqs], 2)
        assert f1 == acc == 1.0
        assert consistency(seqs, [[s] for s in seqs]) == (1.0, 1.0)

    def test_match_any_every_level(self):
        golds = [[CBH, ECA]]
        for m in (1, 2, 3):
            assert level_metrics([ECA], golds, m) == (1.0, 1.0)

    def test_three_instances_one_error(self):
        preds = [("A",), ("A",), ("B",)]
        golds = [[("A",)], [("B",)], [("B",)]]
        f1, acc = level_metrics(preds, golds, 1)
        assert acc == pytest.approx(2 / 3)
        # A: P=1/2 R=1 F=2/3 ; B: P=1 R=1/2 F=2/3
        assert f1 == pytest.approx(2 / 3)

    def test_top_sec_two_of_three(self):
        preds = [("a", "x"), ("b", "y"), ("a", "z")]
        golds = [[("a", "x")], [("b", "y")], [("a", "x")]]
        assert consistency(preds, golds) == (pytest.approx(2 / 3), None)

    def test_labelwise_single_class(self):
        assert labelwise_f1([("a",)], [[("a",)]], 1, classes=["a", "b"]) == {"a": 1.0, "b": 0.0}

    def test_errors(self):
        with pytest.raises(ValueError):
            level_metrics([CBH], [], 1)
        with pytest.raises(ValueError):
            consistency([("a",)], [[("a",)]])
        with pytest.raises(ValueError):
            level_metrics([CBH], [[CBH]], 1, binding="loose")

    def test_strict_binding_differs_from_any(self):
        # pred agrees with gold A at level 1 and gold B at level 2
        preds = [("x", "q")]
        golds = [[("x", "p"), ("y", "q")]]
        assert consistency(preds, golds, binding="any")[0] == 1.0
        assert consistency(preds, golds, binding="strict")[0] == 0.0

    def test_balanced_symmetric_confusion(self):
        # two classes, each with one swap: macro-F1 equals accuracy
        preds = [("a",)] * 3 + [("b",)] + [("b",)] * 3 + [("a",)]
        golds = [[("a",)]] * 4 + [[("b",)]] * 4
        f1, acc = level_metrics(preds, golds, 1)
        assert f1 == pytest.approx(acc)


seq3 = st.tuples(st.sampled_from("ab"), st.sampled_from("xyz"), st.sampled_from("pqrs"))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(seq3, st.lists(seq3, min_size=1, max_size=2)), min_size=1, max_size=15),
       st.randoms(use_true_random=False))
def test_bounds_chain_and_permutation(rows, rnd):
    preds = [r[0] for r in rows]
    golds = [r[1] for r in rows]
    rep = evaluate(preds, golds)
    for e in rep["levels"]:
        assert 0.0 <= e["macro_f1"] <= 1.0 and 0.0 <= e["accuracy"] <= 1.0
    assert rep["top_sec_conn"] <= rep["top_sec"] <= rep["levels"][0]["accuracy"] + 1e-12
    order = list(range(len(rows)))
    rnd.shuffle(order)
    rep2 = evaluate([preds[i] for i in order], [golds[i] for i in order])
    for a, b in zip(rep["levels"], rep2["levels"]):
        assert a["macro_f1"] == pytest.approx(b["macro_f1"], abs=1e-12)
        assert a["accuracy"] == pytest.approx(b["accuracy"], abs=1e-12)
    assert rep["top_sec"] == pytest.approx(rep2["top_sec"])


class TestRepresentations:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        reps = rng.normal(size=(4, 5))
        gold = [[list(CBH)], [list(ECA), list(CBH)], [list(EIF)], [list(CCH)]]
        path = tmp_path / "r.jsonl"
        write_representations(reps, gold, path)
        back, back_gold = load_representations(path)
        assert np.array_equal(back, reps)
        assert back_gold == gold

    def test_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            write_representations(np.zeros((2, 3)), [[["a"]]], tmp_path / "r.jsonl")

    def test_export_from_model(self, tmp_path):
        import torch

        from hiercl.config import TrainConfig
        from hiercl.hierarchy import SenseHierarchy
        from hiercl.model import build_model

        h = SenseHierarchy.tree((2, 4))
        model = build_model(TrainConfig(d_h=8, n_heads=2, d_r=4), h, 20)
        inst = [Instance((5, 6), (7,), (h.paths()[i % 4],)) for i in range(5)]
        path = tmp_path / "r.jsonl"
        assert export_representations(model, inst, path) == 5
        reps, golds = load_representations(path)
        assert reps.shape == (5, 8)
        assert golds[1] == [list(h.names(h.paths()[1]))]
        assert torch.is_tensor(model.encode(inst[:1]))
