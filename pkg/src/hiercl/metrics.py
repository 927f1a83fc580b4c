"""Per-level macro-F1 / accuracy with match-any gold handling, consistency,
and representation export.

``preds`` is a sequence of label sequences (one label per level) and
``golds`` a parallel sequence of *sets* of gold label sequences.  Levels
are 1-based.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Hashable, Sequence

import numpy as np
from sklearn.metrics import f1_score

Label = Hashable
LabelSeq = Sequence[Label]


def _check_aligned(preds, golds):
    if len(preds) != len(golds):
        raise ValueError(f"{len(preds)} predictions but {len(golds)} gold entries")
    if any(len(g) == 0 for g in golds):
        raise ValueError("every instance needs at least one gold sequence")


def _bound_gold(pred: LabelSeq, gold_set: Sequence[LabelSeq]) -> LabelSeq:
    """Gold sequence agreeing with ``pred`` at the most levels (first on ties)."""
    return max(gold_set, key=lambda g: sum(a == b for a, b in zip(pred, g)))


def effective_gold(preds, golds, level: int, binding: str = "any") -> list:
    """Gold label per instance at ``level`` after resolving multiple annotations.

    ``binding="any"`` credits a prediction that matches that level of any gold
    sequence; otherwise the first gold sequence is used.  ``binding="strict"``
    first picks one gold sequence per instance and judges every level
    against it.
    """
    _check_aligned(preds, golds)
    m = level - 1
    out = []
    for pred, gold_set in zip(preds, golds):
        if binding == "strict":
            out.append(_bound_gold(pred, gold_set)[m])
        elif binding == "any":
            hits = [g[m] for g in gold_set if g[m] == pred[m]]
            out.append(hits[0] if hits else gold_set[0][m])
        else:
            raise ValueError(f"unknown binding {binding!r}")
    return out


def correct_at(preds, golds, level: int, binding: str = "any") -> np.ndarray:
    gold = effective_gold(preds, golds, level, binding)
    return np.array([p[level - 1] == g for p, g in zip(preds, gold)], dtype=bool)


def level_metrics(preds, golds, level: int, binding: str = "any") -> tuple[float, float]:
    """(macro-F1, accuracy) at one level.

    Macro-F1 averages over classes that occur in the (resolved) gold labels.
    """
    gold = effective_gold(preds, golds, level, binding)
    pred = [p[level - 1] for p in preds]
    if not pred:
        return 0.0, 0.0
    classes = sorted(set(gold), key=repr)
    macro = f1_score(_codes(gold, classes), _codes(pred, classes), labels=list(range(len(classes))),
                     average="macro", zero_division=0)
    acc = float(np.mean([p == g for p, g in zip(pred, gold)]))
    return float(macro), acc


def _codes(labels, classes):
    # sklearn rejects mixed label types; map onto ints, unknown -> -1
    index = {c: i for i, c in enumerate(classes)}
    return [index.get(x, -1) for x in labels]


def labelwise_f1(preds, golds, level: int, classes: Sequence[Label] | None = None,
                 binding: str = "any") -> dict:
    """One-vs-rest F1 for every class; classes never gold nor predicted get 0."""
    gold = effective_gold(preds, golds, level, binding)
    pred = [p[level - 1] for p in preds]
    if classes is None:
        classes = sorted(set(gold) | set(pred), key=repr)
    out = {}
    for c in classes:
        tp = sum(p == c and g == c for p, g in zip(pred, gold))
        fp = sum(p == c and g != c for p, g in zip(pred, gold))
        fn = sum(p != c and g == c for p, g in zip(pred, gold))
        out[c] = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return out


def consistency(preds, golds, binding: str = "any") -> tuple[float, float | None]:
    """Fraction correct at levels 1-2 jointly, and at levels 1-3 jointly.

    The second value is None for two-level hierarchies.
    """
    _check_aligned(preds, golds)
    if not preds:
        return 0.0, None
    M = len(preds[0])
    if M < 2:
        raise ValueError("consistency needs at least two levels")
    ok = [correct_at(preds, golds, m, binding) for m in range(1, min(M, 3) + 1)]
    top_sec = float(np.mean(ok[0] & ok[1]))
    top_sec_conn = float(np.mean(ok[0] & ok[1] & ok[2])) if M >= 3 else None
    return top_sec, top_sec_conn


def evaluate(preds, golds, hierarchy=None, labelwise: bool = False, binding: str = "any") -> dict:
    """Metric report over all levels.  Labels may be sense ids or names."""
    _check_aligned(preds, golds)
    M = len(preds[0]) if preds else (hierarchy.n_levels if hierarchy else 0)
    report: dict = {"n": len(preds), "levels": []}
    for m in range(1, M + 1):
        f1, acc = level_metrics(preds, golds, m, binding)
        entry = {"level": m, "macro_f1": f1, "accuracy": acc}
        if labelwise:
            classes = None
            if hierarchy is not None:
                offset = hierarchy.level_offsets[m - 1]
                classes = list(range(offset, offset + hierarchy.level_sizes[m - 1]))
            scores = labelwise_f1(preds, golds, m, classes, binding)
            entry["labelwise_f1"] = {
                (hierarchy.name(c) if hierarchy is not None and isinstance(c, int) else str(c)): v
                for c, v in scores.items()
            }
        report["levels"].append(entry)
    report["mean_macro_f1"] = float(np.mean([e["macro_f1"] for e in report["levels"]])) if M else 0.0
    if M >= 2 and preds:
        report["top_sec"], report["top_sec_conn"] = consistency(preds, golds, binding)
    return report


def format_report(report: dict) -> str:
    """Key-value text, one metric per line."""
    lines = [f"n = {report['n']}"]
    for e in report["levels"]:
        m = e["level"]
        lines.append(f"level{m}.macro_f1 = {e['macro_f1']:.4f}")
        lines.append(f"level{m}.accuracy = {e['accuracy']:.4f}")
        for name, v in e.get("labelwise_f1", {}).items():
            lines.append(f"level{m}.f1[{name}] = {v:.4f}")
    lines.append(f"mean_macro_f1 = {report['mean_macro_f1']:.4f}")
    if "top_sec" in report:
        lines.append(f"top_sec = {report['top_sec']:.4f}")
        if report["top_sec_conn"] is not None:
            lines.append(f"top_sec_conn = {report['top_sec_conn']:.4f}")
    return "\n".join(lines) + "\n"


def write_representations(reps: np.ndarray, gold_names: Sequence[Sequence[Sequence[str]]],
                          path: str | Path) -> None:
    if len(reps) != len(gold_names):
        raise ValueError("one gold entry per representation required")
    with open(path, "w", encoding="utf-8") as fh:
        for h, gold in zip(reps, gold_names):
            fh.write(json.dumps({"h": [float(v) for v in h], "gold": [list(g) for g in gold]}) + "\n")


def load_representations(path: str | Path) -> tuple[np.ndarray, list]:
    hs, golds = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                hs.append(rec["h"])
                golds.append(rec["gold"])
    return np.array(hs, dtype=np.float64), golds


def export_representations(checkpoint, instances, path: str | Path) -> int:
    """Write one ``{"h": [...], "gold": [[...], ...]}`` record per instance."""
    from .model import represent

    model = checkpoint.model(inference_only=True) if hasattr(checkpoint, "params") else checkpoint
    reps = represent(model, instances)
    names = [[list(model.hierarchy.names(g)) for g in x.gold] for x in instances]
    write_representations(reps, names, path)
    return len(instances)
