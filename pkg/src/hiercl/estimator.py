"""scikit-learn style wrapper around training and inference."""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_label_sequences, check_pairs
from .config import TrainConfig
from .corpus import Instance, Vocabulary
from .hierarchy import SenseHierarchy, load_hierarchy
from .metrics import evaluate
from .model import predict_ids, represent
from .trainer import fit as fit_model

# predict/transform only read the two arguments
_Pair = namedtuple("_Pair", "arg1 arg2")


def infer_hierarchy(golds) -> SenseHierarchy:
    """Smallest hierarchy containing every observed sequence; senses keep first-seen order."""
    seqs = [s for gold in golds for s in gold]
    depth = len(seqs[0])
    levels: list[dict] = [{} for _ in range(depth)]
    edges: dict = {}
    for s in seqs:
        for m, name in enumerate(s):
            levels[m].setdefault(name, None)
        for a, b in zip(s, s[1:]):
            edges.setdefault((a, b), None)
    return SenseHierarchy([list(lv) for lv in levels], [list(e) for e in edges])


class HierarchicalContrastiveClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Multi-level relation classifier trained with hierarchy-aware contrastive losses.

    ``X`` holds ``(arg1, arg2)`` text pairs.  ``y`` holds one label sequence
    per row (names, top level first) or a list of them for multi-gold rows.
    ``predict`` returns a name tuple per row; ``transform`` returns the
    pooled relation representation.  Defaults follow the from-scratch
    synthetic setting (``lr=1e-3``, 200 epochs).
    """

    def __init__(self, hierarchy=None, *, d_h=64, n_heads=4, n_layers=2, mhia_layers=2,
                 dropout=0.1, gcn_layers=2, d_r=100, lambda_global=0.1, lambda_local=1.0,
                 tau=0.1, lr=1e-3, weight_decay=0.01, batch_size=32, epochs=200,
                 eval_interval=100, mhia_off=False, staircase_off=False, lg_off=False,
                 ll_off=False, ll_hard=False, max_len=128, n_buckets=16, seed=0):
        self.hierarchy = hierarchy
        self.d_h = d_h
        self.n_heads = n_heads
        self.n_layers = n_layers
        self.mhia_layers = mhia_layers
        self.dropout = dropout
        self.gcn_layers = gcn_layers
        self.d_r = d_r
        self.lambda_global = lambda_global
        self.lambda_local = lambda_local
        self.tau = tau
        self.lr = lr
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.eval_interval = eval_interval
        self.mhia_off = mhia_off
        self.staircase_off = staircase_off
        self.lg_off = lg_off
        self.ll_off = ll_off
        self.ll_hard = ll_hard
        self.max_len = max_len
        self.n_buckets = n_buckets
        self.seed = seed

    def _config(self) -> TrainConfig:
        keys = set(TrainConfig.__dataclass_fields__) & set(self.get_params())
        return TrainConfig(**{k: getattr(self, k) for k in keys})

    def _resolve_hierarchy(self, golds) -> SenseHierarchy:
        if self.hierarchy is None:
            return infer_hierarchy(golds)
        if isinstance(self.hierarchy, SenseHierarchy):
            return self.hierarchy
        return load_hierarchy(self.hierarchy)

    def _instances(self, pairs, golds) -> list[Instance]:
        enc = self.vocabulary_.encode
        return [Instance(enc(a, self.max_len), enc(b, self.max_len),
                         tuple(self.hierarchy_.sequence(s) for s in gold))
                for (a, b), gold in zip(pairs, golds)]

    def _pairs(self, X) -> list[_Pair]:
        check_is_fitted(self, "model_")
        enc = self.vocabulary_.encode
        return [_Pair(enc(a, self.max_len), enc(b, self.max_len)) for a, b in check_pairs(X)]

    def fit(self, X, y, X_dev=None, y_dev=None):
        """Train from scratch; with a dev split, keep the best mean dev macro-F1 weights."""
        pairs = check_pairs(X)
        golds = check_label_sequences(y, len(pairs))
        config = self._config()
        self.hierarchy_ = self._resolve_hierarchy(golds)
        self.vocabulary_ = Vocabulary.build((t for p in pairs for t in p), n_buckets=self.n_buckets)
        train = self._instances(pairs, golds)
        dev = None
        if X_dev is not None:
            dev_pairs = check_pairs(X_dev)
            dev = self._instances(dev_pairs, check_label_sequences(y_dev, len(dev_pairs)))
        result = fit_model(config, train, self.hierarchy_, self.vocabulary_, dev=dev)
        self.model_ = result.model
        self.log_ = result.log
        self.best_step_ = result.best_step
        self.classes_ = [tuple(s.name for s in self.hierarchy_.senses if s.level == m + 1)
                         for m in range(self.hierarchy_.n_levels)]
        self.n_levels_ = self.hierarchy_.n_levels
        return self

    def predict(self, X) -> list[tuple[str, ...]]:
        pairs = self._pairs(X)
        ids = predict_ids(self.model_, pairs)
        return [self.hierarchy_.names(seq) for seq in ids]

    def transform(self, X) -> np.ndarray:
        pairs = self._pairs(X)
        return represent(self.model_, pairs)

    def evaluate(self, X, y, labelwise: bool = False, binding: str = "any") -> dict:
        pairs = check_pairs(X)
        golds = check_label_sequences(y, len(pairs))
        return evaluate(self.predict(pairs), golds, labelwise=labelwise, binding=binding)

    def score(self, X, y, sample_weight=None) -> float:
        """Mean of the per-level macro-F1 scores."""
        if sample_weight is not None:
            raise ValueError("sample_weight is not supported")
        return self.evaluate(X, y)["mean_macro_f1"]
