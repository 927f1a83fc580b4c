"""Multi-task training: cross-entropy plus the two contrastive regularizers."""

from __future__ import annotations

import copy
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from .classifier import ce_loss
from .config import TrainConfig
from .contrastive import global_contrastive, hard_weights, local_contrastive_soft, total_loss
from .corpus import Instance, Vocabulary, expand_multilabel, make_batches
from .hierarchy import SenseHierarchy, score_matrix
from .metrics import level_metrics
from .model import (HierContrastModel, build_model, checkpoint_document, gold_tensor,
                    predict_ids)

logger = logging.getLogger(__name__)


class NonFiniteLossError(FloatingPointError):
    pass


def duplicate_batch(batch: Sequence[Instance]) -> tuple[list[Instance], list[Instance]]:
    """Two views of the same instances; they differ only through dropout in the forward pass."""
    if not batch:
        raise ValueError("cannot duplicate an empty batch")
    return list(batch), list(batch)


@dataclass
class StepOutput:
    loss: torch.Tensor
    ce: torch.Tensor
    lg: torch.Tensor | None
    ll: torch.Tensor | None

    def record(self) -> dict:
        out = {"loss": self.loss.item(), "ce": self.ce.item()}
        if self.lg is not None:
            out["lg"] = self.lg.item()
        if self.ll is not None:
            out["ll"] = self.ll.item()
        return out


def compute_losses(model: HierContrastModel, batch: Sequence[Instance], config: TrainConfig) -> StepOutput:
    """Forward both views and combine the objectives honoring ablation flags."""
    hierarchy = model.hierarchy
    view_a, view_b = duplicate_batch(batch)
    if config.ll_off:
        h = model.encode(view_a)
    else:
        # one pass over both views; dropout masks are drawn independently per row
        h, h_plus = model.encode(view_a + view_b).split(len(view_a))
    ce = ce_loss(model.classifier(h), gold_tensor(view_a, hierarchy, local=True))

    lg = ll = None
    if not config.lg_off:
        golds = gold_tensor(view_a, hierarchy, local=False)
        lg = global_contrastive(h, model.label_graph(), golds, model.phi_text, model.phi_label, config.tau,
                                level_sizes=hierarchy.level_sizes if config.per_level_global else None)
    if not config.ll_off:
        golds = gold_tensor(view_a, hierarchy, local=False)
        if config.ll_hard:
            weights = hard_weights(golds)
        else:
            weights = torch.from_numpy(score_matrix(golds.numpy()))
        ll = local_contrastive_soft(h, h_plus, weights, model.phi_local, config.tau, config.exclude_self)

    zero = ce.new_zeros(())
    loss = total_loss(ce, zero if lg is None else lg, zero if ll is None else ll,
                      0.0 if lg is None else config.lambda_global,
                      0.0 if ll is None else config.lambda_local)
    return StepOutput(loss, ce, lg, ll)


def make_optimizer(model: HierContrastModel, config: TrainConfig) -> torch.optim.Optimizer:
    return torch.optim.AdamW(model.parameters(), lr=config.lr, betas=(config.beta1, config.beta2),
                             eps=config.eps, weight_decay=config.weight_decay)


def train_step(model: HierContrastModel, optimizer: torch.optim.Optimizer,
               batch: Sequence[Instance], config: TrainConfig) -> StepOutput:
    model.train()
    out = compute_losses(model, batch, config)
    if not torch.isfinite(out.loss):
        raise NonFiniteLossError(f"non-finite loss: {out.record()}")
    optimizer.zero_grad(set_to_none=True)
    out.loss.backward()
    if config.grad_clip > 0:
        torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
    optimizer.step()
    return out


def dev_scores(model: HierContrastModel, instances: Sequence[Instance]) -> dict:
    preds = predict_ids(model, instances)
    golds = [x.gold for x in instances]
    per_level = [level_metrics(preds, golds, m) for m in range(1, model.hierarchy.n_levels + 1)]
    return {
        "macro_f1": [f for f, _ in per_level],
        "accuracy": [a for _, a in per_level],
        "mean_macro_f1": float(np.mean([f for f, _ in per_level])),
    }


@dataclass
class FitResult:
    model: HierContrastModel
    vocab: Vocabulary
    log: list[dict] = field(default_factory=list)
    best_step: int = 0
    best_score: float = -math.inf

    def checkpoint(self) -> dict:
        return checkpoint_document(self.model, self.vocab,
                                   meta={"best_step": self.best_step, "best_dev": self.best_score})


def fit(config: TrainConfig, train: Sequence[Instance], hierarchy: SenseHierarchy, vocab: Vocabulary,
        dev: Sequence[Instance] | None = None, log_path: str | Path | None = None) -> FitResult:
    """Train from scratch and keep the parameters with the best mean dev macro-F1.

    Without a dev split the final parameters are kept.  Training data is
    expanded so every gold sequence becomes its own instance; ``dev`` is
    scored with match-any.
    """
    if not train:
        raise ValueError("empty training split")
    model = build_model(config, hierarchy, len(vocab))
    optimizer = make_optimizer(model, config)
    train = expand_multilabel(train)
    steps_per_epoch = math.ceil(len(train) / config.batch_size)
    total_steps = steps_per_epoch * config.epochs
    scheduler = None
    if config.lr_schedule == "linear":
        scheduler = torch.optim.lr_scheduler.LambdaLR(optimizer, lambda s: max(0.0, 1 - s / total_steps))

    result = FitResult(model, vocab)
    best_state = None
    log_fh = open(log_path, "w", encoding="utf-8") if log_path else None

    def emit(record):
        result.log.append(record)
        if log_fh:
            log_fh.write(json.dumps(record, sort_keys=True) + "\n")

    def evaluate(step, epoch):
        nonlocal best_state
        scores = dev_scores(model, dev)
        improved = scores["mean_macro_f1"] > result.best_score
        if improved:
            result.best_score, result.best_step = scores["mean_macro_f1"], step
            best_state = copy.deepcopy(model.state_dict())
        emit({"step": step, "epoch": epoch, "dev": scores, "best": improved})
        logger.info("step %d dev mean macro-F1 %.4f%s", step, scores["mean_macro_f1"],
                    " (best)" if improved else "")

    try:
        step = 0
        last_eval = -1
        for epoch in range(1, config.epochs + 1):
            for batch in make_batches(train, config.batch_size, seed=config.seed * 100003 + epoch):
                out = train_step(model, optimizer, batch, config)
                if scheduler is not None:
                    scheduler.step()
                step += 1
                if step % config.log_interval == 0:
                    emit({"step": step, "epoch": epoch, **out.record()})
                if dev and step % config.eval_interval == 0:
                    evaluate(step, epoch)
                    last_eval = step
        if dev and last_eval != step:
            evaluate(step, config.epochs)
    finally:
        if log_fh:
            log_fh.close()

    if best_state is not None:
        model.load_state_dict(best_state)
    else:
        result.best_step = step
    model.eval()
    return result


def infer(model, instances: Sequence[Instance]) -> list[tuple[int, ...]]:
    """Label sequences (global sense ids) from a model or a loaded checkpoint."""
    if hasattr(model, "params"):
        model = model.model(inference_only=True)
    return predict_ids(model, instances)
