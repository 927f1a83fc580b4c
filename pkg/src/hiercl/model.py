"""The assembled network and its JSON checkpoint format."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import torch
from torch import nn

from .classifier import StaircaseClassifier, predict as argmax_levels
from .config import TrainConfig
from .contrastive import ProjectionHead
from .corpus import Instance, Vocabulary
from .encoder import RelationEncoder, TransformerEncoder, collate
from .hierarchy import SenseHierarchy
from .label_graph import LabelGraphEncoder

CHECKPOINT_FORMAT = "hiercl-checkpoint/1"
INFERENCE_MODULES = ("encoder", "classifier")


class CheckpointError(ValueError):
    pass


class HierContrastModel(nn.Module):
    """Relation encoder + staircase classifier, plus the training-only parts.

    The label graph encoder and the three projection heads are only needed
    by the contrastive objectives; ``inference_only=True`` leaves them out.
    """

    def __init__(self, config: TrainConfig, hierarchy: SenseHierarchy, vocab_size: int,
                 inference_only: bool = False):
        super().__init__()
        self.config = config
        self.hierarchy = hierarchy
        d = config.d_h
        base = TransformerEncoder(vocab_size, d, config.n_heads, config.n_layers, config.ff_width,
                                  config.dropout, max_positions=2 * config.max_len + 3)
        self.encoder = RelationEncoder(base, config.n_heads,
                                       0 if config.mhia_off else config.mhia_layers,
                                       config.ff_width, config.dropout)
        self.classifier = StaircaseClassifier(d, hierarchy.level_sizes, staircase=not config.staircase_off)
        self.inference_only = inference_only
        if not inference_only:
            self.label_graph = LabelGraphEncoder(hierarchy, config.d_r, config.gcn_layers, config.gcn_dropout)
            self.phi_text = ProjectionHead(d, d, d)
            self.phi_label = ProjectionHead(config.d_r, d, d)
            self.phi_local = ProjectionHead(d, d, d)
        self.to(torch.float64)

    def encode(self, instances: Sequence[Instance]) -> torch.Tensor:
        return self.encoder(collate([(x.arg1, x.arg2) for x in instances]))


def build_model(config: TrainConfig, hierarchy: SenseHierarchy, vocab_size: int) -> HierContrastModel:
    """Seeded construction: same config and seed give identical initial weights."""
    torch.manual_seed(config.seed)
    return HierContrastModel(config, hierarchy, vocab_size)


def gold_tensor(instances: Sequence[Instance], hierarchy: SenseHierarchy, local: bool) -> torch.Tensor:
    """First gold sequence of each instance as (B, M) ids, global or per-level."""
    offsets = torch.tensor(hierarchy.level_offsets) if local else 0
    return torch.tensor([x.gold[0] for x in instances], dtype=torch.long) - offsets


@torch.no_grad()
def predict_ids(model: HierContrastModel, instances: Sequence[Instance],
                batch_size: int = 64) -> list[tuple[int, ...]]:
    """Evaluation-mode decoding; touches only the encoder and classifier."""
    was_training = model.training
    model.eval()
    offsets = torch.tensor(model.hierarchy.level_offsets)
    out: list[tuple[int, ...]] = []
    for k in range(0, len(instances), batch_size):
        logits = model.classifier(model.encode(instances[k:k + batch_size]))
        out.extend(tuple(int(v) for v in row) for row in argmax_levels(logits) + offsets)
    model.train(was_training)
    return out


@torch.no_grad()
def represent(model: HierContrastModel, instances: Sequence[Instance], batch_size: int = 64) -> np.ndarray:
    was_training = model.training
    model.eval()
    parts = [model.encode(instances[k:k + batch_size]).numpy() for k in range(0, len(instances), batch_size)]
    model.train(was_training)
    return np.concatenate(parts) if parts else np.zeros((0, model.config.d_h))


# -- checkpoints -------------------------------------------------------------

@dataclass
class Checkpoint:
    config: TrainConfig
    hierarchy: SenseHierarchy
    vocab: Vocabulary
    params: dict[str, torch.Tensor]
    meta: dict

    def model(self, inference_only: bool = True) -> HierContrastModel:
        model = HierContrastModel(self.config, self.hierarchy, len(self.vocab), inference_only=inference_only)
        expected = model.state_dict()
        missing = [k for k in expected if k not in self.params]
        if missing:
            raise CheckpointError(f"checkpoint lacks {len(missing)} parameters, e.g. {missing[0]!r}")
        for name, tensor in expected.items():
            if tuple(tensor.shape) != tuple(self.params[name].shape):
                raise CheckpointError(
                    f"{name}: checkpoint shape {tuple(self.params[name].shape)} != {tuple(tensor.shape)}"
                )
        model.load_state_dict({k: self.params[k] for k in expected})
        model.eval()
        return model

    def check_hierarchy(self, hierarchy: SenseHierarchy) -> None:
        if hierarchy != self.hierarchy:
            raise CheckpointError("checkpoint was trained on a different sense hierarchy")


def checkpoint_document(model: HierContrastModel, vocab: Vocabulary, meta: dict | None = None,
                        state: dict[str, torch.Tensor] | None = None) -> dict:
    state = model.state_dict() if state is None else state
    return {
        "format": CHECKPOINT_FORMAT,
        "config": model.config.to_dict(),
        "hierarchy": model.hierarchy.to_dict(),
        "vocab": vocab.to_dict(),
        "meta": meta or {},
        "params": {
            name: {"shape": list(t.shape), "data": t.detach().to(torch.float64).reshape(-1).tolist()}
            for name, t in state.items()
        },
    }


def save_checkpoint(path: str | Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def parse_checkpoint(doc: dict) -> Checkpoint:
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {doc.get('format')!r}")
    params = {}
    for name, entry in doc["params"].items():
        data = torch.tensor(entry["data"], dtype=torch.float64)
        params[name] = data.reshape(entry["shape"])
    return Checkpoint(
        config=TrainConfig(**doc["config"]),
        hierarchy=SenseHierarchy.from_dict(doc["hierarchy"]),
        vocab=Vocabulary.from_dict(doc["vocab"]),
        params=params,
        meta=doc.get("meta", {}),
    )


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, encoding="utf-8") as fh:
        return parse_checkpoint(json.load(fh))


def strip_training_params(doc: dict) -> dict:
    """Copy of a checkpoint document without label-graph and projection-head parameters."""
    keep = {k: v for k, v in doc["params"].items() if k.split(".", 1)[0] in INFERENCE_MODULES}
    return {**doc, "params": keep}
