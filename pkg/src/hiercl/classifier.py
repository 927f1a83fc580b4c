"""Per-level logits where each level also sees the logits of the level above."""

from __future__ import annotations

from typing import Sequence

import torch
from torch import nn


class StaircaseClassifier(nn.Module):
    """``t^m = h W1^m + t^{m-1} W2^m + b^m`` for m = 1..M, with t^0 = 0.

    The level-1 staircase weight would only ever multiply zeros, so it is not
    allocated.  With ``staircase=False`` every W2 is dropped and the levels
    become independent linear heads.
    """

    def __init__(self, d_h: int, level_sizes: Sequence[int], staircase: bool = True):
        super().__init__()
        self.level_sizes = tuple(level_sizes)
        self.staircase = staircase
        self.heads = nn.ModuleList(nn.Linear(d_h, n) for n in self.level_sizes)
        if staircase:
            self.steps = nn.ModuleList(
                nn.Linear(p, n, bias=False) for p, n in zip(self.level_sizes[:-1], self.level_sizes[1:])
            )

    def forward(self, h: torch.Tensor) -> list[torch.Tensor]:
        if h.shape[-1] != self.heads[0].in_features:
            raise ValueError(f"representation width {h.shape[-1]} != {self.heads[0].in_features}")
        logits = []
        prev = None
        for m, head in enumerate(self.heads):
            t = head(h)
            if self.staircase and prev is not None:
                t = t + self.steps[m - 1](prev)
            logits.append(t)
            prev = t
        return logits


def ce_loss(logits: Sequence[torch.Tensor], gold: torch.Tensor) -> torch.Tensor:
    """Batch mean of the summed per-level negative log-likelihood.

    ``gold`` is a (B, M) tensor of per-level local indices.
    """
    total = 0.0
    for m, t in enumerate(logits):
        total = total - torch.log_softmax(t, dim=-1).gather(1, gold[:, m:m + 1]).squeeze(1)
    return total.mean()


def predict(logits: Sequence[torch.Tensor]) -> torch.Tensor:
    """Per-level argmax (first maximum wins ties) as local indices, shape (B, M)."""
    return torch.stack([t.argmax(dim=-1) for t in logits], dim=1)
