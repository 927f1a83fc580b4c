"""Projection heads and the text-label / instance-instance contrastive losses."""

from __future__ import annotations

from typing import Callable, Sequence

import torch
from torch import nn

TEMPERATURE = 0.1


class ProjectionHead(nn.Module):
    """Linear -> tanh -> Linear."""

    def __init__(self, d_in: int, d_hidden: int, d_out: int):
        super().__init__()
        self.fc1 = nn.Linear(d_in, d_hidden)
        self.fc2 = nn.Linear(d_hidden, d_out)

    def forward(self, x):
        return self.fc2(torch.tanh(self.fc1(x)))


def _identity(x):
    return x


def cosine(u: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """Pairwise cosine similarity between the rows of ``u`` (n, d) and ``v`` (k, d).

    1-d inputs give a scalar.  Zero-norm rows raise instead of being clamped.
    """
    squeeze = u.dim() == 1 and v.dim() == 1
    u, v = torch.atleast_2d(u), torch.atleast_2d(v)
    nu, nv = u.norm(dim=-1), v.norm(dim=-1)
    if bool((nu == 0).any()) or bool((nv == 0).any()):
        raise ValueError("cosine similarity undefined for a zero-norm vector")
    sim = (u @ v.T) / (nu[:, None] * nv[None, :])
    return sim[0, 0] if squeeze else sim


def global_contrastive(h: torch.Tensor, label_embs: torch.Tensor, golds: torch.Tensor,
                       phi_text: Callable | None = None, phi_label: Callable | None = None,
                       tau: float = TEMPERATURE, level_sizes: Sequence[int] | None = None) -> torch.Tensor:
    """Text-label matching loss.

    Every gold sense of instance i (one per level, global ids in ``golds``
    of shape (B, M)) contributes ``-log softmax_j(cos(phi_text(h_i),
    phi_label(r_j)) / tau)``.  By default the softmax runs jointly over all
    senses; passing ``level_sizes`` restricts it to the gold's own level.
    """
    z = (phi_text or _identity)(h)
    u = (phi_label or _identity)(label_embs)
    logits = cosine(z, u) / tau
    if level_sizes is None:
        logp = torch.log_softmax(logits, dim=1)
    else:
        logp = torch.cat([torch.log_softmax(block, dim=1)
                          for block in logits.split(list(level_sizes), dim=1)], dim=1)
    return -logp.gather(1, golds).sum(dim=1).mean()


def local_contrastive_soft(h: torch.Tensor, h_plus: torch.Tensor, scores: torch.Tensor,
                           phi: Callable | None = None, tau: float = TEMPERATURE,
                           exclude_self: bool = False) -> torch.Tensor:
    """Score-weighted contrastive loss between a batch and its dropout duplicate.

    Anchors are the rows of ``h``; candidates are the rows of ``h_plus``.
    ``scores[i, j]`` weighs the log-probability of candidate j for anchor i.
    """
    if h.shape != h_plus.shape:
        raise ValueError(f"views differ in shape: {tuple(h.shape)} vs {tuple(h_plus.shape)}")
    if scores.shape != (h.shape[0], h_plus.shape[0]):
        raise ValueError(f"score matrix {tuple(scores.shape)} does not match batch {h.shape[0]}")
    phi = phi or _identity
    logits = cosine(phi(h), phi(h_plus)) / tau
    weights = scores.to(logits.dtype)
    if exclude_self:
        eye = torch.eye(h.shape[0], dtype=torch.bool, device=h.device)
        logits = logits.masked_fill(eye, float("-inf"))
        weights = weights.masked_fill(eye, 0.0)
        if h.shape[0] == 1:
            return logits.new_zeros(())
    logp = torch.log_softmax(logits, dim=1)
    # masked diagonal: 0 * -inf would poison the sum
    terms = torch.where(weights != 0, weights * logp, torch.zeros_like(logp))
    return -terms.sum() / h.shape[0]


def hard_weights(golds: torch.Tensor, golds_plus: torch.Tensor | None = None) -> torch.Tensor:
    """1 where two label sequences agree at every level, else 0."""
    golds_plus = golds if golds_plus is None else golds_plus
    return (golds[:, None, :] == golds_plus[None, :, :]).all(dim=-1).to(torch.float64)


def local_contrastive_hard(h, h_plus, golds, phi=None, tau=TEMPERATURE, exclude_self=False):
    """Supervised-contrastive variant: only identical label sequences are positives."""
    return local_contrastive_soft(h, h_plus, hard_weights(golds), phi, tau, exclude_self)


def total_loss(ce, lg, ll, lambda_global: float = 0.1, lambda_local: float = 1.0):
    if lambda_global < 0 or lambda_local < 0:
        raise ValueError("loss weights must be non-negative")
    return ce + lambda_global * lg + lambda_local * ll
