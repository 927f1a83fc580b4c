"""Relation encoder: base transformer over ``[CLS] a1 [SEP] a2 [SEP]`` followed
by stacked interactive attention between the two argument streams.

The [CLS] row of the arg1 stream after the last interactive layer is the
relation representation ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import torch
from torch import nn
import torch.nn.functional as F

CLS_ID, SEP_ID, PAD_ID = 1, 2, 0
ARG1, ARG2 = 0, 1


def token_sequence(arg1: Sequence[int], arg2: Sequence[int]) -> tuple[list[int], list[int]]:
    """Joined ids and segment marks.

    [CLS] and the first [SEP] belong to arg1; the trailing [SEP] to arg2.
    """
    ids = [CLS_ID, *arg1, SEP_ID, *arg2, SEP_ID]
    marks = [ARG1] * (len(arg1) + 2) + [ARG2] * (len(arg2) + 1)
    return ids, marks


def split_segments(H: torch.Tensor, marks: Sequence[int]) -> tuple[torch.Tensor, torch.Tensor]:
    """Route rows of a single (L, d) context matrix to the two arguments."""
    m = torch.as_tensor(marks)
    return H[m == ARG1], H[m == ARG2]


@dataclass
class EncodedBatch:
    ids: torch.Tensor        # (B, L) token ids, PAD_ID padded
    pad_mask: torch.Tensor   # (B, L) True at padding
    idx1: torch.Tensor       # (B, L1) positions of the arg1 stream
    mask1: torch.Tensor      # (B, L1) True at padding
    idx2: torch.Tensor
    mask2: torch.Tensor

    def __len__(self) -> int:
        return self.ids.shape[0]


def collate(pairs: Sequence[tuple[Sequence[int], Sequence[int]]]) -> EncodedBatch:
    """Pad a list of (arg1 ids, arg2 ids) into batch tensors."""
    if not pairs:
        raise ValueError("cannot collate an empty batch")
    seqs = [token_sequence(a1, a2)[0] for a1, a2 in pairs]
    L = max(map(len, seqs))
    L1 = max(len(a1) + 2 for a1, _ in pairs)
    L2 = max(len(a2) + 1 for _, a2 in pairs)
    B = len(pairs)
    ids = torch.full((B, L), PAD_ID, dtype=torch.long)
    pad = torch.ones((B, L), dtype=torch.bool)
    idx1 = torch.zeros((B, L1), dtype=torch.long)
    mask1 = torch.ones((B, L1), dtype=torch.bool)
    idx2 = torch.zeros((B, L2), dtype=torch.long)
    mask2 = torch.ones((B, L2), dtype=torch.bool)
    for b, ((a1, a2), seq) in enumerate(zip(pairs, seqs)):
        ids[b, :len(seq)] = torch.tensor(seq)
        pad[b, :len(seq)] = False
        n1, n2 = len(a1) + 2, len(a2) + 1
        idx1[b, :n1] = torch.arange(n1)
        mask1[b, :n1] = False
        idx2[b, :n2] = torch.arange(n1, n1 + n2)
        mask2[b, :n2] = False
    return EncodedBatch(ids, pad, idx1, mask1, idx2, mask2)


class MultiHeadAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        if d_model % n_heads:
            raise ValueError(f"d_model={d_model} not divisible by n_heads={n_heads}")
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q = nn.Linear(d_model, d_model)
        self.k = nn.Linear(d_model, d_model)
        self.v = nn.Linear(d_model, d_model)
        self.out = nn.Linear(d_model, d_model)

    def forward(self, query, key, key_padding_mask=None):
        B, Lq, d = query.shape
        Lk = key.shape[1]
        if key.shape[-1] != d:
            raise ValueError(f"query dim {d} != key dim {key.shape[-1]}")
        q = self.q(query).view(B, Lq, self.n_heads, self.d_head).transpose(1, 2)
        k = self.k(key).view(B, Lk, self.n_heads, self.d_head).transpose(1, 2)
        v = self.v(key).view(B, Lk, self.n_heads, self.d_head).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        if key_padding_mask is not None:
            scores = scores.masked_fill(key_padding_mask[:, None, None, :], float("-inf"))
        ctx = torch.softmax(scores, dim=-1) @ v
        return self.out(ctx.transpose(1, 2).reshape(B, Lq, d))


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ff: int, dropout: float):
        super().__init__()
        self.fc1 = nn.Linear(d_model, d_ff)
        self.fc2 = nn.Linear(d_ff, d_model)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x):
        return self.fc2(self.dropout(F.gelu(self.fc1(x))))


class AttentionBlock(nn.Module):
    """Post-norm transformer block whose attention may look at another sequence."""

    def __init__(self, d_model: int, n_heads: int, d_ff: int, dropout: float):
        super().__init__()
        self.attn = MultiHeadAttention(d_model, n_heads)
        self.norm1 = nn.LayerNorm(d_model)
        self.ff = FeedForward(d_model, d_ff, dropout)
        self.norm2 = nn.LayerNorm(d_model)
        self.dropout = nn.Dropout(dropout)

    def attend(self, x, context, context_mask=None):
        return self.norm1(x + self.dropout(self.attn(x, context, context_mask)))

    def forward(self, x, context, context_mask=None):
        x = self.attend(x, context, context_mask)
        return self.norm2(x + self.dropout(self.ff(x)))


class BaseEncoder(Protocol):
    """Anything mapping (ids, pad_mask) of shape (B, L) to (B, L, d_h)."""

    d_model: int

    def __call__(self, ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor: ...


class TransformerEncoder(nn.Module):
    """Small from-scratch transformer standing in for a pre-trained encoder."""

    def __init__(self, vocab_size: int, d_model: int = 64, n_heads: int = 4,
                 n_layers: int = 2, d_ff: int | None = None, dropout: float = 0.1,
                 max_positions: int = 2 * 128 + 3):
        super().__init__()
        self.d_model = d_model
        self.vocab_size = vocab_size
        self.tok = nn.Embedding(vocab_size, d_model)
        self.pos = nn.Embedding(max_positions, d_model)
        self.dropout = nn.Dropout(dropout)
        self.layers = nn.ModuleList(
            AttentionBlock(d_model, n_heads, d_ff or 4 * d_model, dropout) for _ in range(n_layers)
        )

    def forward(self, ids, pad_mask=None):
        if ids.numel() and (int(ids.min()) < 0 or int(ids.max()) >= self.vocab_size):
            raise ValueError(f"token id out of range [0, {self.vocab_size})")
        if ids.shape[1] > self.pos.num_embeddings:
            raise ValueError(f"sequence length {ids.shape[1]} exceeds {self.pos.num_embeddings}")
        positions = torch.arange(ids.shape[1], device=ids.device)
        H = self.dropout(self.tok(ids) + self.pos(positions)[None])
        for layer in self.layers:
            H = layer(H, H, pad_mask)
        return H


class InteractiveAttentionLayer(nn.Module):
    """One bidirectional cross-attention layer between the argument streams.

    arg1 queries arg2 and arg2 queries arg1, each with its own attention and
    feed-forward weights; both directions read the inputs of this layer.
    """

    def __init__(self, d_model: int, n_heads: int, d_ff: int | None = None, dropout: float = 0.1):
        super().__init__()
        d_ff = d_ff or 4 * d_model
        self.a_to_b = AttentionBlock(d_model, n_heads, d_ff, dropout)
        self.b_to_a = AttentionBlock(d_model, n_heads, d_ff, dropout)

    def forward(self, H1, H2, mask1=None, mask2=None):
        if H1.shape[-1] != H2.shape[-1]:
            raise ValueError(f"argument widths differ: {H1.shape[-1]} vs {H2.shape[-1]}")
        return self.a_to_b(H1, H2, mask2), self.b_to_a(H2, H1, mask1)


class RelationEncoder(nn.Module):
    def __init__(self, base: nn.Module, n_heads: int = 4, n_interactive: int = 2,
                 d_ff: int | None = None, dropout: float = 0.1):
        super().__init__()
        self.base = base
        d = base.d_model
        self.interactive = nn.ModuleList(
            InteractiveAttentionLayer(d, n_heads, d_ff, dropout) for _ in range(n_interactive)
        )

    @property
    def d_model(self) -> int:
        return self.base.d_model

    def forward(self, batch: EncodedBatch) -> torch.Tensor:
        H = self.base(batch.ids, batch.pad_mask)
        d = H.shape[-1]
        H1 = H.gather(1, batch.idx1[..., None].expand(-1, -1, d))
        H2 = H.gather(1, batch.idx2[..., None].expand(-1, -1, d))
        for layer in self.interactive:
            H1, H2 = layer(H1, H2, batch.mask1, batch.mask2)
        return H1[:, 0]
