"""Graph convolution over the sense taxonomy to produce label embeddings."""

from __future__ import annotations

import math

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from .hierarchy import SenseHierarchy, adjacency


def init_label_embeddings(count: int, dim: int, generator: torch.Generator | None = None,
                          dtype=torch.float64) -> torch.Tensor:
    """Kaiming-normal draw, std = sqrt(2 / fan_in) with fan_in = ``dim``."""
    if count < 1 or dim < 1:
        raise ValueError("count and dim must be >= 1")
    return torch.randn(count, dim, generator=generator, dtype=dtype) * math.sqrt(2.0 / dim)


def normalized_adjacency(A) -> torch.Tensor:
    """D^-1/2 A D^-1/2 with D the row sums of A (self loops included)."""
    A = torch.as_tensor(np.asarray(A), dtype=torch.float64)
    d = A.sum(dim=1).rsqrt()
    return d[:, None] * A * d[None, :]


def gcn_layer(R, A_norm, W, b, dropout: float = 0.0, training: bool = False):
    """ReLU(A_norm R W + b), then dropout when training."""
    if A_norm.shape[0] != A_norm.shape[1] or A_norm.shape[1] != R.shape[0]:
        raise ValueError(f"adjacency {tuple(A_norm.shape)} does not match {R.shape[0]} nodes")
    if W.shape[0] != R.shape[1]:
        raise ValueError(f"weight {tuple(W.shape)} does not match embedding width {R.shape[1]}")
    out = F.relu(A_norm.to(R.dtype) @ R @ W + b)
    return F.dropout(out, dropout, training)


class LabelGraphEncoder(nn.Module):
    """Trainable initial sense embeddings pushed through ``n_layers`` GCN layers."""

    def __init__(self, hierarchy: SenseHierarchy, dim: int = 100, n_layers: int = 2,
                 dropout: float = 0.1, generator: torch.Generator | None = None):
        super().__init__()
        self.dropout = dropout
        self.register_buffer("A_norm", normalized_adjacency(adjacency(hierarchy)), persistent=False)
        self.embeddings = nn.Parameter(init_label_embeddings(len(hierarchy), dim, generator))
        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        for _ in range(n_layers):
            W = torch.empty(dim, dim, dtype=torch.float64)
            nn.init.xavier_uniform_(W, generator=generator)
            self.weights.append(nn.Parameter(W))
            self.biases.append(nn.Parameter(torch.zeros(dim, dtype=torch.float64)))

    def forward(self) -> torch.Tensor:
        R = self.embeddings
        for W, b in zip(self.weights, self.biases):
            R = gcn_layer(R, self.A_norm, W, b, self.dropout, self.training)
        return R
