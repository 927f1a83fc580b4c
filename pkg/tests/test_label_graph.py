import math

import numpy as np
import pytest
import torch

from hiercl.hierarchy import SenseHierarchy, adjacency
from hiercl.label_graph import LabelGraphEncoder, gcn_layer, init_label_embeddings, normalized_adjacency

from .oracles import finite_difference_check, gcn_oracle


def t(x):
    return torch.tensor(x, dtype=torch.float64)


class TestInit:
    def test_default_width(self):
        enc = LabelGraphEncoder(SenseHierarchy.tree((4, 8, 16)))
        assert enc.embeddings.shape == (28, 100)

    def test_seeded(self):
        a = init_label_embeddings(5, 7, torch.Generator().manual_seed(3))
        b = init_label_embeddings(5, 7, torch.Generator().manual_seed(3))
        torch.testing.assert_close(a, b, rtol=0, atol=0)

    def test_std(self):
        R = init_label_embeddings(100, 100, torch.Generator().manual_seed(0))
        target = math.sqrt(2 / 100)
        assert abs(R.std().item() - target) / target < 0.05
        assert abs(R.mean().item()) < 4 * target / math.sqrt(R.numel())


class TestLayer:
    def test_single_node(self):
        out = gcn_layer(t([[-1.0, 2.0]]), normalized_adjacency([[1]]), torch.eye(2, dtype=torch.float64), t([0.0, 0.0]))
        torch.testing.assert_close(out, t([[0.0, 2.0]]))

    def test_two_linked_nodes_average(self):
        A_norm = normalized_adjacency([[1, 1], [1, 1]])
        torch.testing.assert_close(A_norm, t([[0.5, 0.5], [0.5, 0.5]]))
        out = gcn_layer(t([[2.0, 0.0], [0.0, 2.0]]), A_norm, torch.eye(2, dtype=torch.float64), t([0.0, 0.0]))
        torch.testing.assert_close(out, t([[1.0, 1.0], [1.0, 1.0]]))

    def test_negative_bias_saturates(self):
        R = torch.randn(4, 3, dtype=torch.float64)
        out = gcn_layer(R, normalized_adjacency(np.eye(4)), torch.eye(3, dtype=torch.float64), torch.full((3,), -1e6, dtype=torch.float64))
        assert torch.count_nonzero(out) == 0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gcn_layer(torch.zeros(3, 2, dtype=torch.float64), normalized_adjacency(np.eye(4)),
                      torch.eye(2, dtype=torch.float64), torch.zeros(2, dtype=torch.float64))

    def test_dropout_only_in_training(self):
        R = torch.rand(6, 5, dtype=torch.float64) + 0.5
        A = normalized_adjacency(np.eye(6))
        W, b = torch.eye(5, dtype=torch.float64), torch.zeros(5, dtype=torch.float64)
        torch.testing.assert_close(gcn_layer(R, A, W, b, 0.5, training=False), R)
        torch.manual_seed(0)
        assert (gcn_layer(R, A, W, b, 0.5, training=True) == 0).any()


class TestEncoder:
    def test_zero_layers(self):
        enc = LabelGraphEncoder(SenseHierarchy.tree((2, 4)), dim=5, n_layers=0)
        torch.testing.assert_close(enc(), enc.embeddings)

    def test_shape_and_nonnegative(self):
        enc = LabelGraphEncoder(SenseHierarchy.tree((4, 8, 16)), dim=12).eval()
        out = enc()
        assert out.shape == (28, 12)
        assert (out >= 0).all()

    def test_two_layer_stack_matches_dense_chain(self):
        h = SenseHierarchy.tree((2, 3, 4))
        enc = LabelGraphEncoder(h, dim=6, n_layers=2, generator=torch.Generator().manual_seed(1)).eval()
        A = adjacency(h)
        R = enc.embeddings.detach().numpy()
        for W, b in zip(enc.weights, enc.biases):
            R = gcn_oracle(R, A, W.detach().numpy(), b.detach().numpy())
        np.testing.assert_allclose(enc().detach().numpy(), R, rtol=0, atol=1e-12)


def test_permutation_equivariance():
    rng = np.random.default_rng(0)
    h = SenseHierarchy.tree((2, 3, 4))
    A = adjacency(h)
    n = len(A)
    perm = rng.permutation(n)
    P = np.eye(n)[perm]
    R = torch.from_numpy(rng.normal(size=(n, 5)))
    W = torch.from_numpy(rng.normal(size=(5, 5)))
    b = torch.from_numpy(rng.normal(size=5))
    out = gcn_layer(R, normalized_adjacency(A), W, b)
    out_p = gcn_layer(torch.from_numpy(P) @ R, normalized_adjacency(P @ A @ P.T), W, b)
    torch.testing.assert_close(out_p, torch.from_numpy(P) @ out)


def test_gradient_four_node_graph():
    # 4-node toy: one root, two children, one grandchild
    h = SenseHierarchy([["r"], ["a", "b"], ["c"]], [["r", "a"], ["r", "b"], ["a", "c"]])
    enc = LabelGraphEncoder(h, dim=5, n_layers=2, generator=torch.Generator().manual_seed(2)).eval()
    with torch.no_grad():
        for b in enc.biases:
            b.fill_(0.3)  # keep pre-activations away from the ReLU kink
    w = torch.randn(4, 5, dtype=torch.float64)

    def probe():
        return (enc() * w).sum()

    assert finite_difference_check(probe, list(enc.parameters())) < 1e-4
