"""LSTM wrapper and node-feature assembly tests."""

import numpy as np
import pytest

from cdgl import diffcore as dc
from cdgl import temporal_encoder as te
from cdgl.errors import ShapeError


def make_params(rng, m, d, scale=0.4):
    w_x = dc.param(scale * rng.standard_normal((m, 4 * d)))
    w_h = dc.param(scale * rng.standard_normal((d, 4 * d)))
    b = dc.param(scale * rng.standard_normal(4 * d))
    return w_x, w_h, b


def test_zero_weights_give_zero_hidden():
    x = np.random.default_rng(0).standard_normal((12, 3))
    h = te.lstm_forward(x, dc.param(np.zeros((3, 16))), dc.param(np.zeros((4, 16))),
                        dc.param(np.zeros(16)))
    np.testing.assert_array_equal(h.data, 0.0)


def test_output_shape():
    rng = np.random.default_rng(1)
    x = rng.standard_normal((40, 5))
    h = te.lstm_forward(x, *make_params(rng, 5, 8))
    assert h.data.shape == (40, 8)


def test_matches_stepwise_oracle():
    rng = np.random.default_rng(2)
    m, d, t = 4, 6, 15
    x = rng.standard_normal((t, m))
    w_x, w_h, b = make_params(rng, m, d, scale=0.8)

    def sig(z):
        return 1.0 / (1.0 + np.exp(-z))

    h = np.zeros(d)
    c = np.zeros(d)
    rows = []
    for step in range(t):
        a = x[step] @ w_x.data + h @ w_h.data + b.data
        i = sig(a[:d])
        f = sig(a[d:2 * d])
        g = np.tanh(a[2 * d:3 * d])
        o = sig(a[3 * d:])
        c = f * c + i * g
        h = o * np.tanh(c)
        rows.append(h.copy())
    out = te.lstm_forward(x, w_x, w_h, b)
    np.testing.assert_allclose(out.data, np.array(rows), atol=1e-10)


class TestAssembleNodeFeatures:
    def setup_method(self):
        self.rng = np.random.default_rng(3)

    def test_hidden_selector(self):
        m, d, t = 4, 3, 20
        hidden = dc.const(self.rng.standard_normal((t, d)))
        w_m = dc.param(np.concatenate([np.zeros((d, m)), np.eye(d)], axis=1))
        blocks = te.assemble_node_features(hidden, [0, 5], 10, w_m, m)
        for block, tau in zip(blocks, [9, 14]):
            for v in range(m):
                np.testing.assert_allclose(block.data[v], hidden.data[tau], atol=1e-15)

    def test_one_hot_selector(self):
        m, d, t = 5, 3, 12
        hidden = dc.const(self.rng.standard_normal((t, d)))
        sel = np.concatenate([np.eye(m)[:d], np.zeros((d, d))], axis=1)
        blocks = te.assemble_node_features(hidden, [0], 6, dc.param(sel), m)
        np.testing.assert_allclose(blocks[0].data, np.eye(m)[:, :d], atol=1e-15)

    def test_matches_dense_oracle(self):
        m, d, t = 3, 2, 18
        hidden = dc.const(self.rng.standard_normal((t, d)))
        w_m = dc.param(self.rng.standard_normal((d, m + d)))
        starts = [0, 4, 8]
        ws = 7
        blocks = te.assemble_node_features(hidden, starts, ws, w_m, m)
        for block, s in zip(blocks, starts):
            tau = s + ws - 1
            for v in range(m):
                vec = np.concatenate([np.eye(m)[v], hidden.data[tau]])
                np.testing.assert_allclose(block.data[v], w_m.data @ vec, atol=1e-12)

    def test_same_endpoint_same_features(self):
        m, d = 4, 5
        hidden = dc.const(self.rng.standard_normal((30, d)))
        w_m = dc.param(self.rng.standard_normal((d, m + d)))
        b1 = te.assemble_node_features(hidden, [2], 8, w_m, m)[0]
        b2 = te.assemble_node_features(hidden, [9], 1, w_m, m)[0]
        np.testing.assert_array_equal(b1.data, b2.data)

    def test_distinct_nodes_differ(self):
        m, d = 6, 4
        hidden = dc.const(np.zeros((10, d)))
        w_m_data = np.concatenate(
            [self.rng.standard_normal((d, m)), np.zeros((d, d))], axis=1)
        blocks = te.assemble_node_features(hidden, [0], 5, dc.param(w_m_data), m)
        feats = blocks[0].data
        for u in range(m):
            for v in range(u + 1, m):
                assert not np.allclose(feats[u], feats[v])

    def test_endpoint_out_of_range(self):
        hidden = dc.const(np.zeros((10, 3)))
        w_m = dc.param(np.zeros((3, 7)))
        with pytest.raises(ShapeError):
            te.assemble_node_features(hidden, [5], 8, w_m, 4)

    def test_shape_mismatch(self):
        hidden = dc.const(np.zeros((10, 3)))
        with pytest.raises(ShapeError):
            te.assemble_node_features(hidden, [0], 5, dc.param(np.zeros((3, 6))), 4)

    def test_gradient_flows_to_w_m(self):
        m, d = 3, 2
        hidden = dc.const(self.rng.standard_normal((9, d)))
        w_m = dc.param(self.rng.standard_normal((d, m + d)))
        blocks = te.assemble_node_features(hidden, [0, 3], 4, w_m, m)
        loss = dc.sum_all(dc.tanh(dc.concat(blocks, axis=0)))
        dc.backward(loss)
        assert w_m.grad is not None and np.any(w_m.grad != 0)
