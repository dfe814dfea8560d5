"""GIN layer, attention readout, projection, and contrastive loss tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdgl import cdgin
from cdgl import diffcore as dc
from cdgl.errors import ContrastiveConfigError, ShapeError


def make_layer_params(rng, d, scale=0.5):
    return cdgin.GinLayerParams(
        eps=dc.param(0.0),
        w=dc.param(scale * rng.standard_normal((d, d))),
        mlp_w1=dc.param(scale * rng.standard_normal((d, d))),
        mlp_b1=dc.param(scale * rng.standard_normal(d)),
        mlp_w2=dc.param(scale * rng.standard_normal((d, d))),
        mlp_b2=dc.param(scale * rng.standard_normal(d)),
        w_q=dc.param(scale * rng.standard_normal((d, d))),
        w_k=dc.param(scale * rng.standard_normal((d, d))),
    )


def identity_params(d):
    eye = np.eye(d)
    return cdgin.GinLayerParams(
        eps=dc.param(0.0), w=dc.param(eye),
        mlp_w1=dc.param(eye), mlp_b1=dc.param(np.zeros(d)),
        mlp_w2=dc.param(eye), mlp_b2=dc.param(np.zeros(d)),
        w_q=dc.param(eye), w_k=dc.param(eye),
    )


class TestGinLayer:
    def test_identity_reduction_gives_adjacency(self):
        a = np.array([[0.0, 1.0], [1.0, 0.0]])
        p = identity_params(2)
        h_in = dc.const(np.eye(2))
        h_out = cdgin.gin_node_update(h_in, a, p, activation=lambda t: t)
        np.testing.assert_allclose(h_out.data, a, atol=1e-15)

    def test_epsilon_self_contribution(self):
        a = np.zeros((2, 2))
        p = identity_params(2)
        p.eps.data = np.asarray(2.5)
        h_in = dc.const(np.array([[1.0, 0.0], [0.0, 1.0]]))
        h_out = cdgin.gin_node_update(h_in, a, p, activation=lambda t: t)
        np.testing.assert_allclose(h_out.data, 2.5 * np.eye(2), atol=1e-15)

    def test_isolated_nodes_identical(self):
        rng = np.random.default_rng(0)
        d, m = 4, 5
        p = make_layer_params(rng, d)
        h_in = dc.const(rng.standard_normal((m, d)))
        h_out = cdgin.gin_node_update(h_in, np.zeros((m, m)), p)
        # eps starts at 0 and A = 0, so every node sees the zero vector
        for v in range(1, m):
            np.testing.assert_allclose(h_out.data[v], h_out.data[0], atol=1e-15)

    def test_single_node_readout_is_node_feature(self):
        rng = np.random.default_rng(1)
        d = 3
        p = make_layer_params(rng, d)
        h_in = dc.const(rng.standard_normal((1, d)))
        h_out, readout, weights = cdgin.gin_layer(h_in, np.zeros((1, 1)), p)
        np.testing.assert_allclose(readout.data, h_out.data[0], atol=1e-15)
        np.testing.assert_allclose(weights.data, [1.0], atol=1e-15)

    def test_shape_mismatch(self):
        p = identity_params(3)
        with pytest.raises(ShapeError):
            cdgin.gin_node_update(dc.const(np.zeros((2, 3))), np.zeros((3, 3)), p)


class TestAttentionReadout:
    def test_identical_features_uniform(self):
        rng = np.random.default_rng(2)
        d, m = 4, 6
        feat = rng.standard_normal(d)
        h = dc.const(np.tile(feat, (m, 1)))
        readout, weights = cdgin.attention_readout(
            h, dc.param(rng.standard_normal((d, d))),
            dc.param(rng.standard_normal((d, d))))
        np.testing.assert_allclose(weights.data, 1.0 / m, atol=1e-12)
        np.testing.assert_allclose(readout.data, feat, atol=1e-12)

    def test_zero_query_gives_node_mean(self):
        rng = np.random.default_rng(3)
        d, m = 5, 4
        h = dc.const(rng.standard_normal((m, d)))
        readout, weights = cdgin.attention_readout(
            h, dc.param(np.zeros((d, d))), dc.param(rng.standard_normal((d, d))))
        np.testing.assert_allclose(weights.data, 0.25, atol=1e-15)
        np.testing.assert_allclose(readout.data, h.data.mean(axis=0), atol=1e-12)

    def test_formula_oracle(self):
        rng = np.random.default_rng(4)
        d, m = 4, 3
        h = rng.standard_normal((m, d))
        wq = rng.standard_normal((d, d))
        wk = rng.standard_normal((d, d))
        readout, weights = cdgin.attention_readout(dc.const(h), dc.param(wq),
                                                   dc.param(wk))
        q = wq @ h.mean(axis=0)
        logits = np.array([q @ (wk @ h[v]) for v in range(m)]) / np.sqrt(d)
        e = np.exp(logits - logits.max())
        a = e / e.sum()
        np.testing.assert_allclose(weights.data, a, atol=1e-12)
        np.testing.assert_allclose(readout.data, a @ h, atol=1e-12)


class TestProject:
    def test_zero_weights(self):
        d = 4
        z = cdgin.project(dc.const(np.ones(d)), dc.param(np.zeros((d, d))),
                          dc.param(np.zeros(d)), dc.param(np.zeros((d, d))),
                          dc.param(np.zeros(d)))
        np.testing.assert_array_equal(z.data, 0.0)

    def test_near_identity_small_inputs(self):
        d = 3
        h = np.full(d, 1e-6)
        z = cdgin.project(dc.const(h), dc.param(np.eye(d)), dc.param(np.zeros(d)),
                          dc.param(np.eye(d)), dc.param(np.zeros(d)))
        np.testing.assert_allclose(z.data, h, rtol=1e-9)

    def test_dense_oracle(self):
        rng = np.random.default_rng(5)
        d, dp = 5, 4
        h = rng.standard_normal(d)
        w1, b1 = rng.standard_normal((dp, d)), rng.standard_normal(dp)
        w2, b2 = rng.standard_normal((dp, dp)), rng.standard_normal(dp)
        z = cdgin.project(dc.const(h), dc.param(w1), dc.param(b1),
                          dc.param(w2), dc.param(b2))
        expect = w2 @ np.tanh(w1 @ h + b1) + b2
        np.testing.assert_allclose(z.data, expect, atol=1e-12)


def unit(v):
    return np.asarray(v, dtype=float) / np.linalg.norm(v)


class TestContrastiveLoss:
    def test_hand_case_ln3(self):
        e1 = unit([1.0, 0.0, 0.0])
        z_r = [dc.param(e1.copy()) for _ in range(2)]
        z_d = [dc.param(e1.copy()) for _ in range(2)]
        loss = cdgin.contrastive_loss(z_r, z_d, cdgin.ContrastiveConfig(delta=1))
        assert float(loss.data) == pytest.approx(np.log(3.0), abs=1e-12)

    def test_orthogonal_negatives_lower_loss(self):
        # anchor stream r window 0: keep its positive aligned, rotate the
        # cross-stream vectors to be orthogonal to everything in stream r
        e1, e2 = unit([1.0, 0.0]), unit([0.0, 1.0])
        aligned = cdgin.contrastive_loss(
            [dc.param(e1), dc.param(e1)], [dc.param(e1), dc.param(e1)],
            cdgin.ContrastiveConfig(delta=1))
        separated = cdgin.contrastive_loss(
            [dc.param(e1), dc.param(e1)], [dc.param(e2), dc.param(e2)],
            cdgin.ContrastiveConfig(delta=1))
        assert float(separated.data) < float(aligned.data)

    def test_positivity(self):
        rng = np.random.default_rng(6)
        for n in (2, 3, 5):
            z_r = [dc.param(rng.standard_normal(4)) for _ in range(n)]
            z_d = [dc.param(rng.standard_normal(4)) for _ in range(n)]
            loss = cdgin.contrastive_loss(z_r, z_d, cdgin.ContrastiveConfig(delta=1))
            assert float(loss.data) > 0.0

    def test_stream_symmetry(self):
        rng = np.random.default_rng(7)
        n = 4
        z_r = [dc.param(rng.standard_normal(3)) for _ in range(n)]
        z_d = [dc.param(rng.standard_normal(3)) for _ in range(n)]
        cfg = cdgin.ContrastiveConfig(delta=2)
        a = cdgin.contrastive_loss(z_r, z_d, cfg)
        b = cdgin.contrastive_loss(z_d, z_r, cfg)
        assert float(a.data) == pytest.approx(float(b.data), abs=1e-12)

    def test_too_few_windows(self):
        z = [dc.param(np.ones(3))]
        with pytest.raises(ContrastiveConfigError):
            cdgin.contrastive_loss(z, z, cdgin.ContrastiveConfig(delta=1))
        z2 = [dc.param(np.ones(3)) for _ in range(2)]
        with pytest.raises(ContrastiveConfigError):
            cdgin.contrastive_loss(z2, z2, cdgin.ContrastiveConfig(delta=2))

    def test_zero_vectors_no_blowup(self):
        z_r = [dc.param(np.zeros(3)) for _ in range(2)]
        z_d = [dc.param(np.zeros(3)) for _ in range(2)]
        loss = cdgin.contrastive_loss(z_r, z_d, cdgin.ContrastiveConfig(delta=1))
        dc.backward(loss)
        assert np.isfinite(float(loss.data))
        for z in z_r + z_d:
            assert np.all(np.isfinite(z.grad))

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(8)
        n = 3
        z_r = [dc.param(rng.standard_normal(4)) for _ in range(n)]
        z_d = [dc.param(rng.standard_normal(4)) for _ in range(n)]
        cfg = cdgin.ContrastiveConfig(delta=1)

        def build():
            return cdgin.contrastive_loss(z_r, z_d, cfg)

        loss = build()
        for z in z_r + z_d:
            z.grad = None
        dc.backward(loss)
        for z in z_r + z_d:
            ad = z.grad.copy()
            fd = np.zeros_like(ad)
            for i in range(z.data.size):
                orig = z.data[i]
                z.data[i] = orig + 1e-6
                fp = float(build().data)
                z.data[i] = orig - 1e-6
                fm = float(build().data)
                z.data[i] = orig
                fd[i] = (fp - fm) / 2e-6
            denom = np.maximum(np.maximum(np.abs(ad), np.abs(fd)), 1e-8)
            assert (np.abs(ad - fd) / denom).max() < 1e-5

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2 ** 32 - 1), st.integers(2, 6), st.integers(1, 3))
    def test_invariants_random(self, seed, n, delta):
        if n < delta + 1:
            return
        rng = np.random.default_rng(seed)
        z_r = [dc.param(rng.standard_normal(3)) for _ in range(n)]
        z_d = [dc.param(rng.standard_normal(3)) for _ in range(n)]
        cfg = cdgin.ContrastiveConfig(delta=delta)
        loss = cdgin.contrastive_loss(z_r, z_d, cfg)
        swapped = cdgin.contrastive_loss(z_d, z_r, cfg)
        assert float(loss.data) > 0.0
        assert float(loss.data) == pytest.approx(float(swapped.data), abs=1e-12)

    def test_config_validation(self):
        with pytest.raises(ContrastiveConfigError):
            cdgin.ContrastiveConfig(delta=0)
        with pytest.raises(ContrastiveConfigError):
            cdgin.ContrastiveConfig(alpha=-0.1)
        with pytest.raises(ContrastiveConfigError):
            cdgin.ContrastiveConfig(temperature=0.5)
