"""Substrate behaviour: exact op semantics, graph mechanics, optimizers.

Gradient correctness itself is covered by the finite-difference suite
(run in test_acceptance); here we pin forward semantics against
independent references and check the bookkeeping around them.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import signal

from vtryon.autodiff import Tensor, nn, no_grad, ops


def rng(seed=0):
    return np.random.default_rng(seed)


class TestGraphMechanics:
    def test_backward_accumulates_across_calls(self):
        x = Tensor(np.array([2.0, -1.0]), requires_grad=True)
        y = ops.sum(x * x)
        y.backward()
        first = x.grad.copy()
        y.backward()
        np.testing.assert_allclose(x.grad, 2 * first)

    def test_no_grad_builds_no_graph(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with no_grad():
            y = ops.sum(x * 2.0)
        assert y._parents == () and not y.requires_grad

    def test_constants_are_pruned_and_untouched(self):
        x = Tensor(np.ones(3), requires_grad=True)
        c = Tensor(np.full(3, 5.0))
        ops.sum(x * c).backward()
        assert c.grad is None
        np.testing.assert_allclose(x.grad, 5.0)

    def test_shared_subexpression_gets_both_contributions(self):
        x = Tensor(np.array([3.0]), requires_grad=True)
        h = x * 2.0
        y = ops.sum(h * h + h)
        y.backward()
        # d/dx (4x^2 + 2x) = 8x + 2
        np.testing.assert_allclose(x.grad, [26.0])

    def test_backward_is_bit_reproducible(self):
        def grad_once():
            r = rng(7)
            x = Tensor(r.standard_normal((4, 8)).astype(np.float32), requires_grad=True)
            w = Tensor(r.standard_normal((8, 8)).astype(np.float32), requires_grad=True)
            loss = ops.sum(ops.softmax(ops.matmul(x, w)) * x.reshape((4, 8)))
            loss.backward()
            return x.grad.copy(), w.grad.copy()

        gx1, gw1 = grad_once()
        gx2, gw2 = grad_once()
        assert np.array_equal(gx1, gx2) and np.array_equal(gw1, gw2)

    def test_mixed_dtype_rejected(self):
        a = Tensor(np.ones(2, dtype=np.float32))
        b = Tensor(np.ones(2, dtype=np.float64))
        with pytest.raises(TypeError):
            _ = a + b


class TestForwardSemantics:
    def test_conv2d_matches_scipy(self):
        r = rng(1)
        x = r.standard_normal((2, 3, 7, 6))
        w = r.standard_normal((4, 3, 3, 3))
        out = ops.conv2d(Tensor(x), Tensor(w), stride=1, padding=1).numpy()
        ref = np.zeros_like(out)
        for b in range(2):
            for o in range(4):
                acc = np.zeros((7, 6))
                for c in range(3):
                    acc += signal.correlate2d(x[b, c], w[o, c], mode="same")
                ref[b, o] = acc
        np.testing.assert_allclose(out, ref, rtol=1e-10, atol=1e-10)

    def test_grid_sample_zero_flow_is_identity(self):
        img = rng(2).standard_normal((2, 3, 6, 5))
        flow = np.zeros((2, 2, 6, 5))
        out = ops.grid_sample_bilinear(Tensor(img), Tensor(flow)).numpy()
        assert np.array_equal(out, img)

    def test_grid_sample_unit_shift_convention(self):
        # Horizontal flow +1 samples one pixel to the right, so a bright
        # source pixel at column c shows up at column c - 1.
        img = np.zeros((1, 1, 3, 5))
        img[0, 0, 1, 3] = 1.0
        flow = np.zeros((1, 2, 3, 5))
        flow[0, 0] = 1.0
        out = ops.grid_sample_bilinear(Tensor(img), Tensor(flow)).numpy()
        assert out[0, 0, 1, 2] == 1.0 and out[0, 0, 1, 3] == 0.0

    def test_grid_sample_zero_padding_outside(self):
        img = np.ones((1, 1, 4, 4))
        flow = np.zeros((1, 2, 4, 4))
        flow[0, 0] = 10.0
        out = ops.grid_sample_bilinear(Tensor(img), Tensor(flow)).numpy()
        assert np.array_equal(out, np.zeros_like(out))

    def test_avg_pool_floor_drops_remainder(self):
        x = np.arange(2 * 5 * 5, dtype=np.float64).reshape(1, 2, 5, 5)
        out = ops.avg_pool2d(Tensor(x), 2).numpy()
        assert out.shape == (1, 2, 2, 2)
        np.testing.assert_allclose(out[0, 0, 0, 0], np.mean(x[0, 0, :2, :2]))
        np.testing.assert_allclose(out[0, 1, 1, 1], np.mean(x[0, 1, 2:4, 2:4]))

    def test_group_norm_normalizes_each_group(self):
        x = rng(3).standard_normal((2, 8, 4, 4))
        g = Tensor(np.ones(8))
        b = Tensor(np.zeros(8))
        out = ops.group_norm(Tensor(x), 4, g, b).numpy()
        per_group = out.reshape(2, 4, 2 * 4 * 4)
        np.testing.assert_allclose(per_group.mean(axis=2), 0.0, atol=1e-10)
        np.testing.assert_allclose(per_group.var(axis=2), 1.0, atol=1e-4)

    def test_softmax_rows_are_distributions(self):
        x = rng(4).standard_normal((6, 9)) * 5
        out = ops.softmax(Tensor(x), axis=1).numpy()
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
        assert (out > 0).all()

    def test_local_correlation_center_channel_is_dot(self):
        r = rng(5)
        a = r.standard_normal((1, 4, 3, 3))
        b = r.standard_normal((1, 4, 3, 3))
        out = ops.local_correlation(Tensor(a), Tensor(b), 1).numpy()
        center = (3 * 3) // 2
        np.testing.assert_allclose(out[0, center], (a * b).sum(axis=1)[0], atol=1e-12)

    @given(st.integers(2, 16), st.integers(2, 16))
    @settings(max_examples=30, deadline=None)
    def test_resize_bilinear_preserves_constants(self, n_in, n_out):
        x = np.full((1, 1, n_in, n_in), 3.25)
        out = ops.resize_bilinear(Tensor(x), (n_out, n_out)).numpy()
        np.testing.assert_allclose(out, 3.25, atol=1e-12)

    def test_resize_bilinear_downsample_of_linear_ramp(self):
        # A linear function is reproduced exactly by bilinear resampling
        # away from the clamped border.
        x = np.arange(8, dtype=np.float64)[None, None, None, :].repeat(8, axis=2)
        out = ops.resize_bilinear(Tensor(x), (4, 4)).numpy()
        # Output centers sit at source coords 0.5, 2.5, 4.5, 6.5.
        np.testing.assert_allclose(out[0, 0, 0], [0.5, 2.5, 4.5, 6.5], atol=1e-12)

    def test_upsample_nearest_repeats_pixels(self):
        x = np.array([[1.0, 2.0], [3.0, 4.0]])[None, None]
        out = ops.upsample_nearest2d(Tensor(x), 2).numpy()
        np.testing.assert_allclose(out[0, 0, :2, :2], 1.0)
        np.testing.assert_allclose(out[0, 0, 2:, 2:], 4.0)

    def test_timestep_embedding_layout(self):
        emb = nn.timestep_embedding(np.array([0.0]), 8).numpy()
        # sin(0) = 0 in the first half, cos(0) = 1 in the second.
        np.testing.assert_allclose(emb[0, :4], 0.0, atol=1e-12)
        np.testing.assert_allclose(emb[0, 4:], 1.0, atol=1e-12)


class TestModulesAndOptim:
    def test_same_seed_same_weights(self):
        a = nn.Conv2d(3, 8, 3, rng(11))
        b = nn.Conv2d(3, 8, 3, rng(11))
        assert np.array_equal(a.weight.data, b.weight.data)

    def test_state_dict_roundtrip(self):
        m = nn.Sequential(nn.Conv2d(2, 4, 3, rng(0), padding=1),
                          nn.GroupNorm(4), nn.SiLU(),
                          nn.Conv2d(4, 2, 1, rng(1)))
        state = m.state_dict()
        m2 = nn.Sequential(nn.Conv2d(2, 4, 3, rng(9), padding=1),
                           nn.GroupNorm(4), nn.SiLU(),
                           nn.Conv2d(4, 2, 1, rng(8)))
        m2.load_state_dict(state)
        for (na, pa), (nb, pb) in zip(m.named_parameters(), m2.named_parameters()):
            assert na == nb and np.array_equal(pa.data, pb.data)

    def test_load_state_dict_rejects_mismatch(self):
        m = nn.Linear(3, 2, rng(0))
        with pytest.raises(KeyError):
            m.load_state_dict({"weight": np.zeros((3, 2))})

    def test_zero_init_head_outputs_zero(self):
        head = nn.Conv2d(4, 2, 3, rng(0), padding=1, zero_init=True)
        x = Tensor(rng(1).standard_normal((2, 4, 5, 5)).astype(np.float32))
        assert np.array_equal(head(x).numpy(), np.zeros((2, 2, 5, 5), np.float32))

    def test_adam_first_step_is_signed_lr(self):
        p = nn.Parameter(np.array([1.0, -2.0], dtype=np.float64))
        opt = nn.Adam([p], lr=0.1)
        p.grad = np.array([0.5, -0.25])
        opt.step()
        # With bias correction the first update is lr * g / (|g| + eps).
        np.testing.assert_allclose(p.data, [0.9, -1.9], atol=1e-6)

    def test_adamw_decay_is_decoupled(self):
        p = nn.Parameter(np.array([10.0], dtype=np.float64))
        opt = nn.AdamW([p], lr=0.1, weight_decay=0.5)
        p.grad = np.array([0.0])
        opt.step()
        # Zero gradient: the only movement is the decay term lr*wd*p.
        np.testing.assert_allclose(p.data, [10.0 - 0.1 * 0.5 * 10.0], atol=1e-12)

    def test_frozen_params_still_pass_input_grads(self):
        m = nn.Conv2d(2, 3, 3, rng(2), padding=1).freeze()
        x = Tensor(rng(3).standard_normal((1, 2, 4, 4)).astype(np.float32),
                   requires_grad=True)
        ops.sum(m(x) * m(x)).backward()
        assert x.grad is not None and m.weight.grad is None
