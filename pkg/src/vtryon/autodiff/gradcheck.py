"""Finite-difference verification of every differentiable primitive.

Each case pairs a scalar-valued function with freshly drawn float64
inputs and compares reverse-mode gradients against central differences.
The registry doubles as the behavioural contract of the substrate: any
new primitive gets a case here before it is used by a model.

Relative error for one input tensor is
    max|analytic - numeric| / max(max|analytic|, max|numeric|, 1e-12)
which stays meaningful when a gradient is legitimately near zero.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import nn, ops
from .tensor import Tensor, no_grad

PRIMITIVE_TOL = 1e-4
COMPOSITE_TOL = 1e-3
STEP = 1e-3


def rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    num = float(np.max(np.abs(analytic - numeric))) if analytic.size else 0.0
    den = max(float(np.max(np.abs(analytic), initial=0.0)),
              float(np.max(np.abs(numeric), initial=0.0)), 1e-12)
    return num / den


def fd_gradients(fn, inputs, h: float = STEP):
    """Central-difference gradients of a scalar function, elementwise."""
    grads = []
    with no_grad():
        for x in inputs:
            flat = x.data.ravel()
            g = np.zeros_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = float(fn(*inputs).data)
                flat[i] = orig - h
                fm = float(fn(*inputs).data)
                flat[i] = orig
                g[i] = (fp - fm) / (2.0 * h)
            grads.append(g.reshape(x.data.shape))
    return grads


def check_gradients(fn, inputs, h: float = STEP) -> float:
    """Largest per-tensor relative error between reverse-mode and
    finite-difference gradients.  Inputs must be float64 leaves."""
    for x in inputs:
        if x.dtype != np.float64:
            raise TypeError("gradient checks run in float64 only")
        x.requires_grad = True
        x.grad = None
    out = fn(*inputs)
    if out.size != 1:
        raise ValueError("check target must be scalar")
    out.backward()
    analytic = [x.grad if x.grad is not None else np.zeros_like(x.data)
                for x in inputs]
    numeric = fd_gradients(fn, inputs, h)
    return max(rel_error(a, n) for a, n in zip(analytic, numeric))


# -- case registry -----------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    kind: str
    max_rel_err: float
    tol: float
    seconds: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def _t(rng, *shape, lo=-1.0, hi=1.0):
    return Tensor(rng.uniform(lo, hi, shape), dtype=np.float64)


def _t_offzero(rng, *shape, margin=0.2, span=1.3):
    """Values in +-[margin, margin+span]: keeps kinked ops (abs, relu,
    clamp edges) a safe distance from their non-smooth points."""
    mag = rng.uniform(margin, margin + span, shape)
    sgn = np.where(rng.uniform(size=shape) < 0.5, -1.0, 1.0)
    return Tensor(mag * sgn, dtype=np.float64)


def _integer_free_flow(rng, b, h, w, reach=2):
    """Flow whose sample positions stay >=0.1 px from integer grid
    lines, so finite differences never straddle a bilinear corner."""
    base = rng.integers(-reach, reach, size=(b, 2, h, w)).astype(np.float64)
    frac = rng.uniform(0.1, 0.9, size=(b, 2, h, w))
    return Tensor(base + frac, dtype=np.float64)


def _sumsq(x):
    # Quadratic readout keeps the scalar sensitive to every element.
    return ops.sum(ops.mul(x, x))


def _cases():
    c = {}

    def case(name, kind="primitive"):
        def deco(fn):
            c[name] = (fn, kind)
            return fn
        return deco

    @case("add_broadcast")
    def _(rng):
        return (lambda a, b: _sumsq(a + b), [_t(rng, 3, 4, 5), _t(rng, 4, 1)])

    @case("sub")
    def _(rng):
        return (lambda a, b: _sumsq(a - b), [_t(rng, 2, 6), _t(rng, 2, 6)])

    @case("mul_broadcast")
    def _(rng):
        return (lambda a, b: _sumsq(a * b), [_t(rng, 2, 3, 4), _t(rng, 3, 1)])

    @case("div")
    def _(rng):
        return (lambda a, b: _sumsq(a / b),
                [_t(rng, 3, 5), _t_offzero(rng, 3, 5, margin=0.5)])

    @case("pow")
    def _(rng):
        return (lambda a: ops.sum(ops.pow(a, 3.0)), [_t(rng, 4, 4)])

    @case("sqrt")
    def _(rng):
        return (lambda a: ops.sum(ops.sqrt(a)), [_t(rng, 3, 4, lo=0.3, hi=2.0)])

    @case("exp")
    def _(rng):
        return (lambda a: _sumsq(ops.exp(a)), [_t(rng, 3, 4)])

    @case("log")
    def _(rng):
        return (lambda a: _sumsq(ops.log(a)), [_t(rng, 3, 4, lo=0.4, hi=2.5)])

    @case("abs")
    def _(rng):
        return (lambda a: ops.sum(ops.abs(a)), [_t_offzero(rng, 4, 5)])

    @case("clamp")
    def _(rng):
        x = Tensor(rng.uniform(-2.0, 2.0, (5, 5)), dtype=np.float64)
        # Push every element at least 0.05 from the clamp edges at +-1.
        d = np.minimum(np.abs(x.data - 1.0), np.abs(x.data + 1.0))
        x.data += np.where(d < 0.05, 0.1 * np.sign(x.data - np.round(x.data)), 0.0)
        return (lambda a: _sumsq(ops.clamp(a, -1.0, 1.0)), [x])

    @case("neg")
    def _(rng):
        return (lambda a: _sumsq(-a), [_t(rng, 2, 7)])

    @case("relu")
    def _(rng):
        return (lambda a: _sumsq(ops.relu(a)), [_t_offzero(rng, 4, 6)])

    @case("sigmoid")
    def _(rng):
        return (lambda a: _sumsq(ops.sigmoid(a)), [_t(rng, 3, 5, lo=-3, hi=3)])

    @case("silu")
    def _(rng):
        return (lambda a: _sumsq(ops.silu(a)), [_t(rng, 3, 5, lo=-3, hi=3)])

    @case("sin")
    def _(rng):
        return (lambda a: _sumsq(ops.sin(a)), [_t(rng, 3, 4, lo=-3, hi=3)])

    @case("cos")
    def _(rng):
        return (lambda a: _sumsq(ops.cos(a)), [_t(rng, 3, 4, lo=-3, hi=3)])

    @case("sum_axis")
    def _(rng):
        return (lambda a: _sumsq(ops.sum(a, axis=1)), [_t(rng, 3, 4, 2)])

    @case("mean_axis")
    def _(rng):
        return (lambda a: _sumsq(ops.mean(a, axis=(0, 2))), [_t(rng, 3, 4, 2)])

    @case("reshape_transpose")
    def _(rng):
        return (lambda a: _sumsq(ops.transpose(a.reshape((4, 6)), (1, 0))),
                [_t(rng, 2, 3, 4)])

    @case("slice")
    def _(rng):
        return (lambda a: _sumsq(a[:, 1:3, ::2]), [_t(rng, 2, 4, 6)])

    @case("concat")
    def _(rng):
        return (lambda a, b: _sumsq(ops.concat([a, b], axis=1)),
                [_t(rng, 2, 3, 4), _t(rng, 2, 2, 4)])

    @case("matmul_2d")
    def _(rng):
        return (lambda a, b: _sumsq(ops.matmul(a, b)),
                [_t(rng, 4, 6), _t(rng, 6, 3)])

    @case("matmul_batched")
    def _(rng):
        return (lambda a, b: _sumsq(ops.matmul(a, b)),
                [_t(rng, 2, 3, 5), _t(rng, 2, 5, 4)])

    @case("softmax")
    def _(rng):
        return (lambda a: _sumsq(ops.softmax(a, axis=-1)), [_t(rng, 3, 7, lo=-2, hi=2)])

    @case("conv2d")
    def _(rng):
        return (lambda x, w, b: _sumsq(ops.conv2d(x, w, b, stride=1, padding=1)),
                [_t(rng, 2, 3, 5, 4), _t(rng, 4, 3, 3, 3), _t(rng, 4)])

    @case("conv2d_strided")
    def _(rng):
        return (lambda x, w: _sumsq(ops.conv2d(x, w, stride=2, padding=1)),
                [_t(rng, 2, 2, 6, 5), _t(rng, 3, 2, 3, 3)])

    @case("avg_pool")
    def _(rng):
        # Odd extent exercises the floor-cropped remainder rows.
        return (lambda x: _sumsq(ops.avg_pool2d(x, 2)), [_t(rng, 2, 3, 5, 6)])

    @case("adaptive_avg_pool")
    def _(rng):
        return (lambda x: _sumsq(ops.adaptive_avg_pool2d(x, (2, 3))),
                [_t(rng, 2, 2, 5, 7)])

    @case("upsample_nearest")
    def _(rng):
        return (lambda x: _sumsq(ops.upsample_nearest2d(x, 2)), [_t(rng, 2, 3, 3, 4)])

    @case("resize_bilinear_up")
    def _(rng):
        return (lambda x: _sumsq(ops.resize_bilinear(x, (6, 8))), [_t(rng, 2, 2, 3, 4)])

    @case("resize_bilinear_down")
    def _(rng):
        return (lambda x: _sumsq(ops.resize_bilinear(x, (3, 4))), [_t(rng, 2, 2, 5, 7)])

    @case("grid_sample_image_grad")
    def _(rng):
        img = _t(rng, 2, 3, 5, 6)
        flow = _integer_free_flow(rng, 2, 5, 6)
        flow.requires_grad = False
        return (lambda i: _sumsq(ops.grid_sample_bilinear(i, flow)), [img])

    @case("grid_sample_flow_grad")
    def _(rng):
        img = _t(rng, 2, 3, 5, 6)
        img.requires_grad = False
        return (lambda f: _sumsq(ops.grid_sample_bilinear(img, f)),
                [_integer_free_flow(rng, 2, 5, 6)])

    @case("grid_sample_joint")
    def _(rng):
        return (lambda i, f: _sumsq(ops.grid_sample_bilinear(i, f)),
                [_t(rng, 1, 2, 5, 5), _integer_free_flow(rng, 1, 5, 5)])

    @case("local_correlation")
    def _(rng):
        return (lambda a, b: _sumsq(ops.local_correlation(a, b, 1)),
                [_t(rng, 2, 3, 4, 5), _t(rng, 2, 3, 4, 5)])

    @case("group_norm")
    def _(rng):
        return (lambda x, g, b: _sumsq(ops.group_norm(x, 2, g, b)),
                [_t(rng, 2, 4, 3, 3), _t(rng, 4, lo=0.5, hi=1.5), _t(rng, 4)])

    @case("timestep_embedding")
    def _(rng):
        # A plain sum of squares would be constant (sin^2 + cos^2), so
        # read the embedding out through a fixed random projection.
        readout = Tensor(rng.standard_normal((3, 8)), dtype=np.float64)
        return (lambda t: ops.sum(nn.timestep_embedding(t, 8) * readout),
                [_t(rng, 3, lo=1.0, hi=50.0)])

    @case("cross_attention", kind="composite")
    def _(rng):
        return (lambda q, k, v: _sumsq(ops.cross_attention(q, k, v)),
                [_t(rng, 2, 3, 4), _t(rng, 2, 5, 4), _t(rng, 2, 5, 4)])

    @case("conv_norm_act_pool_stack", kind="composite")
    def _(rng):
        def f(x, w1, g1, b1, w2):
            h = ops.conv2d(x, w1, None, stride=1, padding=1)
            h = ops.group_norm(h, 2, g1, b1)
            h = ops.silu(h)
            h = ops.avg_pool2d(h, 2)
            h = ops.conv2d(h, w2, None, stride=1, padding=0)
            return _sumsq(h)
        return (f, [_t(rng, 1, 2, 6, 6), _t(rng, 4, 2, 3, 3),
                    _t(rng, 4, lo=0.5, hi=1.5), _t(rng, 4), _t(rng, 3, 4, 1, 1)])

    @case("warp_cost_volume", kind="composite")
    def _(rng):
        def f(a, b, flow):
            cost = ops.local_correlation(a, b, 1)
            warped = ops.grid_sample_bilinear(cost, flow)
            diff = warped - 0.3
            return ops.sum(ops.pow(diff * diff + 1e-3, 0.45))
        return (f, [_t(rng, 1, 3, 4, 5), _t(rng, 1, 3, 4, 5),
                    _integer_free_flow(rng, 1, 4, 5, reach=1)])

    @case("attention_over_conv_features", kind="composite")
    def _(rng):
        def f(x, w, q, kk, vv):
            h = ops.conv2d(x, w, None, stride=1, padding=1)
            b, c, hh, ww = h.shape
            seq = ops.transpose(h.reshape((b, c, hh * ww)), (0, 2, 1))
            att = ops.cross_attention(seq, ops.matmul(seq, kk),
                                      ops.matmul(seq, vv))
            return _sumsq(ops.matmul(att, q))
        return (f, [_t(rng, 1, 2, 3, 4), _t(rng, 3, 2, 3, 3),
                    _t(rng, 1, 3, 3), _t(rng, 1, 3, 3), _t(rng, 1, 3, 3)])

    return c


def run_suite(seeds=range(10), names=None):
    """Run every registered check over the given seeds.

    Returns a list of CheckResult, one per case, with the worst error
    seen across seeds."""
    registry = _cases()
    if names is not None:
        unknown = sorted(set(names) - set(registry))
        if unknown:
            raise KeyError(f"unknown gradient checks: {unknown}")
        registry = {k: v for k, v in registry.items() if k in names}
    results = []
    for name, (builder, kind) in registry.items():
        tol = PRIMITIVE_TOL if kind == "primitive" else COMPOSITE_TOL
        worst = 0.0
        t0 = time.perf_counter()
        for seed in seeds:
            fn, inputs = builder(np.random.default_rng(seed))
            worst = max(worst, check_gradients(fn, inputs))
        results.append(CheckResult(name, kind, worst, tol,
                                   time.perf_counter() - t0))
    return results
