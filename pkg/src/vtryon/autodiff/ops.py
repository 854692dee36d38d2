"""Differentiable primitives.

Every function here builds one graph node: a forward result plus a
closure that routes the incoming gradient to the inputs.  Image-shaped
arguments follow the (B, C, H, W) layout throughout.  Flow fields carry
two channels, channel 0 is the horizontal offset in pixels (columns,
positive moves the sampling point right) and channel 1 the vertical one.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, _check_same_dtype, as_tensor


def _wants(t: Tensor) -> bool:
    return t.requires_grad or bool(t._parents)


def _pair(a, b):
    """Coerce a binary op's arguments to same-dtype tensors.  Python
    scalars adopt the tensor operand's dtype so float32 graphs stay
    float32."""
    if isinstance(a, Tensor):
        b = b if isinstance(b, Tensor) else Tensor(b, dtype=a.dtype)
    elif isinstance(b, Tensor):
        a = Tensor(a, dtype=b.dtype)
    else:
        a, b = Tensor(a), Tensor(b)
    _check_same_dtype(a.data, b.data)
    return a, b


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# -- arithmetic ---------------------------------------------------------------

def add(a, b):
    a, b = _pair(a, b)

    def bw(g):
        if _wants(a):
            a._accum(_unbroadcast(g, a.data.shape))
        if _wants(b):
            b._accum(_unbroadcast(g, b.data.shape))

    return Tensor._result(a.data + b.data, (a, b), bw)


def sub(a, b):
    a, b = _pair(a, b)

    def bw(g):
        if _wants(a):
            a._accum(_unbroadcast(g, a.data.shape))
        if _wants(b):
            b._accum(_unbroadcast(-g, b.data.shape))

    return Tensor._result(a.data - b.data, (a, b), bw)


def mul(a, b):
    a, b = _pair(a, b)

    def bw(g):
        if _wants(a):
            a._accum(_unbroadcast(g * b.data, a.data.shape))
        if _wants(b):
            b._accum(_unbroadcast(g * a.data, b.data.shape))

    return Tensor._result(a.data * b.data, (a, b), bw)


def div(a, b):
    a, b = _pair(a, b)
    inv = 1.0 / b.data

    def bw(g):
        if _wants(a):
            a._accum(_unbroadcast(g * inv, a.data.shape))
        if _wants(b):
            b._accum(_unbroadcast(-g * a.data * inv * inv, b.data.shape))

    return Tensor._result(a.data * inv, (a, b), bw)


def neg(a):
    def bw(g):
        if _wants(a):
            a._accum(-g)

    return Tensor._result(-a.data, (a,), bw)


def pow(a, p):
    """Elementwise power with a python-scalar exponent."""
    p = float(p)
    out = a.data ** p

    def bw(g):
        if _wants(a):
            a._accum(g * p * a.data ** (p - 1.0))

    return Tensor._result(out, (a,), bw)


def sqrt(a):
    out = np.sqrt(a.data)

    def bw(g):
        if _wants(a):
            a._accum(g * 0.5 / out)

    return Tensor._result(out, (a,), bw)


def exp(a):
    out = np.exp(a.data)

    def bw(g):
        if _wants(a):
            a._accum(g * out)

    return Tensor._result(out, (a,), bw)


def log(a):
    def bw(g):
        if _wants(a):
            a._accum(g / a.data)

    return Tensor._result(np.log(a.data), (a,), bw)


def abs(a):
    sign = np.sign(a.data)

    def bw(g):
        if _wants(a):
            a._accum(g * sign)

    return Tensor._result(np.abs(a.data), (a,), bw)


def sin(a):
    def bw(g):
        if _wants(a):
            a._accum(g * np.cos(a.data))

    return Tensor._result(np.sin(a.data), (a,), bw)


def cos(a):
    def bw(g):
        if _wants(a):
            a._accum(-g * np.sin(a.data))

    return Tensor._result(np.cos(a.data), (a,), bw)


def clamp(a, lo=None, hi=None):
    """Clip to [lo, hi].  Gradient passes only strictly inside the range."""
    out = np.clip(a.data, lo, hi)
    inside = np.ones_like(a.data)
    if lo is not None:
        inside = inside * (a.data > lo)
    if hi is not None:
        inside = inside * (a.data < hi)

    def bw(g):
        if _wants(a):
            a._accum(g * inside)

    return Tensor._result(out, (a,), bw)


def relu(a):
    mask = a.data > 0

    def bw(g):
        if _wants(a):
            a._accum(g * mask)

    return Tensor._result(a.data * mask, (a,), bw)


def sigmoid(a):
    out = 1.0 / (1.0 + np.exp(-a.data))

    def bw(g):
        if _wants(a):
            a._accum(g * out * (1.0 - out))

    return Tensor._result(out, (a,), bw)


def silu(a):
    s = 1.0 / (1.0 + np.exp(-a.data))
    out = a.data * s

    def bw(g):
        if _wants(a):
            a._accum(g * (s + out * (1.0 - s)))

    return Tensor._result(out, (a,), bw)


# -- reductions and shape ----------------------------------------------------

def sum(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(g):
        if not _wants(a):
            return
        if axis is None:
            a._accum(np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=True))
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        a._accum(np.broadcast_to(g, a.data.shape).astype(a.data.dtype, copy=True))

    return Tensor._result(np.asarray(out), (a,), bw)


def mean(a, axis=None, keepdims=False):
    count = a.data.size if axis is None else np.prod(
        [a.data.shape[i] for i in np.atleast_1d(axis)])
    return mul(sum(a, axis=axis, keepdims=keepdims), 1.0 / float(count))


def reshape(a, shape):
    old = a.data.shape

    def bw(g):
        if _wants(a):
            a._accum(g.reshape(old))

    return Tensor._result(a.data.reshape(shape), (a,), bw)


def transpose(a, axes=None):
    if axes is None:
        axes = tuple(reversed(range(a.data.ndim)))
    inv = np.argsort(axes)

    def bw(g):
        if _wants(a):
            a._accum(g.transpose(inv))

    return Tensor._result(a.data.transpose(axes), (a,), bw)


def slice_(a, idx):
    out = a.data[idx]
    advanced = isinstance(idx, np.ndarray) or (
        isinstance(idx, tuple) and any(isinstance(i, np.ndarray) for i in idx))

    def bw(g):
        if not _wants(a):
            return
        gx = np.zeros_like(a.data)
        if advanced:
            np.add.at(gx, idx, g)
        else:
            gx[idx] += g
        a._accum(gx)

    return Tensor._result(out.copy(), (a,), bw)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    _check_same_dtype(*[t.data for t in tensors])
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bw(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            if _wants(t):
                t._accum(piece)

    return Tensor._result(np.concatenate([t.data for t in tensors], axis=axis),
                          tuple(tensors), bw)


def matmul(a, b):
    """2D or batched 3D matrix product.  Both operands must have the
    same number of dimensions; broadcasting batch shapes is rejected to
    keep the backward rule obvious."""
    if a.data.ndim != b.data.ndim or a.data.ndim not in (2, 3):
        raise ValueError(f"matmul wants matching 2D or 3D operands, "
                         f"got {a.data.shape} @ {b.data.shape}")
    _check_same_dtype(a.data, b.data)

    def bw(g):
        if _wants(a):
            a._accum(np.matmul(g, np.swapaxes(b.data, -1, -2)))
        if _wants(b):
            b._accum(np.matmul(np.swapaxes(a.data, -1, -2), g))

    return Tensor._result(np.matmul(a.data, b.data), (a, b), bw)


def softmax(a, axis=-1):
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        if _wants(a):
            inner = (g * out).sum(axis=axis, keepdims=True)
            a._accum(out * (g - inner))

    return Tensor._result(out, (a,), bw)


# -- convolution and pooling --------------------------------------------------

def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int):
    b, c, _, _ = xp.shape
    sb, sc, sh, sw = xp.strides
    view = np.lib.stride_tricks.as_strided(
        xp, (b, c, kh, kw, ho, wo), (sb, sc, sh, sw, stride * sh, stride * sw))
    return view.reshape(b, c * kh * kw, ho * wo)


def conv2d(x, w, bias=None, stride: int = 1, padding: int = 0):
    """Cross-correlation with (Cout, Cin, kh, kw) weights."""
    _check_same_dtype(x.data, w.data)
    b, cin, h, wdt = x.data.shape
    cout, cin_w, kh, kw = w.data.shape
    if cin != cin_w:
        raise ValueError(f"conv2d channel mismatch: input {cin}, weight {cin_w}")
    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    hp, wp = xp.shape[2:]
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    w2 = w.data.reshape(cout, cin * kh * kw)
    out = np.matmul(w2, cols).reshape(b, cout, ho, wo)
    if bias is not None:
        _check_same_dtype(x.data, bias.data)
        out += bias.data.reshape(1, cout, 1, 1)
    parents = (x, w) if bias is None else (x, w, bias)

    def bw(g):
        g2 = g.reshape(b, cout, ho * wo)
        if bias is not None and _wants(bias):
            bias._accum(g2.sum(axis=(0, 2)))
        if _wants(w):
            gw = np.matmul(g2, cols.transpose(0, 2, 1)).sum(axis=0)
            w._accum(gw.reshape(w.data.shape))
        if _wants(x):
            gcols = np.matmul(w2.T, g2).reshape(b, cin, kh, kw, ho, wo)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, :, i:i + stride * ho:stride,
                        j:j + stride * wo:stride] += gcols[:, :, i, j]
            if padding:
                gxp = gxp[:, :, padding:hp - padding, padding:wp - padding]
            x._accum(gxp)

    return Tensor._result(out, parents, bw)


def avg_pool2d(x, k: int):
    """Non-overlapping k by k mean pooling.  Trailing rows or columns
    that do not fill a window are dropped (floor semantics)."""
    b, c, h, w = x.data.shape
    ho, wo = h // k, w // k
    crop = x.data[:, :, :ho * k, :wo * k]
    out = crop.reshape(b, c, ho, k, wo, k).mean(axis=(3, 5))

    def bw(g):
        if not _wants(x):
            return
        gx = np.zeros_like(x.data)
        spread = np.broadcast_to(g[:, :, :, None, :, None] / (k * k),
                                 (b, c, ho, k, wo, k))
        gx[:, :, :ho * k, :wo * k] = spread.reshape(b, c, ho * k, wo * k)
        x._accum(gx)

    return Tensor._result(out, (x,), bw)


def adaptive_avg_pool2d(x, out_hw):
    """Mean pooling onto a fixed output grid with torch-style uneven
    bins: bin i covers [floor(i*H/oh), ceil((i+1)*H/oh))."""
    oh, ow = out_hw
    b, c, h, w = x.data.shape
    ys = [(int(np.floor(i * h / oh)), int(np.ceil((i + 1) * h / oh))) for i in range(oh)]
    xs = [(int(np.floor(j * w / ow)), int(np.ceil((j + 1) * w / ow))) for j in range(ow)]
    out = np.empty((b, c, oh, ow), dtype=x.data.dtype)
    for i, (y0, y1) in enumerate(ys):
        for j, (x0, x1) in enumerate(xs):
            out[:, :, i, j] = x.data[:, :, y0:y1, x0:x1].mean(axis=(2, 3))

    def bw(g):
        if not _wants(x):
            return
        gx = np.zeros_like(x.data)
        for i, (y0, y1) in enumerate(ys):
            for j, (x0, x1) in enumerate(xs):
                n = (y1 - y0) * (x1 - x0)
                gx[:, :, y0:y1, x0:x1] += g[:, :, i:i + 1, j:j + 1] / n
        x._accum(gx)

    return Tensor._result(out, (x,), bw)


def upsample_nearest2d(x, factor: int):
    out = x.data.repeat(factor, axis=2).repeat(factor, axis=3)
    b, c, h, w = x.data.shape

    def bw(g):
        if _wants(x):
            x._accum(g.reshape(b, c, h, factor, w, factor).sum(axis=(3, 5)))

    return Tensor._result(out, (x,), bw)


def _resize_matrix(n_in: int, n_out: int, dtype) -> np.ndarray:
    """Row-stochastic 1D bilinear interpolation matrix, half-pixel
    centers (align_corners False), edges replicated."""
    a = np.zeros((n_out, n_in), dtype=dtype)
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    i0 = np.floor(src).astype(int)
    f = src - i0
    lo = np.clip(i0, 0, n_in - 1)
    hi = np.clip(i0 + 1, 0, n_in - 1)
    rows = np.arange(n_out)
    np.add.at(a, (rows, lo), 1.0 - f)
    np.add.at(a, (rows, hi), f)
    return a


def resize_bilinear(x, out_hw):
    """Bilinear resize along the two trailing axes, up or down."""
    oh, ow = out_hw
    b, c, h, w = x.data.shape
    ah = _resize_matrix(h, oh, x.data.dtype)
    aw = _resize_matrix(w, ow, x.data.dtype)
    # Separable: apply along H (tensordot) then along W.
    tmp = np.tensordot(x.data, ah, axes=([2], [1])).transpose(0, 1, 3, 2)
    out = np.tensordot(tmp, aw, axes=([3], [1]))

    def bw(g):
        if not _wants(x):
            return
        t = np.tensordot(g, aw, axes=([3], [0]))
        x._accum(np.tensordot(t, ah, axes=([2], [0])).transpose(0, 1, 3, 2))

    return Tensor._result(np.ascontiguousarray(out), (x,), bw)


# -- warping ------------------------------------------------------------------

def grid_sample_bilinear(img, flow):
    """Backward warp: out[b,c,i,j] = img sampled at
    (x, y) = (j + flow[b,0,i,j], i + flow[b,1,i,j]).

    Samples use bilinear interpolation in absolute pixel coordinates.
    Taps outside [0, W-1] x [0, H-1] contribute zero (zero padding), so
    a fully out-of-range sample returns 0.
    """
    _check_same_dtype(img.data, flow.data)
    b, c, h, w = img.data.shape
    fb, fc, fh, fw = flow.data.shape
    if (fb, fc, fh, fw) != (b, 2, h, w):
        raise ValueError(f"flow shape {flow.data.shape} does not match image {img.data.shape}")

    jj = np.arange(w, dtype=img.data.dtype)
    ii = np.arange(h, dtype=img.data.dtype)[:, None]
    xs = jj + flow.data[:, 0]
    ys = ii + flow.data[:, 1]
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0
    x0i = x0.astype(np.int64)
    y0i = y0.astype(np.int64)

    imgf = img.data.reshape(b, c, h * w)
    taps = []
    for dy, wy in ((0, 1.0), (1, 0.0)):
        for dx, wx in ((0, 1.0), (1, 0.0)):
            xt = x0i + dx
            yt = y0i + dy
            valid = ((xt >= 0) & (xt <= w - 1) & (yt >= 0) & (yt <= h - 1))
            wgt = (wy + (1 - 2 * wy) * fy) * (wx + (1 - 2 * wx) * fx) * valid
            idx = (np.clip(yt, 0, h - 1) * w + np.clip(xt, 0, w - 1))
            val = np.take_along_axis(imgf, idx.reshape(b, 1, h * w), axis=2)
            val = val.reshape(b, c, h, w)
            taps.append((idx, valid, wgt, val, dy, dx))
    out = np.zeros((b, c, h, w), dtype=img.data.dtype)
    for _, _, wgt, val, _, _ in taps:
        out += wgt[:, None] * val

    def bw(g):
        if _wants(img):
            gimg = np.zeros((b, c, h * w), dtype=img.data.dtype)
            bi = np.arange(b)[:, None, None]
            ci = np.arange(c)[None, :, None]
            for idx, _, wgt, _, _, _ in taps:
                np.add.at(gimg, (bi, ci, idx.reshape(b, 1, h * w)),
                          (g * wgt[:, None]).reshape(b, c, h * w))
            img._accum(gimg.reshape(b, c, h, w))
        if _wants(flow):
            v = {(t[4], t[5]): t[3] * t[1][:, None] for t in taps}
            dx_dir = (1 - fy)[:, None] * (v[(0, 1)] - v[(0, 0)]) \
                + fy[:, None] * (v[(1, 1)] - v[(1, 0)])
            dy_dir = (1 - fx)[:, None] * (v[(1, 0)] - v[(0, 0)]) \
                + fx[:, None] * (v[(1, 1)] - v[(0, 1)])
            gflow = np.stack([(g * dx_dir).sum(axis=1), (g * dy_dir).sum(axis=1)], axis=1)
            flow._accum(gflow)

    return Tensor._result(out, (img, flow), bw)


def local_correlation(a, b, radius: int):
    """Dot products between a[., i, j] and b[., i+dy, j+dx] for all
    displacements with |dx|, |dy| <= radius.  Output channel order is
    row-major over (dy, dx).  Out-of-range displacements read zeros."""
    _check_same_dtype(a.data, b.data)
    bs, c, h, w = a.data.shape
    if b.data.shape != a.data.shape:
        raise ValueError("correlation operands must share a shape")
    side = 2 * radius + 1
    bp = np.pad(b.data, ((0, 0), (0, 0), (radius, radius), (radius, radius)))
    shifts = []
    out = np.empty((bs, side * side, h, w), dtype=a.data.dtype)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            d = (dy + radius) * side + (dx + radius)
            sl = (slice(None), slice(None),
                  slice(dy + radius, dy + radius + h),
                  slice(dx + radius, dx + radius + w))
            shifts.append((d, sl))
            out[:, d] = (a.data * bp[sl]).sum(axis=1)

    def bw(g):
        ga = np.zeros_like(a.data) if _wants(a) else None
        gbp = np.zeros_like(bp) if _wants(b) else None
        for d, sl in shifts:
            gd = g[:, d:d + 1]
            if ga is not None:
                ga += gd * bp[sl]
            if gbp is not None:
                gbp[sl] += gd * a.data
        if ga is not None:
            a._accum(ga)
        if gbp is not None:
            b._accum(gbp[:, :, radius:radius + h, radius:radius + w])

    return Tensor._result(out, (a, b), bw)


# -- normalization ------------------------------------------------------------

def group_norm(x, groups: int, gamma, beta, eps: float = 1e-5):
    """Normalize each (group, batch) slab to zero mean and unit variance,
    then scale and shift per channel."""
    b, c, h, w = x.data.shape
    if c % groups:
        raise ValueError(f"{c} channels not divisible into {groups} groups")
    cg = c // groups
    xg = x.data.reshape(b, groups, cg * h * w)
    mu = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mu) * inv).reshape(b, c, h, w)
    out = xhat * gamma.data.reshape(1, c, 1, 1) + beta.data.reshape(1, c, 1, 1)
    n = cg * h * w

    def bw(g):
        if _wants(beta):
            beta._accum(g.sum(axis=(0, 2, 3)))
        if _wants(gamma):
            gamma._accum((g * xhat).sum(axis=(0, 2, 3)))
        if _wants(x):
            dxhat = (g * gamma.data.reshape(1, c, 1, 1)).reshape(b, groups, n)
            xh = xhat.reshape(b, groups, n)
            s1 = dxhat.sum(axis=2, keepdims=True)
            s2 = (dxhat * xh).sum(axis=2, keepdims=True)
            gx = inv / n * (n * dxhat - s1 - xh * s2)
            x._accum(gx.reshape(b, c, h, w))

    return Tensor._result(out, (x, gamma, beta), bw)


# -- attention ----------------------------------------------------------------

def cross_attention(q, k, v):
    """Scaled dot-product attention, single head.

    q: (B, T, d), k and v: (B, S, d).  Built from matmul and softmax
    nodes rather than one fused closure; the composite still gets its
    own finite-difference coverage.
    """
    d = q.data.shape[-1]
    scores = mul(matmul(q, transpose(k, (0, 2, 1))), 1.0 / np.sqrt(d))
    return matmul(softmax(scores, axis=-1), v)
