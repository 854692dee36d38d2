"""Layers, parameter bookkeeping and optimizers on top of the tensor core.

Constructors take an explicit numpy Generator for weight draws so that
every network in the project is reproducible from a single seed chain.
"""

from __future__ import annotations

import math

import numpy as np

from . import ops
from .tensor import Tensor


class Parameter(Tensor):
    def __init__(self, data):
        super().__init__(np.asarray(data), requires_grad=True)


class Module:
    """Minimal container: attributes that are Parameters or Modules are
    auto-registered in insertion order, which fixes state_dict layout."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def parameters(self):
        for _, p in self.named_parameters():
            yield p

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def requires_grad_(self, flag: bool):
        for p in self.parameters():
            p.requires_grad = flag
        return self

    def freeze(self):
        return self.requires_grad_(False)

    def param_count(self) -> int:
        return int(np.sum([p.data.size for p in self.parameters()]))

    def state_dict(self) -> dict:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict):
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        extra = sorted(set(state) - set(own))
        if missing or extra:
            raise KeyError(f"state mismatch, missing={missing} unexpected={extra}")
        for name, p in own.items():
            arr = np.asarray(state[name], dtype=p.data.dtype)
            if arr.shape != p.data.shape:
                raise ValueError(f"{name}: shape {arr.shape} != {p.data.shape}")
            p.data = arr.copy()
        return self

    def astype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ModuleList(Module):
    def __init__(self, mods):
        super().__init__()
        self._list = []
        for i, m in enumerate(mods):
            setattr(self, str(i), m)
            self._list.append(m)

    def __iter__(self):
        return iter(self._list)

    def __len__(self):
        return len(self._list)

    def __getitem__(self, i):
        return self._list[i]


class Sequential(Module):
    def __init__(self, *mods):
        super().__init__()
        self.layers = ModuleList(mods)

    def forward(self, x):
        for m in self.layers:
            x = m(x)
        return x


class Identity(Module):
    def forward(self, x):
        return x


class SiLU(Module):
    def forward(self, x):
        return ops.silu(x)


class Linear(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator,
                 bias: bool = True, dtype=np.float32):
        super().__init__()
        std = math.sqrt(2.0 / n_in)
        self.weight = Parameter((rng.standard_normal((n_in, n_out)) * std).astype(dtype))
        self.bias = Parameter(np.zeros(n_out, dtype=dtype)) if bias else None
        self.n_in = n_in
        self.n_out = n_out

    def forward(self, x):
        lead = x.shape[:-1]
        flat = x.reshape((-1, self.n_in)) if len(lead) != 1 else x
        y = ops.matmul(flat, self.weight)
        if self.bias is not None:
            y = y + self.bias
        return y.reshape(lead + (self.n_out,)) if len(lead) != 1 else y


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, k: int, rng: np.random.Generator,
                 stride: int = 1, padding: int = 0, bias: bool = True,
                 zero_init: bool = False, dtype=np.float32):
        super().__init__()
        if zero_init:
            w = np.zeros((c_out, c_in, k, k), dtype=dtype)
        else:
            std = math.sqrt(2.0 / (c_in * k * k))
            w = (rng.standard_normal((c_out, c_in, k, k)) * std).astype(dtype)
        self.weight = Parameter(w)
        self.bias = Parameter(np.zeros(c_out, dtype=dtype)) if bias else None
        self.stride = stride
        self.padding = padding

    def forward(self, x):
        return ops.conv2d(x, self.weight, self.bias,
                          stride=self.stride, padding=self.padding)


class GroupNorm(Module):
    def __init__(self, channels: int, groups: int = 8, eps: float = 1e-5,
                 dtype=np.float32):
        super().__init__()
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))
        self.groups = groups
        self.eps = eps

    def forward(self, x):
        return ops.group_norm(x, self.groups, self.gamma, self.beta, self.eps)


def timestep_embedding(t, dim: int, max_period: float = 10000.0):
    """Sinusoidal embedding of (possibly fractional) timesteps.

    t: Tensor or array of shape (B,).  Returns (B, dim) with the sin
    half first.  Differentiable in t so the whole embedding pathway can
    be gradient-checked like any other op.
    """
    if not isinstance(t, Tensor):
        t = Tensor(np.asarray(t, dtype=np.float32))
    half = dim // 2
    freqs = np.exp(-math.log(max_period) * np.arange(half) / half).astype(t.dtype)
    args = ops.mul(t.reshape((-1, 1)), Tensor(freqs[None, :]))
    return ops.concat([ops.sin(args), ops.cos(args)], axis=1)


class Adam:
    """Adam with optional decoupled weight decay (AdamW when set)."""

    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.0, decoupled: bool = False):
        self.params = list(params)
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.decoupled = decoupled
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        bc1 = 1.0 - self.b1 ** self.t
        bc2 = 1.0 - self.b2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                continue
            g = p.grad
            if self.weight_decay and not self.decoupled:
                g = g + self.weight_decay * p.data
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            if self.weight_decay and self.decoupled:
                update = update + self.weight_decay * p.data
            p.data -= (self.lr * update).astype(p.data.dtype)

    def state_arrays(self) -> dict:
        out = {"t": np.array([self.t], dtype=np.float64)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"m.{i}"] = m
            out[f"v.{i}"] = v
        return out

    def load_state_arrays(self, state: dict):
        self.t = int(state["t"][0])
        for i in range(len(self.params)):
            self.m[i] = np.asarray(state[f"m.{i}"], dtype=self.params[i].data.dtype)
            self.v[i] = np.asarray(state[f"v.{i}"], dtype=self.params[i].data.dtype)


class AdamW(Adam):
    def __init__(self, params, lr: float, betas=(0.9, 0.999), eps: float = 1e-8,
                 weight_decay: float = 0.01):
        super().__init__(params, lr, betas=betas, eps=eps,
                         weight_decay=weight_decay, decoupled=True)
