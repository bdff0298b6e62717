"""Network building blocks: linear/MLP, fused GRU cell, Gaussian head, embedders.

Modules own their parameters as a flat dict name -> Tensor so that target
copies, polyak averaging, optimizers, and checkpoints all operate on plain
trees. Weights use uniform fan-in init; biases start at zero.
"""

from __future__ import annotations

import math

import numpy as np

from . import autodiff as ad
from .autodiff import ShapeError, Tensor

SIGMA_FLOOR = 1e-4

OBS_EMBED_DIM = 32
ACT_EMBED_DIM = 16
REW_EMBED_DIM = 16

INPUT_MODES = ("o", "oa", "or", "oar")

_ACTIVATIONS = {"tanh": ad.tanh, "relu": ad.relu}


def uniform_init(rng, d_in, d_out, scale=1.0):
    bound = scale / math.sqrt(d_in)
    return rng.uniform(-bound, bound, size=(d_in, d_out))


class Linear:
    def __init__(self, rng, d_in, d_out, prefix, scale=1.0):
        self.d_in = d_in
        self.d_out = d_out
        self.w = Tensor(uniform_init(rng, d_in, d_out, scale), requires_grad=True, name=f"{prefix}.w")
        self.b = Tensor(np.zeros(d_out), requires_grad=True, name=f"{prefix}.b")

    def __call__(self, x):
        if x.shape[-1] != self.d_in:
            raise ShapeError(f"{self.w.name}: input dim {x.shape[-1]}, expected {self.d_in}")
        return ad.matmul(x, self.w) + self.b

    def params(self):
        return {self.w.name: self.w, self.b.name: self.b}


class Mlp:
    """Affine stack: sizes[0] -> ... -> sizes[-1], activation on hidden layers."""

    def __init__(self, rng, sizes, prefix, hidden="tanh", final_scale=1.0):
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ShapeError(f"mlp sizes must be >= 2 positive ints, got {sizes}")
        if hidden not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {hidden!r}")
        self.sizes = list(sizes)
        self.act = _ACTIVATIONS[hidden]
        self.layers = []
        for i in range(len(sizes) - 1):
            scale = final_scale if i == len(sizes) - 2 else 1.0
            self.layers.append(Linear(rng, sizes[i], sizes[i + 1], f"{prefix}.l{i}", scale=scale))

    def __call__(self, x):
        for layer in self.layers[:-1]:
            x = self.act(layer(x))
        return self.layers[-1](x)

    def params(self):
        out = {}
        for layer in self.layers:
            out.update(layer.params())
        return out


class GruCell:
    """Standard GRU update with the update/reset gates fused into one matmul.

    u = sigmoid(W_u [h, x] + b_u)
    r = sigmoid(W_r [h, x] + b_r)
    c = tanh(W_c [r*h, x] + b_c)
    h' = (1 - u) * h + u * c
    """

    def __init__(self, rng, d_x, d_h, prefix):
        self.d_x = d_x
        self.d_h = d_h
        d_in = d_h + d_x
        self.w_gates = Tensor(uniform_init(rng, d_in, 2 * d_h), requires_grad=True, name=f"{prefix}.w_gates")
        self.b_gates = Tensor(np.zeros(2 * d_h), requires_grad=True, name=f"{prefix}.b_gates")
        self.w_cand = Tensor(uniform_init(rng, d_in, d_h), requires_grad=True, name=f"{prefix}.w_cand")
        self.b_cand = Tensor(np.zeros(d_h), requires_grad=True, name=f"{prefix}.b_cand")

    def __call__(self, h, x):
        if h.shape[-1] != self.d_h or x.shape[-1] != self.d_x:
            raise ShapeError(
                f"gru_cell: got h dim {h.shape[-1]}, x dim {x.shape[-1]}, expected {self.d_h}, {self.d_x}"
            )
        hx = ad.concat([h, x], axis=-1)
        gates = ad.sigmoid(ad.matmul(hx, self.w_gates) + self.b_gates)
        u = ad.cols(gates, 0, self.d_h)
        r = ad.cols(gates, self.d_h, 2 * self.d_h)
        cand = ad.tanh(ad.matmul(ad.concat([r * h, x], axis=-1), self.w_cand) + self.b_cand)
        return (1.0 - u) * h + u * cand

    def params(self):
        return {t.name: t for t in (self.w_gates, self.b_gates, self.w_cand, self.b_cand)}


class GaussianHead:
    """mu = linear(h); sigma = softplus(linear(h)) + floor, so sigma > 0."""

    def __init__(self, rng, d_in, d_out, prefix, sigma_floor=SIGMA_FLOOR):
        self.mu_lin = Linear(rng, d_in, d_out, f"{prefix}.mu")
        self.sigma_lin = Linear(rng, d_in, d_out, f"{prefix}.sigma")
        self.sigma_floor = sigma_floor

    def __call__(self, h):
        mu = self.mu_lin(h)
        sigma = ad.softplus(self.sigma_lin(h)) + self.sigma_floor
        return mu, sigma

    def params(self):
        return {**self.mu_lin.params(), **self.sigma_lin.params()}


class InputEmbedder:
    """Per-part linear+relu embeddings concatenated in fixed (o, a, r) order.

    The mode string selects which parts participate; at episode start the
    caller passes zero vectors for the missing previous action and reward.
    """

    def __init__(self, rng, obs_dim, act_dim, mode, prefix,
                 obs_embed=OBS_EMBED_DIM, act_embed=ACT_EMBED_DIM, rew_embed=REW_EMBED_DIM):
        if mode not in INPUT_MODES:
            raise ValueError(f"unknown input mode {mode!r}, expected one of {INPUT_MODES}")
        self.mode = mode
        self.obs_lin = Linear(rng, obs_dim, obs_embed, f"{prefix}.obs")
        self.act_lin = Linear(rng, act_dim, act_embed, f"{prefix}.act") if "a" in mode else None
        self.rew_lin = Linear(rng, 1, rew_embed, f"{prefix}.rew") if "r" in mode else None
        self.out_dim = obs_embed + ("a" in mode) * act_embed + ("r" in mode) * rew_embed

    def __call__(self, o, a_prev, r):
        parts = [ad.relu(self.obs_lin(o))]
        if self.act_lin is not None:
            parts.append(ad.relu(self.act_lin(a_prev)))
        if self.rew_lin is not None:
            parts.append(ad.relu(self.rew_lin(r)))
        return parts[0] if len(parts) == 1 else ad.concat(parts, axis=-1)

    def params(self):
        out = self.obs_lin.params()
        if self.act_lin is not None:
            out.update(self.act_lin.params())
        if self.rew_lin is not None:
            out.update(self.rew_lin.params())
        return out


def clone_tree(params):
    """Detached deep copy of a parameter tree (e.g. for target networks)."""
    return {k: Tensor(p.data.copy(), name=p.name) for k, p in params.items()}


def copy_into(src, dst):
    """Copy parameter values src -> dst in place; trees must match."""
    if src.keys() != dst.keys():
        raise ShapeError("parameter trees have different keys")
    for k in src:
        dst[k].data[...] = src[k].data


def load_tree(params, arrays, prefix=""):
    """Load checkpoint arrays into an existing parameter tree."""
    for k, p in params.items():
        key = prefix + k
        if key not in arrays:
            raise KeyError(f"checkpoint missing parameter {key!r}")
        arr = arrays[key]
        if tuple(arr.shape) != tuple(p.data.shape):
            raise ShapeError(f"{key}: checkpoint shape {arr.shape} != model shape {p.data.shape}")
        p.data[...] = arr
