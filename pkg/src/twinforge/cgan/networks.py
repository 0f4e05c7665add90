"""Conditional generator and discriminator built from :mod:`twinforge.tensor` layers."""

from __future__ import annotations

import numpy as np

from ..tensor import (
    BatchNorm,
    Concat,
    Conv1d,
    EmbedReshape,
    LeakyReLU,
    ProjectReshape,
    ReLU,
    TConv1d,
    param_count,
)
from .architecture import ArchitectureError, Preset

_TYPE_NAMES = {
    "input": "Image Input",
    "project_reshape": "Project and Reshape",
    "embed_reshape": "Reshape Layer",
    "concat": "Concatenation",
    "tconv1d": "Transposed Convolution",
    "conv1d": "Convolution",
    "batchnorm": "Batch Normalization",
    "relu": "ReLU",
    "leaky_relu": "Leaky ReLU",
}


class _Net:
    layers: list

    def init(self, rng, dtype=np.float32):
        for layer in self.layers:
            layer.init(rng, dtype)

    @property
    def n_learnables(self) -> int:
        return param_count(self.layers)

    def parameters(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.grads.items()}

    def buffers(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.state.items()}

    def load(self, arrays: dict[str, np.ndarray]) -> None:
        for l in self.layers:
            for store in (l.params, l.state):
                for k in store:
                    key = f"{l.name}.{k}"
                    if key not in arrays:
                        raise KeyError(f"missing array {key}")
                    if arrays[key].shape != store[k].shape:
                        raise ValueError(f"{key}: shape {arrays[key].shape} != {store[k].shape}")
                    store[k] = arrays[key].copy()

    def table(self) -> list[dict]:
        """Rows of (name, type, activation shape, learnables) in layer order."""
        return [
            {"name": name, "type": _TYPE_NAMES[kind], "S": S, "C": C, "learnables": n}
            for name, kind, S, C, n in self._rows()
        ]


class Generator(_Net):
    """latent ∥ label -> project/embed -> concat -> 4 x (tconv, bn, relu) -> tconv."""

    def __init__(self, preset: Preset, latent_dim: int = 100, num_classes: int = 2):
        self.preset = preset
        self.latent_dim = latent_dim
        self.num_classes = num_classes
        P = preset
        L0 = P.g_lengths[0]
        self.proj = ProjectReshape("proj", latent_dim, L0, P.proj_channels)
        self.emb = EmbedReshape("emb", num_classes, P.embed_dim, L0)
        self.cat = Concat("cat")
        self.trunk = []
        c_in = P.proj_channels + 1
        widths = list(P.g_channels) + [1]
        for i, (f, s, crop, c_out) in enumerate(zip(P.g_filters, P.g_strides, P.g_croppings, widths), start=1):
            self.trunk.append(TConv1d(f"tconv{i}", c_in, c_out, f, s, crop))
            if i < len(widths):
                self.trunk += [BatchNorm(f"bn{i}", c_out), ReLU(f"relu{i}")]
            c_in = c_out
        self.layers = [self.proj, self.emb, self.cat, *self.trunk]
        self._check()

    def _check(self):
        shape = self.cat.output_shape([self.proj.output_shape((1, self.latent_dim)), self.emb.output_shape()])
        for layer in self.trunk:
            shape = layer.output_shape(shape)
        if shape != (self.preset.signal_length, 1):
            raise ArchitectureError(f"generator closes at {shape}, expected ({self.preset.signal_length}, 1)")

    def _rows(self):
        P = self.preset
        L0 = P.g_lengths[0]
        yield "in", "input", 1, self.latent_dim, 0
        yield "proj", "project_reshape", L0, P.proj_channels, self.proj.n_learnables
        yield "labels", "input", 1, 1, 0
        yield "emb", "embed_reshape", L0, 1, self.emb.n_learnables
        yield "cat", "concat", L0, P.proj_channels + 1, 0
        shape = (L0, P.proj_channels + 1)
        for layer in self.trunk:
            shape = layer.output_shape(shape)
            yield layer.name, layer.kind, shape[0], shape[1], layer.n_learnables

    def forward(self, z, labels, train=True):
        if z.ndim == 2:
            z = z[:, None, :]
        h = self.cat.forward([self.proj.forward(z, train), self.emb.forward(labels, train)], train)
        for layer in self.trunk:
            h = layer.forward(h, train)
        return h

    def backward(self, grad):
        for layer in reversed(self.trunk):
            grad = layer.backward(grad)
        g_proj, g_emb = self.cat.backward(grad)
        self.proj.backward(g_proj)
        self.emb.backward(g_emb)


class Discriminator(_Net):
    """signal ∥ embedded label -> concat -> 4 x (conv, leaky relu) -> conv -> logit."""

    def __init__(self, preset: Preset, num_classes: int = 2, leaky_slope: float = 0.2):
        self.preset = preset
        self.num_classes = num_classes
        P = preset
        self.emb = EmbedReshape("emb", num_classes, P.embed_dim, P.signal_length)
        self.cat = Concat("cat")
        self.trunk = []
        c_in = 2
        widths = list(P.d_channels) + [1]
        for i, (f, s, p, c_out) in enumerate(zip(P.d_filters, P.d_strides, P.d_paddings, widths), start=1):
            self.trunk.append(Conv1d(f"conv{i}", c_in, c_out, f, s, p))
            if i < len(widths):
                self.trunk.append(LeakyReLU(f"lrelu{i}", leaky_slope))
            c_in = c_out
        self.layers = [self.emb, self.cat, *self.trunk]
        shape = (P.signal_length, 2)
        for layer in self.trunk:
            shape = layer.output_shape(shape)
        if shape != (1, 1):
            raise ArchitectureError(f"discriminator closes at {shape}, expected a single logit")

    def _rows(self):
        P = self.preset
        yield "in", "input", P.signal_length, 1, 0
        yield "labels", "input", 1, 1, 0
        yield "emb", "embed_reshape", P.signal_length, 1, self.emb.n_learnables
        yield "cat", "concat", P.signal_length, 2, 0
        shape = (P.signal_length, 2)
        for layer in self.trunk:
            shape = layer.output_shape(shape)
            yield layer.name, layer.kind, shape[0], shape[1], layer.n_learnables

    def forward(self, x, labels, train=True):
        """Raw logits of shape ``(B,)`` for signals ``x`` of shape ``(B, L, 1)``."""
        h = self.cat.forward([x, self.emb.forward(labels, train)], train)
        for layer in self.trunk:
            h = layer.forward(h, train)
        return h[:, 0, 0]

    def backward(self, grad_logits, param_grads=True):
        """Backpropagate logit gradients; returns the gradient w.r.t. the signal input."""
        grad = grad_logits[:, None, None]
        for layer in reversed(self.trunk):
            grad = layer.backward(grad, param_grads)
        g_x, g_emb = self.cat.backward(grad)
        if param_grads:
            self.emb.backward(g_emb)
        else:
            self.emb._cache = None
        return g_x
