"""Reverse-mode layers for 1-D signal networks.

Activations are channels-last ``(batch, length, channels)`` arrays, i.e. the
``S x 1 x C x B`` shapes of the architecture tables with the singleton second
spatial axis dropped and the batch axis moved to the front.  Shape queries
use ``(length, channels)``.

Every layer caches what it needs during a training-mode ``forward`` and
consumes that cache in ``backward``.  ``backward`` returns the input gradient
and stores parameter gradients in ``layer.grads``.
"""

from __future__ import annotations

import numpy as np

KINDS = (
    "project_reshape",
    "embed_reshape",
    "concat",
    "tconv1d",
    "conv1d",
    "batchnorm",
    "relu",
    "leaky_relu",
    "sigmoid",
)


def _windows(xp, f, stride, n):
    """Rows ``xp[:, t*stride : t*stride+f, :]`` flattened to ``(B*n, f*C)``.

    Consecutive taps of a window are contiguous in a channels-last array, so
    each window is a single ``f*C`` span and a strided view suffices.
    """
    B, _, C = xp.shape
    xp = np.ascontiguousarray(xp)
    v = np.lib.stride_tricks.as_strided(
        xp, (B, n, f * C), (xp.strides[0], stride * xp.strides[1], xp.strides[2]), writeable=False
    )
    return np.ascontiguousarray(v).reshape(B * n, f * C)


def _overlap_add(cols, f, stride, length):
    """Adjoint of :func:`_windows`: sum ``(B, n, f, C)`` windows into ``(B, length, C)``.

    Taps are grouped in blocks of ``stride`` so there are only ``ceil(f/stride)``
    shifted adds, each over contiguous memory.
    """
    B, n, _, C = cols.shape
    q = -(-f // stride)
    if q * stride != f:
        padded = np.zeros((B, n, q * stride, C), dtype=cols.dtype)
        padded[:, :, :f] = cols
        cols = padded
    cols = cols.reshape(B, n, q, stride * C)
    blocks = np.zeros((B, n + q - 1, stride * C), dtype=cols.dtype)
    for j in range(q):
        blocks[:, j : j + n] += cols[:, :, j]
    out = blocks.reshape(B, (n + q - 1) * stride, C)
    if out.shape[1] >= length:
        return out[:, :length]
    tail = np.zeros((B, length, C), dtype=cols.dtype)
    tail[:, : out.shape[1]] = out
    return tail


class ShapeError(ValueError):
    pass


class BackwardError(RuntimeError):
    pass


def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    """Base class.  Subclasses set ``kind`` and fill ``params``."""

    kind = ""

    def __init__(self, name: str):
        self.name = name
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.state: dict[str, np.ndarray] = {}
        self._cache = None

    def init(self, rng: np.random.Generator, dtype=np.float32) -> None:
        pass

    def output_shape(self, in_shape: tuple[int, int]) -> tuple[int, int]:
        return in_shape

    @property
    def n_learnables(self) -> int:
        return 0

    def forward(self, x, train=True):
        raise NotImplementedError

    def backward(self, grad, param_grads=True):
        raise NotImplementedError

    def _take_cache(self):
        if self._cache is None:
            raise BackwardError(f"{self.name}: backward called before a training forward pass")
        cache, self._cache = self._cache, None
        return cache

    def hyper(self) -> dict:
        return {}

    def describe(self) -> dict:
        return {"name": self.name, "kind": self.kind, **self.hyper()}

    def __repr__(self):
        args = ", ".join(f"{k}={v}" for k, v in self.hyper().items())
        return f"{type(self).__name__}({self.name!r}, {args})"


class ProjectReshape(Layer):
    """Dense projection of a ``(B, 1, in)`` latent to ``(B, length, channels)``."""

    kind = "project_reshape"

    def __init__(self, name, in_features, length, channels):
        super().__init__(name)
        self.in_features = in_features
        self.length = length
        self.channels = channels

    @property
    def out_features(self):
        return self.length * self.channels

    @property
    def n_learnables(self):
        return self.in_features * self.out_features + self.out_features

    def hyper(self):
        return {"in_features": self.in_features, "length": self.length, "channels": self.channels}

    def init(self, rng, dtype=np.float32):
        self.params["W"] = _glorot(
            rng, (self.in_features, self.out_features), self.in_features, self.out_features, dtype
        )
        self.params["b"] = np.zeros(self.out_features, dtype=dtype)

    def output_shape(self, in_shape):
        if tuple(in_shape) != (1, self.in_features):
            raise ShapeError(f"{self.name}: expected (1, {self.in_features}), got {in_shape}")
        return (self.length, self.channels)

    def forward(self, x, train=True):
        B = x.shape[0]
        self.output_shape(x.shape[1:])
        flat = x.reshape(B, self.in_features)
        y = flat @ self.params["W"] + self.params["b"]
        if train:
            self._cache = flat
        return y.reshape(B, self.length, self.channels)

    def backward(self, grad, param_grads=True):
        flat = self._take_cache()
        B = grad.shape[0]
        g = grad.reshape(B, self.out_features)
        if param_grads:
            self.grads["W"] = flat.T @ g
            self.grads["b"] = g.sum(axis=0)
        return (g @ self.params["W"].T).reshape(B, 1, self.in_features)


class EmbedReshape(Layer):
    """Class label -> embedding row -> dense -> ``(B, length, 1)``."""

    kind = "embed_reshape"

    def __init__(self, name, num_classes, embed_dim, length):
        super().__init__(name)
        self.num_classes = num_classes
        self.embed_dim = embed_dim
        self.length = length

    @property
    def n_learnables(self):
        return self.num_classes * self.embed_dim + self.embed_dim * self.length + self.length

    def hyper(self):
        return {"num_classes": self.num_classes, "embed_dim": self.embed_dim, "length": self.length}

    def init(self, rng, dtype=np.float32):
        self.params["E"] = rng.normal(0.0, 0.01, size=(self.num_classes, self.embed_dim)).astype(dtype)
        self.params["W"] = _glorot(rng, (self.embed_dim, self.length), self.embed_dim, self.length, dtype)
        self.params["b"] = np.zeros(self.length, dtype=dtype)

    def output_shape(self, in_shape=None):
        return (self.length, 1)

    def forward(self, labels, train=True):
        labels = np.asarray(labels)
        if labels.ndim != 1:
            raise ShapeError(f"{self.name}: labels must be a 1-D integer array")
        if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
            raise ShapeError(f"{self.name}: label outside [0, {self.num_classes})")
        e = self.params["E"][labels]
        y = e @ self.params["W"] + self.params["b"]
        if train:
            self._cache = (labels, e)
        return y[:, :, None]

    def backward(self, grad, param_grads=True):
        labels, e = self._take_cache()
        g = np.ascontiguousarray(grad[:, :, 0])
        if param_grads:
            self.grads["W"] = e.T @ g
            self.grads["b"] = g.sum(axis=0)
            onehot = (labels[:, None] == np.arange(self.num_classes)).astype(g.dtype)
            self.grads["E"] = onehot.T @ (g @ self.params["W"].T)
        # integer labels carry no gradient
        return None


class Concat(Layer):
    """Channel concatenation of several inputs with equal batch and length."""

    kind = "concat"

    def output_shape(self, in_shapes):
        lengths = {s[0] for s in in_shapes}
        if len(lengths) != 1:
            raise ShapeError(f"{self.name}: cannot concatenate lengths {sorted(lengths)}")
        return (lengths.pop(), sum(s[1] for s in in_shapes))

    def forward(self, inputs, train=True):
        self.output_shape([x.shape[1:] for x in inputs])
        if train:
            self._cache = [x.shape[2] for x in inputs]
        return np.concatenate(inputs, axis=2)

    def backward(self, grad, param_grads=True):
        widths = self._take_cache()
        edges = np.cumsum(widths)[:-1]
        return np.split(grad, edges, axis=2)


class Conv1d(Layer):
    """Strided, zero-padded 1-D convolution (cross-correlation)."""

    kind = "conv1d"

    def __init__(self, name, in_channels, out_channels, filter_length, stride=1, padding=0):
        super().__init__(name)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.filter_length = filter_length
        self.stride = stride
        self.padding = padding

    @property
    def n_learnables(self):
        return self.filter_length * self.in_channels * self.out_channels + self.out_channels

    def hyper(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "filter_length": self.filter_length,
            "stride": self.stride,
            "padding": self.padding,
        }

    def init(self, rng, dtype=np.float32):
        f, ci, co = self.filter_length, self.in_channels, self.out_channels
        # rows ordered (tap, in_channel)
        self.params["W"] = _glorot(rng, (f * ci, co), ci * f, co * f, dtype)
        self.params["b"] = np.zeros(co, dtype=dtype)

    def output_shape(self, in_shape):
        S, C = in_shape
        if C != self.in_channels:
            raise ShapeError(f"{self.name}: expected {self.in_channels} channels, got {C}")
        span = S + 2 * self.padding - self.filter_length
        if span < 0:
            raise ShapeError(f"{self.name}: input length {S} shorter than filter")
        return (span // self.stride + 1, self.out_channels)

    def forward(self, x, train=True):
        B, S, C = x.shape
        S_out, _ = self.output_shape((S, C))
        p, f, s = self.padding, self.filter_length, self.stride
        if p:
            xp = np.zeros((B, S + 2 * p, C), dtype=x.dtype)
            xp[:, p : p + S] = x
        else:
            xp = x
        cols = _windows(xp, f, s, S_out)
        y = cols @ self.params["W"]
        y += self.params["b"]
        if train:
            self._cache = (cols, xp.shape, S_out)
        return y.reshape(B, S_out, self.out_channels)

    def backward(self, grad, param_grads=True):
        cols, xp_shape, S_out = self._take_cache()
        B = grad.shape[0]
        f, s, p, C = self.filter_length, self.stride, self.padding, self.in_channels
        g = grad.reshape(B * S_out, self.out_channels)
        if param_grads:
            self.grads["W"] = cols.T @ g
            self.grads["b"] = g.sum(axis=0)
        dcols = (g @ self.params["W"].T).reshape(B, S_out, f, C)
        dxp = _overlap_add(dcols, f, s, xp_shape[1])
        if p:
            dxp = dxp[:, p:-p]
        return dxp


class TConv1d(Layer):
    """1-D transposed convolution with output cropping ``(lead, trail)``."""

    kind = "tconv1d"

    def __init__(self, name, in_channels, out_channels, filter_length, stride=1, cropping=(0, 0)):
        super().__init__(name)
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.filter_length = filter_length
        self.stride = stride
        self.cropping = tuple(int(c) for c in cropping)

    @property
    def n_learnables(self):
        return self.filter_length * self.in_channels * self.out_channels + self.out_channels

    def hyper(self):
        return {
            "in_channels": self.in_channels,
            "out_channels": self.out_channels,
            "filter_length": self.filter_length,
            "stride": self.stride,
            "cropping": list(self.cropping),
        }

    def init(self, rng, dtype=np.float32):
        f, ci, co = self.filter_length, self.in_channels, self.out_channels
        # columns ordered (tap, out_channel)
        self.params["W"] = _glorot(rng, (ci, f * co), ci * f, co * f, dtype)
        self.params["b"] = np.zeros(co, dtype=dtype)

    def output_shape(self, in_shape):
        S, C = in_shape
        if C != self.in_channels:
            raise ShapeError(f"{self.name}: expected {self.in_channels} channels, got {C}")
        full = (S - 1) * self.stride + self.filter_length
        if sum(self.cropping) >= full:
            raise ShapeError(f"{self.name}: cropping {self.cropping} removes the whole output ({full})")
        return (full - sum(self.cropping), self.out_channels)

    def forward(self, x, train=True):
        B, S, C = x.shape
        S_out, _ = self.output_shape((S, C))
        f, s, co = self.filter_length, self.stride, self.out_channels
        xt = x.reshape(B * S, C)
        y = (xt @ self.params["W"]).reshape(B, S, f, co)
        full_len = (S - 1) * s + f
        full = _overlap_add(y, f, s, full_len)
        lead, _ = self.cropping
        out = full[:, lead : lead + S_out]
        out += self.params["b"]
        if train:
            self._cache = (xt, S, full_len)
        return np.ascontiguousarray(out)

    def backward(self, grad, param_grads=True):
        xt, S, full_len = self._take_cache()
        B = grad.shape[0]
        f, s, co = self.filter_length, self.stride, self.out_channels
        lead, _ = self.cropping
        gfull = np.zeros((B, full_len, co), dtype=grad.dtype)
        gfull[:, lead : lead + grad.shape[1]] = grad
        dy = _windows(gfull, f, s, S)
        if param_grads:
            self.grads["W"] = xt.T @ dy
            self.grads["b"] = grad.sum(axis=(0, 1))
        return (dy @ self.params["W"].T).reshape(B, S, self.in_channels)


class BatchNorm(Layer):
    """Per-channel normalization over batch and length."""

    kind = "batchnorm"

    def __init__(self, name, channels, eps=1e-5, momentum=0.9):
        super().__init__(name)
        self.channels = channels
        self.eps = eps
        self.momentum = momentum

    @property
    def n_learnables(self):
        return 2 * self.channels

    def hyper(self):
        return {"channels": self.channels}

    def init(self, rng, dtype=np.float32):
        self.params["scale"] = np.ones(self.channels, dtype=dtype)
        self.params["offset"] = np.zeros(self.channels, dtype=dtype)
        self.state["running_mean"] = np.zeros(self.channels, dtype=dtype)
        self.state["running_var"] = np.ones(self.channels, dtype=dtype)

    def output_shape(self, in_shape):
        if in_shape[1] != self.channels:
            raise ShapeError(f"{self.name}: expected {self.channels} channels, got {in_shape[1]}")
        return in_shape

    def forward(self, x, train=True):
        self.output_shape(x.shape[1:])
        scale = self.params["scale"]
        offset = self.params["offset"]
        if not train:
            inv = 1.0 / np.sqrt(self.state["running_var"] + self.eps)
            return (x - self.state["running_mean"]) * (inv * scale) + offset
        if x.shape[0] < 2:
            raise ShapeError(f"{self.name}: training-mode batch normalization needs batch >= 2")
        mu = x.mean(axis=(0, 1))
        xc = x - mu
        var = np.mean(xc * xc, axis=(0, 1))
        inv = (1.0 / np.sqrt(var + self.eps)).astype(x.dtype)
        xhat = xc * inv
        m = self.momentum
        self.state["running_mean"] = (m * self.state["running_mean"] + (1 - m) * mu).astype(x.dtype)
        self.state["running_var"] = (m * self.state["running_var"] + (1 - m) * var).astype(x.dtype)
        self._cache = (xhat, inv)
        return xhat * scale + offset

    def backward(self, grad, param_grads=True):
        xhat, inv = self._take_cache()
        if param_grads:
            self.grads["scale"] = (grad * xhat).sum(axis=(0, 1))
            self.grads["offset"] = grad.sum(axis=(0, 1))
        gxhat = grad * self.params["scale"]
        mean_g = gxhat.mean(axis=(0, 1))
        mean_gx = (gxhat * xhat).mean(axis=(0, 1))
        return inv * (gxhat - mean_g - xhat * mean_gx)


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, train=True):
        y = np.maximum(x, 0)
        if train:
            self._cache = x > 0
        return y

    def backward(self, grad, param_grads=True):
        return grad * self._take_cache()


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, name, slope=0.2):
        super().__init__(name)
        self.slope = slope

    def hyper(self):
        return {"slope": self.slope}

    def forward(self, x, train=True):
        # per-element derivative, reused as the forward multiplier
        d = (x > 0).astype(x.dtype)
        d *= 1 - self.slope
        d += self.slope
        if train:
            self._cache = d
        return x * d

    def backward(self, grad, param_grads=True):
        return grad * self._take_cache()


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, train=True):
        y = sigmoid(x)
        if train:
            self._cache = y
        return y

    def backward(self, grad, param_grads=True):
        y = self._take_cache()
        return grad * y * (1 - y)


def sigmoid(x):
    # split by sign so exp never overflows
    x = np.asarray(x)
    out = np.empty_like(x, dtype=np.result_type(x, np.float32))
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def param_count(layers) -> int:
    """Total learnable parameter count of a layer sequence."""
    return sum(layer.n_learnables for layer in layers)
