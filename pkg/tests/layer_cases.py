"""Random small layer instances (S <= 8, C <= 4, B <= 4) for gradient checks."""

import numpy as np

from twinforge.tensor import (
    BatchNorm,
    Concat,
    Conv1d,
    EmbedReshape,
    LeakyReLU,
    ProjectReshape,
    ReLU,
    Sigmoid,
    TConv1d,
)


def _x(rng, B, C, S):
    return rng.standard_normal((B, S, C))


def make_case(kind, rng):
    B = int(rng.integers(2, 5))
    C = int(rng.integers(1, 5))
    S = int(rng.integers(2, 9))
    if kind == "project_reshape":
        layer = ProjectReshape("p", in_features=C, length=S, channels=int(rng.integers(1, 5)))
        x = rng.standard_normal((B, 1, C))
    elif kind == "embed_reshape":
        k = int(rng.integers(2, 4))
        layer = EmbedReshape("e", num_classes=k, embed_dim=C, length=S)
        x = rng.integers(0, k, size=B)
    elif kind == "concat":
        layer = Concat("c")
        x = [_x(rng, B, int(rng.integers(1, 5)), S) for _ in range(int(rng.integers(2, 4)))]
    elif kind == "conv1d":
        f = int(rng.integers(1, S + 1))
        p = int(rng.integers(0, 3))
        layer = Conv1d("k", C, int(rng.integers(1, 5)), f, stride=int(rng.integers(1, 4)), padding=p)
        x = _x(rng, B, C, S)
    elif kind == "tconv1d":
        f = int(rng.integers(1, 6))
        s = int(rng.integers(1, 4))
        full = (S - 1) * s + f
        total = int(rng.integers(0, min(4, full)))
        lead = int(rng.integers(0, total + 1))
        layer = TConv1d("t", C, int(rng.integers(1, 5)), f, stride=s, cropping=(lead, total - lead))
        x = _x(rng, B, C, S)
    elif kind == "batchnorm":
        layer = BatchNorm("n", C)
        x = _x(rng, B, C, S)
    elif kind == "relu":
        layer = ReLU("r")
        x = _x(rng, B, C, S)
    elif kind == "leaky_relu":
        layer = LeakyReLU("l", slope=0.2)
        x = _x(rng, B, C, S)
    elif kind == "sigmoid":
        layer = Sigmoid("s")
        x = _x(rng, B, C, S)
    else:
        raise KeyError(kind)
    layer.init(rng, dtype=np.float64)
    for k in layer.params:
        # random scale/offset/bias exercise every term of the backward pass
        layer.params[k] = rng.standard_normal(layer.params[k].shape)
    if kind in ("relu", "leaky_relu"):
        # keep inputs away from the kink where the finite difference straddles it
        x = np.where(np.abs(x) < 1e-3, 0.5, x)
    return layer, x
