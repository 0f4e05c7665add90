import numpy as np
import pytest

from gradcheck import check_layer, numeric_grad, rel_err
from layer_cases import make_case
from twinforge.tensor import (
    KINDS,
    AdamState,
    BackwardError,
    BatchNorm,
    Conv1d,
    CorruptCheckpoint,
    LeakyReLU,
    NonFiniteGradient,
    ShapeError,
    TConv1d,
    adam_step,
    load_checkpoint,
    save_checkpoint,
    sigmoid,
)


@pytest.mark.parametrize("kind", KINDS)
def test_gradients_match_finite_differences(kind):
    rng = np.random.default_rng(1000 + KINDS.index(kind))
    for _ in range(20):
        layer, x = make_case(kind, rng)
        assert check_layer(layer, x, rng) < 1e-4, layer


def test_leaky_relu_scalar_gradient():
    layer = LeakyReLU("l", slope=0.2)
    layer.forward(np.array([[[-1.0]]]))
    assert layer.backward(np.array([[[1.0]]]))[0, 0, 0] == pytest.approx(0.2)


def test_tiny_conv_gradient():
    rng = np.random.default_rng(0)
    layer = Conv1d("c", 1, 1, 3)
    layer.init(rng, dtype=np.float64)
    x = rng.standard_normal((1, 5, 1))
    assert check_layer(layer, x, rng) < 1e-4


def test_batchnorm_b4_c2_gradient():
    rng = np.random.default_rng(1)
    layer = BatchNorm("n", 2)
    layer.init(rng, dtype=np.float64)
    x = rng.standard_normal((4, 3, 2))
    assert check_layer(layer, x, rng) < 1e-4


def test_batchnorm_train_statistics():
    rng = np.random.default_rng(2)
    layer = BatchNorm("n", 3)
    layer.init(rng, dtype=np.float64)
    y = layer.forward(rng.normal(5, 3, size=(8, 11, 3)))
    assert np.all(np.abs(y.mean(axis=(0, 1))) < 1e-7)
    assert np.allclose(y.var(axis=(0, 1)), 1, atol=1e-5)


def test_batchnorm_needs_two_samples():
    layer = BatchNorm("n", 1)
    layer.init(np.random.default_rng(0))
    with pytest.raises(ShapeError):
        layer.forward(np.zeros((1, 1, 4)))


def test_backward_before_forward():
    layer = LeakyReLU("l")
    with pytest.raises(BackwardError):
        layer.backward(np.ones((1, 1, 1)))


@pytest.mark.parametrize(
    "S, f, s, p, expected",
    [(1201, 17, 2, 1, 594), (594, 16, 4, 1, 146), (146, 16, 4, 1, 34), (34, 8, 4, 1, 8), (8, 8, 1, 0, 1)],
)
def test_conv_output_length(S, f, s, p, expected):
    assert Conv1d("c", 1, 1, f, s, p).output_shape((S, 1)) == (expected, 1)


@pytest.mark.parametrize(
    "S, f, s, crop, expected",
    [(4, 5, 2, (1, 2), 8), (8, 10, 4, (1, 1), 36), (36, 12, 4, (1, 1), 150), (150, 5, 4, (1, 1), 599),
     (599, 7, 2, (1, 1), 1201)],
)
def test_tconv_output_length(S, f, s, crop, expected):
    assert TConv1d("t", 1, 1, f, s, crop).output_shape((S, 1)) == (expected, 1)


def test_tconv_crop_too_large():
    with pytest.raises(ShapeError):
        TConv1d("t", 1, 1, 3, 1, (2, 1)).output_shape((1, 1))


def test_conv_channel_mismatch():
    with pytest.raises(ShapeError):
        Conv1d("c", 2, 1, 3).output_shape((10, 3))


def test_tconv_is_adjoint_of_conv():
    # <conv(x), y> == <x, tconv(y)> for shared weights, no padding/cropping
    rng = np.random.default_rng(3)
    conv = Conv1d("c", 3, 2, 4, stride=2)
    conv.init(rng, dtype=np.float64)
    tconv = TConv1d("t", 2, 3, 4, stride=2)
    tconv.init(rng, dtype=np.float64)
    W = conv.params["W"].reshape(4, 3, 2)  # (f, ci, co)
    tconv.params["W"] = W.transpose(2, 0, 1).reshape(2, 4 * 3)  # (co, f * ci)
    conv.params["b"][:] = 0
    tconv.params["b"][:] = 0
    x = rng.standard_normal((2, 10, 3))
    y = rng.standard_normal((2, 4, 2))
    assert np.sum(conv.forward(x, train=False) * y) == pytest.approx(np.sum(x * tconv.forward(y, train=False)))


def test_sigmoid_extremes_are_finite():
    out = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    assert np.all(np.isfinite(out))
    assert out.tolist() == [0.0, 0.5, 1.0]


# --- Adam -----------------------------------------------------------------


def test_adam_first_step_magnitude_is_lr():
    st = AdamState(lr=0.01, epsilon=0.0)
    p = {"w": np.array([1.0, -2.0, 3.0])}
    adam_step(st, p, {"w": np.array([0.3, -7.0, 1e-4])})
    assert np.allclose(p["w"], [0.99, -1.99, 2.99], atol=1e-12)


def test_adam_zero_gradient_is_identity():
    st = AdamState()
    p = {"w": np.array([1.0, 2.0])}
    adam_step(st, p, {"w": np.zeros(2)})
    assert p["w"].tolist() == [1.0, 2.0]


def test_adam_two_steps_match_recurrence():
    lr, b1, b2, eps = 0.0005, 0.5, 0.999, 1e-8
    # hand-rolled recurrence oracle
    theta, m, v = 0.0, 0.0, 0.0
    for t, g in enumerate([1.0, 1.0], start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        theta -= lr * (m / (1 - b1**t)) / ((v / (1 - b2**t)) ** 0.5 + eps)
    st = AdamState(lr=lr, beta1=b1, beta2=b2, epsilon=eps)
    p = {"w": np.array([0.0])}
    for _ in range(2):
        adam_step(st, p, {"w": np.array([1.0])})
    assert st.step == 2
    assert p["w"][0] == pytest.approx(theta, abs=1e-15)


def test_adam_rejects_nonfinite():
    with pytest.raises(NonFiniteGradient):
        adam_step(AdamState(), {"w": np.zeros(1)}, {"w": np.array([np.nan])})


# --- checkpoints ------------------------------------------------------------


def test_checkpoint_roundtrip_bit_exact(tmp_path):
    rng = np.random.default_rng(4)
    arrays = {"a": rng.standard_normal((3, 4)).astype(np.float32), "b": rng.standard_normal(5)}
    save_checkpoint(tmp_path / "c.twck", {"seed": 9, "step": 3}, arrays)
    header, back = load_checkpoint(tmp_path / "c.twck")
    assert header["seed"] == 9
    for k in arrays:
        assert back[k].dtype == arrays[k].dtype
        assert back[k].tobytes() == arrays[k].tobytes()


def test_checkpoint_tamper_detected(tmp_path):
    path = tmp_path / "c.twck"
    save_checkpoint(path, {}, {"a": np.arange(4.0)})
    raw = bytearray(path.read_bytes())
    raw[-1] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptCheckpoint):
        load_checkpoint(path)


def test_numeric_grad_oracle_on_quadratic():
    x = np.array([1.0, -2.0])
    assert rel_err(numeric_grad(lambda: float(np.sum(x**2)), x), 2 * x) < 1e-9
