import numpy as np
import pytest

from reference_tables import DISCRIMINATOR_ROWS, GENERATOR_ROWS, KNOWN_MISPRINTS
from twinforge.cgan import (
    DESK,
    PAPER,
    ArchitectureError,
    Discriminator,
    GanConfig,
    GanModel,
    Generator,
    discriminator_loss,
    generate,
    generator_loss,
    get_preset,
    iterations_per_epoch,
    scores,
    spectrum,
    train,
)
from twinforge.signalio import Segment, SegmentSet
from twinforge.tensor import AdamState, adam_step
from twinforge.tensor.checkpoint import CorruptCheckpoint


def _rows(net):
    return [(r["name"], r["S"], r["C"], r["learnables"]) for r in net.table()]


def _expected(rows, which):
    out = []
    for name, S, C, n in rows:
        S = KNOWN_MISPRINTS.get((which, name), {}).get("S", S)
        out.append((name, S, C, n))
    return out


def _toy_set(n_per_label=64, length=301, seed=0):
    rng = np.random.default_rng(seed)
    t = np.arange(length) / 100.0
    segs = []
    for label, f in ((0, 5.0), (1, 12.0)):
        for i in range(n_per_label):
            x = np.sin(2 * np.pi * f * t + rng.uniform(0, 6.3)) + 0.3 * rng.standard_normal(length)
            segs.append(Segment((x - x.mean()) / x.std(), 0, i, label, "toy"))
    return SegmentSet(segs, 100.0)


def test_full_size_generator_table():
    assert _rows(Generator(PAPER)) == _expected(GENERATOR_ROWS, "generator")
    assert Generator(PAPER).n_learnables == 4_786_525


def test_full_size_discriminator_table():
    assert _rows(Discriminator(PAPER)) == _expected(DISCRIMINATOR_ROWS, "discriminator")
    assert Discriminator(PAPER).n_learnables == 2_827_358


def test_printed_concat_length_is_inconsistent():
    # the projection and embedding both emit S=4, so their concatenation cannot be S=1
    rows = {r[0]: r for r in GENERATOR_ROWS}
    assert rows["proj"][1] == rows["emb"][1] == 4 != rows["cat"][1]


def test_table_type_names():
    types = {r["name"]: r["type"] for r in Generator(PAPER).table() + Discriminator(PAPER).table()}
    assert types["proj"] == "Project and Reshape"
    assert types["tconv3"] == "Transposed Convolution"
    assert types["lrelu2"] == "Leaky ReLU"


def test_desk_preset_closes():
    G, D = Generator(DESK), Discriminator(DESK)
    assert _rows(G)[-1][1:3] == (301, 1)
    assert _rows(D)[-1][1:3] == (1, 1)
    rng = np.random.default_rng(0)
    G.init(rng)
    D.init(rng)
    x = G.forward(rng.standard_normal((4, 1, 100)).astype(np.float32), np.array([0, 1, 0, 1]))
    assert x.shape == (4, 301, 1)
    assert D.forward(x, np.array([0, 1, 0, 1])).shape == (4,)


def test_latent_dim_one_projection():
    # 1 x 4096 weights plus 4096 biases
    row = _rows(Generator(PAPER, latent_dim=1))[1]
    assert row == ("proj", 4, 1024, 8192)


def test_unknown_preset():
    with pytest.raises(ArchitectureError):
        get_preset("huge")
    with pytest.raises(ArchitectureError):
        GanConfig(scale_preset="huge")


def test_loss_hand_values():
    assert discriminator_loss([0.0], [0.0]) == pytest.approx(2 * np.log(2))
    assert discriminator_loss([1.0], [-1.0]) == pytest.approx(2 * np.log1p(np.exp(-1)), abs=1e-12)
    assert discriminator_loss([1.0], [-1.0]) == pytest.approx(0.6265, abs=1e-4)
    assert generator_loss([-2.0]) == pytest.approx(2.1269, abs=1e-4)


def test_equilibrium_scores():
    assert scores(np.zeros(8), np.zeros(8)) == (0.5, 0.5)


def test_singleton_score_loss_identity():
    rng = np.random.default_rng(1)
    for a, b in rng.normal(0, 3, (20, 2)):
        sg, sd = scores([a], [b])
        # with one sample each, the loss is -log of the two probabilities D assigns
        p_real, p_not_fake = 2 * sd - (1 - sg), 1 - sg
        assert discriminator_loss([a], [b]) == pytest.approx(-np.log(p_real) - np.log(p_not_fake), rel=1e-9)
        assert generator_loss([b]) == pytest.approx(-np.log(sg), rel=1e-9)


def test_iteration_arithmetic():
    assert iterations_per_epoch(1575, 128) == 12
    assert 500 * iterations_per_epoch(1575, 128) == 6000


def test_config_validation():
    for bad in (dict(batch_size=3), dict(latent_dim=0), dict(num_classes=3), dict(epochs=0)):
        with pytest.raises(ValueError):
            GanConfig(**bad)


def test_training_trace_length_and_determinism():
    data = _toy_set(80)
    cfg = GanConfig.desk(epochs=2, batch_size=32, seed=5)
    m1, t1 = train(data, cfg)
    m2, t2 = train(data, cfg)
    assert len(t1) == 2 * iterations_per_epoch(160, 32) == 10
    assert t1.digest() == t2.digest()
    assert all(np.array_equal(a, b) for a, b in zip(m1.arrays().values(), m2.arrays().values()))
    _, t3 = train(data, GanConfig.desk(epochs=2, batch_size=32, seed=6))
    assert t3.digest() != t1.digest()


def test_training_input_checks():
    with pytest.raises(ValueError, match="both condition labels"):
        train(SegmentSet(_toy_set(40).segments[:40]), GanConfig.desk(batch_size=32))
    with pytest.raises(ValueError, match="length"):
        train(_toy_set(40, length=200), GanConfig.desk(batch_size=32))
    with pytest.raises(ValueError, match="each label"):
        train(_toy_set(10), GanConfig.desk(batch_size=32))


def _small_model(seed=0):
    return GanModel.build(GanConfig.desk(dtype="float64", seed=seed))


def _fixed_batch(model, B=16):
    rng = np.random.default_rng(3)
    x = _toy_set(B // 2).matrix()[:, :, None]
    y = np.repeat([0, 1], B // 2)
    z = rng.standard_normal((B, 1, model.config.latent_dim))
    return x, y, z


def test_discriminator_step_lowers_its_loss():
    model = _small_model()
    G, D = model.generator, model.discriminator
    x, y, z = _fixed_batch(model)
    B = len(y)
    fake = G.forward(z, y)

    def d_loss():
        logits = D.forward(np.concatenate([x, fake]), np.concatenate([y, y]))
        return discriminator_loss(logits[:B], logits[B:]), logits

    before, logits = d_loss()
    sig = 1 / (1 + np.exp(-logits))
    D.backward(np.concatenate([(sig[:B] - 1) / B, sig[B:] / B]))
    adam_step(AdamState(1e-6), D.parameters(), D.gradients())
    assert d_loss()[0] < before


def test_generator_step_lowers_its_loss():
    model = _small_model()
    G, D = model.generator, model.discriminator
    x, y, z = _fixed_batch(model)
    B = len(y)

    def g_loss():
        return D.forward(G.forward(z, y), y)

    logits = g_loss()
    before = generator_loss(logits)
    sig = 1 / (1 + np.exp(-logits))
    G.backward(D.backward((sig - 1) / B, param_grads=False))
    adam_step(AdamState(1e-6), G.parameters(), G.gradients())
    assert generator_loss(g_loss()) < before


def test_generate_contract():
    model = _small_model(2)
    with pytest.raises(ValueError):
        generate(model, 0, 0, seed=1)
    with pytest.raises(ValueError):
        generate(model, 2, 5, seed=1)
    a = generate(model, 1, 7, seed=1, batch=3)
    b = generate(model, 1, 7, seed=1, batch=3)
    assert len(a) == 7
    assert all(np.array_equal(s.values, t.values) for s, t in zip(a, b))
    # chunking changes only the BLAS blocking, not the draws
    c = generate(model, 1, 7, seed=1)
    assert all(np.allclose(s.values, t.values, atol=1e-10) for s, t in zip(a, c))
    assert {s.condition_label for s in a} == {1} and {s.source_tag for s in a} == {"generated"}
    assert a[0].values.shape == (301,)
    d = generate(model, 1, 7, seed=2)
    assert not np.allclose(a[0].values, d[0].values)


def test_checkpoint_round_trip(tmp_path):
    model = _small_model(4)
    model.save(tmp_path / "m.twck")
    back = GanModel.load(tmp_path / "m.twck")
    assert back.config == model.config
    g1 = generate(model, 0, 3, seed=9)
    g2 = generate(back, 0, 3, seed=9)
    assert all(np.array_equal(s.values, t.values) for s, t in zip(g1, g2))


def test_checkpoint_tamper_detected(tmp_path):
    path = tmp_path / "m.twck"
    _small_model().save(path)
    raw = bytearray(path.read_bytes())
    raw[-5] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(CorruptCheckpoint):
        GanModel.load(path)


def test_spectrum_of_sine():
    t = np.arange(1201) / 100.0
    f, P = spectrum(np.sin(2 * np.pi * 4.0 * t), 100.0)
    assert abs(f[np.argmax(P)] - 4.0) <= f[1]


def test_spectrum_of_white_noise_is_flat():
    curves = [spectrum(np.random.default_rng(s).standard_normal(1201), 100.0)[1] for s in range(20)]
    P = np.median(curves, axis=0)[1:-1]
    assert P.max() < 3 * np.median(P)


def test_spectrum_of_zeros():
    f, P = spectrum(np.zeros(301), 100.0)
    assert len(f) == 129 and np.all(P == 0)


@pytest.mark.slow
def test_generator_learns_the_condition():
    # two noisy tones; after ~1000 iterations each label should own its tone
    rng = np.random.default_rng(0)
    t = np.arange(301) / 100.0
    segs = []
    for label, f in ((0, 5.0), (1, 12.0)):
        for i in range(640):
            x = np.sin(2 * np.pi * f * t + rng.uniform(0, 6.3)) + 0.5 * rng.standard_normal(301)
            segs.append(Segment((x - x.mean()) / x.std(), 0, i, label, "toy"))
    model, _ = train(SegmentSet(segs, 100.0), GanConfig.desk(epochs=100, seed=0))
    for label, own, other in ((0, (4, 6), (11, 13)), (1, (11, 13), (4, 6))):
        g = np.stack([s.values for s in generate(model, label, 300, seed=1)])
        f, P = spectrum(g, 100.0)
        P = P.mean(axis=0)
        band = lambda lo, hi: P[(f > lo) & (f < hi)].sum()  # noqa: E731
        assert band(*own) > 10 * band(*other)
