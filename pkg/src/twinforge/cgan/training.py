"""Conditional adversarial training, score traces, checkpoints and generation."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import signal as sp_signal

from ..signalio import Segment, SegmentSet
from ..tensor import AdamState, adam_step, load_checkpoint, save_checkpoint, sigmoid
from ..tensor.checkpoint import CorruptCheckpoint
from .architecture import get_preset
from .networks import Discriminator, Generator

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    pass


@dataclass
class GanConfig:
    latent_dim: int = 100
    num_classes: int = 2
    lr: float = 0.0005
    beta1: float = 0.5
    beta2: float = 0.999
    epochs: int = 500
    batch_size: int = 128
    seed: int = 0
    scale_preset: str = "paper"
    leaky_slope: float = 0.2
    dtype: str = "float32"

    def __post_init__(self):
        if self.batch_size < 2 or self.batch_size % 2:
            raise ValueError("batch_size must be an even number >= 2")
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.num_classes != 2:
            raise ValueError("only two-condition training is supported")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        get_preset(self.scale_preset)

    @property
    def signal_length(self) -> int:
        return get_preset(self.scale_preset).signal_length

    @classmethod
    def desk(cls, **overrides) -> "GanConfig":
        base = dict(scale_preset="desk", epochs=DESK_EPOCHS)
        base.update(overrides)
        return cls(**base)

    def digest(self) -> str:
        text = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


DESK_EPOCHS = 200


# --- losses -----------------------------------------------------------------


def softplus(x):
    return np.logaddexp(0.0, x)


def discriminator_loss(real_logits, fake_logits) -> float:
    """-mean log sigmoid(real) - mean log(1 - sigmoid(fake)), from logits."""
    real = np.asarray(real_logits, dtype=np.float64)
    fake = np.asarray(fake_logits, dtype=np.float64)
    loss = float(np.mean(softplus(-real)) + np.mean(softplus(fake)))
    if not np.isfinite(loss):
        raise TrainingDiverged("non-finite discriminator loss")
    return loss


def generator_loss(fake_logits) -> float:
    """Non-saturating form: -mean log sigmoid(fake)."""
    loss = float(np.mean(softplus(-np.asarray(fake_logits, dtype=np.float64))))
    if not np.isfinite(loss):
        raise TrainingDiverged("non-finite generator loss")
    return loss


def scores(real_logits, fake_logits) -> tuple[float, float]:
    """(score_G, score_D); both are 0.5 at equilibrium."""
    p_real = sigmoid(np.asarray(real_logits, dtype=np.float64))
    p_fake = sigmoid(np.asarray(fake_logits, dtype=np.float64))
    score_g = float(np.mean(p_fake))
    score_d = 0.5 * float(np.mean(p_real)) + 0.5 * float(np.mean(1.0 - p_fake))
    return score_g, score_d


# --- trace ------------------------------------------------------------------

TRACE_FIELDS = ("iter", "score_g", "score_d", "loss_g", "loss_d")


@dataclass
class TrainTrace:
    score_g: np.ndarray
    score_d: np.ndarray
    loss_g: np.ndarray
    loss_d: np.ndarray
    config_hash: str = ""
    wall_time_s: float = 0.0
    iterations_per_epoch: int = 0

    def __len__(self):
        return len(self.score_d)

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(1, len(self) + 1)

    def series(self, source: str) -> np.ndarray:
        return {"score_D": self.score_d, "score_G": self.score_g, "loss_D": self.loss_d, "loss_G": self.loss_g}[source]

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.score_g, self.score_d, self.loss_g, self.loss_d):
            h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def subsample(self, k: int) -> "TrainTrace":
        return TrainTrace(
            self.score_g[::k], self.score_d[::k], self.loss_g[::k], self.loss_d[::k],
            self.config_hash, self.wall_time_s, max(1, self.iterations_per_epoch // k),
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_FIELDS)
            for i, row in enumerate(zip(self.score_g, self.score_d, self.loss_g, self.loss_d), start=1):
                w.writerow([i, *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path, config_hash: str = "") -> "TrainTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        cols = {k: np.array([float(r[k]) for r in rows]) for k in TRACE_FIELDS[1:]}
        return cls(cols["score_g"], cols["score_d"], cols["loss_g"], cols["loss_d"], config_hash)


# --- model container ----------------------------------------------------------


@dataclass
class GanModel:
    config: GanConfig
    generator: Generator
    discriminator: Discriminator
    step: int = 0
    extra: dict = field(default_factory=dict)

    @classmethod
    def build(cls, cfg: GanConfig) -> "GanModel":
        preset = get_preset(cfg.scale_preset)
        G = Generator(preset, cfg.latent_dim, cfg.num_classes)
        D = Discriminator(preset, cfg.num_classes, cfg.leaky_slope)
        init_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
        G.init(init_rng, np.dtype(cfg.dtype))
        D.init(init_rng, np.dtype(cfg.dtype))
        return cls(cfg, G, D)

    def arrays(self) -> dict[str, np.ndarray]:
        out = {f"G.{k}": v for k, v in {**self.generator.parameters(), **self.generator.buffers()}.items()}
        out.update({f"D.{k}": v for k, v in self.discriminator.parameters().items()})
        return out

    def save(self, path) -> str:
        header = {
            "kind": "twinforge-cgan",
            "config": asdict(self.config),
            "config_hash": self.config.digest(),
            "seed": self.config.seed,
            "step": self.step,
            **self.extra,
        }
        return save_checkpoint(path, header, self.arrays())

    @classmethod
    def load(cls, path) -> "GanModel":
        header, arrays = load_checkpoint(path)
        if header.get("kind") != "twinforge-cgan":
            raise CorruptCheckpoint(f"{path}: not a cgan checkpoint")
        cfg = GanConfig(**header["config"])
        model = cls.build(cfg)
        model.generator.load({k[2:]: v for k, v in arrays.items() if k.startswith("G.")})
        model.discriminator.load({k[2:]: v for k, v in arrays.items() if k.startswith("D.")})
        model.step = header["step"]
        model.extra = {k: v for k, v in header.items() if k not in ("kind", "config", "config_hash", "seed", "step", "blob_bytes", "blob_sha256")}
        return model


# --- training -----------------------------------------------------------------


def iterations_per_epoch(n_segments: int, batch_size: int) -> int:
    return n_segments // batch_size


def _balanced_batches(idx0, idx1, n_iter, half, rng):
    """Yield index arrays holding ``half`` items of each label, cycling through
    a fresh permutation of each class every epoch."""
    p0 = np.resize(rng.permutation(idx0), n_iter * half)
    p1 = np.resize(rng.permutation(idx1), n_iter * half)
    for i in range(n_iter):
        yield np.concatenate([p0[i * half : (i + 1) * half], p1[i * half : (i + 1) * half]])


def train(data: SegmentSet, cfg: GanConfig, progress=None) -> tuple[GanModel, TrainTrace]:
    """Alternate one discriminator and one generator Adam step per mini-batch.

    Each mini-batch holds ``batch_size / 2`` real segments per condition.  The
    generator step reuses the latent batch and labels of the discriminator step
    and is scored against the freshly updated discriminator.
    """
    data.validate(require_both_labels=True)
    if data.length != cfg.signal_length:
        raise ValueError(f"segments have length {data.length}, preset {cfg.scale_preset!r} expects {cfg.signal_length}")
    labels = data.labels()
    half = cfg.batch_size // 2
    idx0 = np.flatnonzero(labels == 0)
    idx1 = np.flatnonzero(labels == 1)
    if min(len(idx0), len(idx1)) < half:
        raise ValueError(f"each label needs >= {half} segments, have {len(idx0)} / {len(idx1)}")
    dtype = np.dtype(cfg.dtype)
    X = data.matrix().astype(dtype)[:, :, None]
    n_iter = iterations_per_epoch(len(data), cfg.batch_size)

    model = GanModel.build(cfg)
    G, D = model.generator, model.discriminator
    opt_g = AdamState(cfg.lr, cfg.beta1, cfg.beta2)
    opt_d = AdamState(cfg.lr, cfg.beta1, cfg.beta2)
    g_params, d_params = G.parameters(), D.parameters()
    ss = np.random.SeedSequence([cfg.seed, 1])
    batch_rng, latent_rng = (np.random.default_rng(s) for s in ss.spawn(2))

    total = cfg.epochs * n_iter
    trace = {k: np.empty(total) for k in ("score_g", "score_d", "loss_g", "loss_d")}
    B = cfg.batch_size
    t0 = time.perf_counter()
    it = 0
    for epoch in range(cfg.epochs):
        for idx in _balanced_batches(idx0, idx1, n_iter, half, batch_rng):
            x = X[idx]
            y = labels[idx]
            z = latent_rng.standard_normal((B, 1, cfg.latent_dim)).astype(dtype)
            fake = G.forward(z, y, train=True)

            # discriminator step on [real; fake]
            logits = D.forward(np.concatenate([x, fake]), np.concatenate([y, y]))
            real_l, fake_l = logits[:B], logits[B:]
            loss_d = discriminator_loss(real_l, fake_l)
            score_g, score_d = scores(real_l, fake_l)
            grad = np.concatenate([(sigmoid(real_l) - 1.0) / B, sigmoid(fake_l) / B]).astype(dtype)
            D.backward(grad)
            adam_step(opt_d, d_params, D.gradients())

            # generator step through the updated discriminator
            fake_l = D.forward(fake, y)
            loss_g = generator_loss(fake_l)
            g_fake = D.backward(((sigmoid(fake_l) - 1.0) / B).astype(dtype), param_grads=False)
            G.backward(g_fake)
            adam_step(opt_g, g_params, G.gradients())

            trace["score_g"][it] = score_g
            trace["score_d"][it] = score_d
            trace["loss_g"][it] = loss_g
            trace["loss_d"][it] = loss_d
            it += 1
        if progress is not None:
            progress(epoch + 1, it, trace["score_d"][it - 1])
    model.step = it
    wall = time.perf_counter() - t0
    log.info("trained %d iterations in %.1fs", it, wall)
    return model, TrainTrace(
        trace["score_g"], trace["score_d"], trace["loss_g"], trace["loss_d"], cfg.digest(), wall, n_iter
    )


def generate(model: GanModel, label: int, n: int, seed: int, batch: int = 256) -> list[Segment]:
    """Draw ``n`` synthetic segments for one condition label."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if label not in (0, 1):
        raise ValueError("label must be 0 or 1")
    cfg = model.config
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2, label]))
    out = []
    done = 0
    while done < n:
        b = min(batch, n - done)
        z = rng.standard_normal((b, 1, cfg.latent_dim)).astype(cfg.dtype)
        y = np.full(b, label)
        x = model.generator.forward(z, y, train=False)[:, :, 0].astype(np.float64)
        out.extend(Segment(x[i], 0, done + i, label, "generated") for i in range(b))
        done += b
    return out


def load_model(path) -> GanModel:
    return GanModel.load(Path(path))


# --- spectra ------------------------------------------------------------------


def spectrum(values, fs: float, nperseg: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """One-sided Welch PSD (Hann, 50 % overlap)."""
    x = np.asarray(values, dtype=np.float64)
    n = min(nperseg, len(x))
    return sp_signal.welch(x, fs=fs, window="hann", nperseg=n, noverlap=n // 2, detrend=False)
