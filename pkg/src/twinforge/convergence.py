"""Convergence duration of adversarial training as a damage indicator.

A pair of conditions that the discriminator can tell apart keeps the
adversarial game away from its 0.5/0.5 equilibrium for longer.  The indicator
is how long (and by how much) the smoothed training curve stays outside a
band of half-width ``threshold`` around equilibrium.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .cgan.training import TrainTrace

SOURCES = ("score_D", "score_G", "loss_D")
SAME_STATE = "same_state"
DIFFERENT_STATE = "different_state"


class ConfigMismatch(ValueError):
    """Raised when two traces were not produced under the same training setup."""


@dataclass(frozen=True)
class ConvergenceConfig:
    smoothing_window: int = 100
    threshold: float = 0.05
    source: str = "score_D"

    def __post_init__(self):
        if self.smoothing_window < 1:
            raise ValueError("smoothing_window must be >= 1")
        if not self.threshold > 0:
            raise ValueError("threshold must be > 0")
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}, got {self.source!r}")


@dataclass(frozen=True)
class ConvergenceMetric:
    duration_iters: int
    area: float
    stabilization_iter: int
    trace_length: int
    config: ConvergenceConfig = field(default_factory=ConvergenceConfig)
    trace_hash: str = ""
    gan_config_hash: str = ""

    def to_dict(self) -> dict:
        d = asdict(self)
        d["config"] = asdict(self.config)
        return d


@dataclass(frozen=True)
class DetectionVerdict:
    baseline_metric: ConvergenceMetric
    probe_metric: ConvergenceMetric
    ratio: float
    verdict: str
    ratio_threshold: float

    @property
    def different(self) -> bool:
        return self.verdict == DIFFERENT_STATE

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline_metric.to_dict(),
            "probe": self.probe_metric.to_dict(),
            "ratio": self.ratio,
            "ratio_threshold": self.ratio_threshold,
            "verdict": self.verdict,
        }


def smooth(series, W: int) -> np.ndarray:
    """Centered moving average whose window shrinks at both ends.

    Position ``i`` averages ``series[i - (W-1)//2 : i + W//2 + 1]`` clipped to
    the valid range, so ``W = 1`` returns the series unchanged.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("smooth needs a non-empty 1-D series")
    if W < 1:
        raise ValueError("W must be >= 1")
    if W == 1:
        return x.copy()
    n = x.size
    left, right = (W - 1) // 2, W // 2
    # windowed sums by direct convolution (no drifting running sum)
    sums = np.convolve(np.pad(x, (left, right)), np.ones(W), mode="valid")
    i = np.arange(n)
    counts = np.minimum(i + right + 1, n) - np.maximum(i - left, 0)
    return sums / counts


def deviation(series, cfg: ConvergenceConfig) -> np.ndarray:
    """Distance of the smoothed curve from its resting value.

    Scores rest at 0.5.  Losses have no fixed resting value, so the mean of
    the final ``max(W, n // 10)`` raw iterations stands in for it.
    """
    x = np.asarray(series, dtype=np.float64)
    s = smooth(x, cfg.smoothing_window)
    if cfg.source.startswith("score"):
        rest = 0.5
    else:
        tail = min(x.size, max(cfg.smoothing_window, x.size // 10))
        rest = float(x[-tail:].mean())
    return np.abs(s - rest)


def measure_series(series, cfg: ConvergenceConfig | None = None, trace_hash="", gan_config_hash="") -> ConvergenceMetric:
    cfg = cfg or ConvergenceConfig()
    dev = deviation(series, cfg)
    above = dev > cfg.threshold
    hits = np.flatnonzero(above)
    return ConvergenceMetric(
        duration_iters=int(above.sum()),
        area=float(np.maximum(dev - cfg.threshold, 0.0).sum()),
        stabilization_iter=int(hits[-1] + 1) if hits.size else 0,
        trace_length=int(dev.size),
        config=cfg,
        trace_hash=trace_hash,
        gan_config_hash=gan_config_hash,
    )


def measure(trace: TrainTrace, cfg: ConvergenceConfig | None = None) -> ConvergenceMetric:
    """Learning duration, area and stabilization iteration of one training run."""
    cfg = cfg or ConvergenceConfig()
    if len(trace) == 0:
        raise ValueError("empty trace")
    return measure_series(trace.series(cfg.source), cfg, trace.digest(), trace.config_hash)


def compare(baseline: ConvergenceMetric, probe: ConvergenceMetric, ratio_threshold: float = 1.5) -> DetectionVerdict:
    """Flag the probe pair as a different state when it learns for longer.

    Both metrics must come from equally long traces produced by the same
    training configuration; otherwise their durations are not comparable.
    """
    if baseline.trace_length != probe.trace_length:
        raise ConfigMismatch(f"trace lengths differ: {baseline.trace_length} vs {probe.trace_length}")
    if baseline.config != probe.config:
        raise ConfigMismatch("convergence settings differ between baseline and probe")
    if baseline.gan_config_hash != probe.gan_config_hash:
        raise ConfigMismatch(
            f"training configs differ: {baseline.gan_config_hash or '?'} vs {probe.gan_config_hash or '?'}"
        )
    ratio = probe.duration_iters / max(1, baseline.duration_iters)
    verdict = DIFFERENT_STATE if ratio > ratio_threshold else SAME_STATE
    return DetectionVerdict(baseline, probe, float(ratio), verdict, float(ratio_threshold))


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
