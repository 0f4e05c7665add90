"""Per-segment signal features and a standardized PCA subspace.

The feature layout is fixed at 19 entries (see ``FEATURE_NAMES``) so fitted
PCA models and classifiers can be exchanged between runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy import signal as sp_signal

FEATURE_NAMES = (
    "mean",
    "variance",
    "skewness",
    "kurtosis",
    "rms",
    "dom_freq_1",
    "dom_freq_2",
    "dom_freq_3",
    "spectral_centroid",
    *(f"autocorr_lag_{k}" for k in range(1, 11)),
)
N_FEATURES = len(FEATURE_NAMES)
WELCH_NPERSEG = 256
MIN_LENGTH = 32
PCA_COLUMNS = ("segment_id", "source", "label", "pc1", "pc2", "pc3")


class DegenerateSegment(ValueError):
    pass


def welch_psd(x, fs: float):
    """One-sided Welch PSD along the last axis: Hann, 256-sample segments, 50 % overlap."""
    x = np.asarray(x, dtype=np.float64)
    n = min(WELCH_NPERSEG, x.shape[-1])
    return sp_signal.welch(x, fs=fs, window="hann", nperseg=n, noverlap=n // 2, detrend=False, axis=-1)


def dominant_frequencies(freqs, power, k: int = 3) -> np.ndarray:
    """Locations of the ``k`` strongest spectral peaks, strongest first.

    Peaks are local maxima at least two bins apart; equal powers rank the
    lower frequency first.  When the spectrum has fewer than ``k`` peaks the
    remaining slots take the strongest leftover bins under the same ordering.
    """
    power = np.asarray(power)
    peaks, _ = sp_signal.find_peaks(power, distance=2)
    order = lambda idx: sorted(idx, key=lambda i: (-power[i], i))  # noqa: E731
    chosen = order(peaks)[:k]
    if len(chosen) < k:
        taken = set(chosen)
        chosen += [i for i in order(range(len(power))) if i not in taken][: k - len(chosen)]
    return np.asarray(freqs)[chosen]


def _autocorr(xc, lags=10):
    denom = np.einsum("ij,ij->i", xc, xc)
    n = xc.shape[1]
    return np.stack([np.einsum("ij,ij->i", xc[:, : n - k], xc[:, k:]) / denom for k in range(1, lags + 1)], axis=1)


def feature_matrix(values, fs: float) -> np.ndarray:
    """Feature rows for a ``(n, L)`` stack of segments."""
    X = np.atleast_2d(np.asarray(values, dtype=np.float64))
    if X.shape[1] < MIN_LENGTH:
        raise ValueError(f"segments need at least {MIN_LENGTH} samples, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("non-finite sample in segment")
    mean = X.mean(axis=1)
    xc = X - mean[:, None]
    m2 = (xc**2).mean(axis=1)
    if np.any(m2 <= 1e-24):
        bad = int(np.flatnonzero(m2 <= 1e-24)[0])
        raise DegenerateSegment(f"segment {bad} is constant; spectral features undefined")
    skew = (xc**3).mean(axis=1) / m2**1.5
    kurt = (xc**4).mean(axis=1) / m2**2
    rms = np.sqrt((X**2).mean(axis=1))
    freqs, P = welch_psd(X, fs)
    dom = np.stack([dominant_frequencies(freqs, p) for p in P])
    centroid = (P * freqs).sum(axis=1) / P.sum(axis=1)
    ac = _autocorr(xc)
    return np.column_stack([mean, m2, skew, kurt, rms, dom, centroid, ac])


def extract_features(values, fs: float) -> np.ndarray:
    """The 19-entry feature vector of one segment."""
    return feature_matrix(np.asarray(values)[None, :], fs)[0]


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray  # (K, F), rows orthonormal
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in ("mean", "scale", "components", "explained_variance")}

    @classmethod
    def from_dict(cls, d) -> "PcaModel":
        return cls(*(np.asarray(d[k], dtype=np.float64) for k in ("mean", "scale", "components", "explained_variance")))


def column_scale(X) -> tuple[np.ndarray, np.ndarray]:
    """Column means and population stds, with std 1 for columns that are constant.

    A column counts as constant when its spread is round-off relative to its
    mean; the mean and variance of standardized segments are exactly such
    columns, and dividing by their ~1e-17 spread would blow up any input
    that was not standardized the same way.
    """
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std <= 1e-9 * np.maximum(1.0, np.abs(mean))
    return mean, np.where(constant, 1.0, std)


def pca_fit(features, K: int = 3) -> PcaModel:
    """PCA of z-scored features.

    Each column is centred and divided by its population standard deviation
    (constant columns are only centred), so the covariance is the
    correlation matrix and the eigenvalues sum to at most ``F``.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("features must be a 2-D (n, F) array")
    n, F = X.shape
    if n < 2:
        raise ValueError("PCA needs at least two feature vectors")
    if not 1 <= K <= F:
        raise ValueError(f"K must be in [1, {F}], got {K}")
    mean, scale = column_scale(X)
    Z = (X - mean) / scale
    cov = Z.T @ Z / n
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:K]
    comps = evecs[:, order].T
    # largest-magnitude entry of every axis made positive
    lead = comps[np.arange(K), np.argmax(np.abs(comps), axis=1)]
    comps = comps * np.where(lead < 0, -1.0, 1.0)[:, None]
    return PcaModel(mean, scale, comps, np.clip(evals[order], 0.0, None))


def pca_project(model: PcaModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.shape[-1] != model.mean.shape[0]:
        raise ValueError(f"feature layout has {X.shape[-1]} entries, model expects {model.mean.shape[0]}")
    return ((X - model.mean) / model.scale) @ model.components.T


def write_pca_csv(path, rows) -> None:
    """Rows of ``(segment_id, source, label, coords)`` with the first three coordinates written."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PCA_COLUMNS)
        for seg_id, source, label, coords in rows:
            c = list(coords[:3]) + [0.0] * max(0, 3 - len(coords))
            w.writerow([seg_id, source, int(label), *(repr(float(v)) for v in c)])


def read_pca_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
