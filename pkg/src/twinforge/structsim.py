"""Shear-building chain oscillator driven by white-noise forces.

Stands in for a monitored structure: ``n`` masses in a chain with ``n + 1``
springs (walls at both ends), Rayleigh damping, independent Gaussian forces
on every mass and per-mass acceleration outputs sampled at ``fs``.  Damage is
a fractional stiffness cut on one spring.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .signalio import RawRecord


@dataclass(frozen=True)
class OscillatorModel:
    masses: tuple
    stiffnesses: tuple
    damping_ratio: float = 0.02
    fs: float = 100.0

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        k = np.asarray(self.stiffnesses, dtype=float)
        if len(k) != len(m) + 1:
            raise ValueError(f"need {len(m) + 1} stiffnesses for {len(m)} masses, got {len(k)}")
        if np.any(m <= 0) or np.any(k <= 0):
            raise ValueError("masses and stiffnesses must be positive")
        if not 0 < self.damping_ratio < 1:
            raise ValueError("damping_ratio must lie in (0, 1)")
        if self.fs <= 0:
            raise ValueError("fs must be positive")

    @property
    def dof(self) -> int:
        return len(self.masses)


@dataclass(frozen=True)
class DamageScenario:
    element_index: int
    stiffness_reduction: float

    def __post_init__(self):
        if not 0 <= self.stiffness_reduction < 1:
            raise ValueError("stiffness_reduction must lie in [0, 1)")
        if self.element_index < 0:
            raise ValueError("element_index must be >= 0")


def apply_damage(model: OscillatorModel, scenario: DamageScenario | None) -> OscillatorModel:
    if scenario is None:
        return model
    if scenario.element_index > model.dof:
        raise ValueError(f"element {scenario.element_index} outside chain of {model.dof + 1} springs")
    k = list(model.stiffnesses)
    k[scenario.element_index] *= 1.0 - scenario.stiffness_reduction
    return replace(model, stiffnesses=tuple(k))


def matrices(model: OscillatorModel):
    """Mass and stiffness matrices of the fixed-fixed chain."""
    k = np.asarray(model.stiffnesses, dtype=float)
    M = np.diag(np.asarray(model.masses, dtype=float))
    K = np.diag(k[:-1] + k[1:]) - np.diag(k[1:-1], 1) - np.diag(k[1:-1], -1)
    return M, K


def modal(model: OscillatorModel):
    """Natural frequencies (Hz, ascending) and mass-normalised mode shapes."""
    M, K = matrices(model)
    lam, phi = scipy.linalg.eigh(K, M)
    if np.any(lam <= 0):
        raise np.linalg.LinAlgError("non-positive eigenvalue; model is degenerate")
    return np.sqrt(lam) / (2 * np.pi), phi


def rayleigh_damping(model: OscillatorModel) -> np.ndarray:
    """C = a M + b K matching ``damping_ratio`` at the first and last modes."""
    M, K = matrices(model)
    f, _ = modal(model)
    w1, wn = 2 * np.pi * f[0], 2 * np.pi * f[-1]
    z = model.damping_ratio
    if np.isclose(w1, wn):
        return 2 * z * w1 * M
    a = 2 * z * w1 * wn / (w1 + wn)
    b = 2 * z / (w1 + wn)
    return a * M + b * K


def state_space(model: OscillatorModel):
    """Continuous (A, B, C, D) with accelerations as outputs."""
    n = model.dof
    M, K = matrices(model)
    Cd = rayleigh_damping(model)
    Minv = np.linalg.inv(M)
    A = np.block([[np.zeros((n, n)), np.eye(n)], [-Minv @ K, -Minv @ Cd]])
    B = np.vstack([np.zeros((n, n)), Minv])
    C = A[n:, :]
    D = Minv
    return A, B, C, D


def discretize(A, B, dt):
    """Exact zero-order-hold discretisation via the augmented exponential."""
    n, m = B.shape
    aug = np.zeros((n + m, n + m))
    aug[:n, :n] = A
    aug[:n, n:] = B
    E = scipy.linalg.expm(aug * dt)
    return E[:n, :n], E[:n, n:]


def simulate(
    model: OscillatorModel,
    scenario: DamageScenario | None,
    duration_s: float,
    seed: int,
    force_std: float = 1.0,
    source_tag: str = "",
) -> RawRecord:
    n_samples = int(round(duration_s * model.fs))
    if n_samples < 2:
        raise ValueError(f"duration {duration_s}s gives {n_samples} samples; need at least 2")
    damaged = apply_damage(model, scenario)
    A, B, C, D = state_space(damaged)
    Ad, Bd = discretize(A, B, 1.0 / model.fs)
    rho = np.max(np.abs(np.linalg.eigvals(Ad)))
    if rho >= 1:
        raise FloatingPointError(f"unstable discretisation (spectral radius {rho:.6f})")
    rng = np.random.default_rng(seed)
    n = model.dof
    w = rng.normal(0.0, force_std, size=(n_samples, n))
    # propagate the state in blocks: x_{k+1} = Ad x_k + Bd w_k
    x = np.zeros(2 * n)
    states = np.empty((n_samples, 2 * n))
    Bw = w @ Bd.T
    AdT = Ad.T
    for k in range(n_samples):
        states[k] = x
        x = x @ AdT + Bw[k]
    acc = states @ C.T + w @ D.T
    tag = source_tag or ("healthy" if scenario is None else f"damage{scenario.element_index}-{scenario.stiffness_reduction:g}")
    return RawRecord(acc.T.copy(), model.fs, tag)


def benchmark_model() -> OscillatorModel:
    """Five-storey chain with a 3.9 Hz fundamental mode, sampled at 100 Hz."""
    n = 5
    k0 = 1.0
    masses = (1.0,) * n
    base = OscillatorModel(masses, (k0,) * (n + 1))
    f1 = modal(base)[0][0]
    scale = (3.9 / f1) ** 2
    return OscillatorModel(masses, (k0 * scale,) * (n + 1), damping_ratio=0.02, fs=100.0)


# Damage sits on a central spring (n // 2): it moves the upper modes that carry
# most of the acceleration energy, not just the fundamental.
DAMAGED_ELEMENT = 2
BENCHMARK_SCENARIOS = {
    "healthy_a": (None, 0),
    "healthy_b": (None, 1),
    "mild": (DamageScenario(DAMAGED_ELEMENT, 0.10), 0),
    "severe": (DamageScenario(DAMAGED_ELEMENT, 0.40), 0),
}


def make_benchmark(seed: int, n_samples: int = 2**16) -> dict[str, RawRecord]:
    """Canonical four-record fixture: two healthy excitations, mild and severe damage.

    ``healthy_b`` differs from ``healthy_a`` only in the excitation seed; the
    damaged records reuse ``healthy_a``'s excitation.
    """
    model = benchmark_model()
    ss = np.random.SeedSequence(seed)
    excitation_seeds = [int(s.generate_state(1)[0]) for s in ss.spawn(2)]
    out = {}
    for name, (scenario, which) in BENCHMARK_SCENARIOS.items():
        out[name] = simulate(model, scenario, n_samples / model.fs, excitation_seeds[which], source_tag=name)
    return out
