"""Uniform linear array model: steering vectors, mismatch models, snapshot synthesis.

All randomness flows through an explicit ``numpy.random.Generator`` so every
operation is pure and reproducible given the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ArrayGeometry",
    "SourceSpec",
    "NoMismatch",
    "AccumulatedPhaseMismatch",
    "IncoherentScatteringMismatch",
    "FixedSteeringVector",
    "ScatterSet",
    "SnapshotBatch",
    "SceneTruth",
    "steering_vector",
    "steering_matrix",
    "effective_desired_sv",
    "generate_snapshots",
]


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array with ``num_sensors`` elements.

    ``spacing_ratio`` is 2d/lambda, so 1.0 means half-wavelength spacing.
    """

    num_sensors: int
    spacing_ratio: float = 1.0

    def __post_init__(self):
        if self.num_sensors < 2:
            raise ValueError(f"num_sensors must be >= 2, got {self.num_sensors}")
        if self.spacing_ratio <= 0:
            raise ValueError(f"spacing_ratio must be > 0, got {self.spacing_ratio}")


@dataclass(frozen=True)
class SourceSpec:
    """One far-field narrowband source: direction and per-sensor power in dB."""

    doa_deg: float
    power_db: float

    def __post_init__(self):
        if not -90.0 <= self.doa_deg <= 90.0:
            raise ValueError(f"doa_deg must lie in [-90, 90], got {self.doa_deg}")

    @property
    def power(self) -> float:
        """Linear power relative to unit noise."""
        return 10.0 ** (self.power_db / 10.0)


@dataclass(frozen=True)
class NoMismatch:
    """Desired-signal steering vector is exactly the nominal one."""


@dataclass(frozen=True)
class AccumulatedPhaseMismatch:
    """Random-walk phase error accumulated along the array.

    Element m of the nominal SV is rotated by exp(j*phi_m) with
    phi_m = sum of m independent Gaussian increments (std in radians).
    The walk is drawn once per run and held fixed across snapshots.
    """

    std_rad: float = 0.07

    def __post_init__(self):
        if self.std_rad < 0:
            raise ValueError(f"std_rad must be >= 0, got {self.std_rad}")


@dataclass(frozen=True)
class IncoherentScatteringMismatch:
    """Time-varying desired signature from several incoherent paths.

    ``num_paths`` scattered paths plus the direct one give num_paths + 1
    directions, each drawn per run around ``doa_mean_deg``. Complex path
    gains are redrawn on every snapshot. ``distribution`` selects how the
    path directions are drawn: "uniform" (matching the stated mean and
    standard deviation) or "gaussian".
    """

    num_paths: int = 4
    doa_mean_deg: float = 5.0
    doa_std_deg: float = 2.0
    distribution: str = "uniform"

    def __post_init__(self):
        if self.num_paths < 0:
            raise ValueError(f"num_paths must be >= 0, got {self.num_paths}")
        if self.doa_std_deg < 0:
            raise ValueError(f"doa_std_deg must be >= 0, got {self.doa_std_deg}")
        if self.distribution not in ("uniform", "gaussian"):
            raise ValueError(f"unknown distribution {self.distribution!r}")


Mismatch = NoMismatch | AccumulatedPhaseMismatch | IncoherentScatteringMismatch


@dataclass(frozen=True)
class FixedSteeringVector:
    """Per-run desired SV that stays constant across snapshots."""

    vector: np.ndarray


@dataclass(frozen=True)
class ScatterSet:
    """Per-run scattered-path directions; gains are redrawn each snapshot."""

    doas_deg: np.ndarray
    steering: np.ndarray  # (num_paths + 1, M), row p is a(theta_p)


@dataclass(frozen=True)
class SnapshotBatch:
    """M x K complex observation matrix, one snapshot per column."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2:
            raise ValueError(f"snapshot data must be 2-D (M, K), got shape {data.shape}")
        if data.shape[1] < 1:
            raise ValueError("need at least one snapshot (K >= 1)")
        object.__setattr__(self, "data", data)

    @property
    def num_sensors(self) -> int:
        return self.data.shape[0]

    @property
    def num_snapshots(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class SceneTruth:
    """Ground truth of one simulated scene, used only for metrics.

    Holds the per-run desired-signal description, its total linear power,
    and the interferer steering vectors and powers needed to form the
    closed-form noise-plus-interference covariance.
    """

    desired: FixedSteeringVector | ScatterSet
    desired_power: float
    interferer_svs: np.ndarray     # (L, M)
    interferer_powers: np.ndarray  # (L,)


def steering_vector(geom: ArrayGeometry, theta_deg: float) -> np.ndarray:
    """Steering vector a(theta) = [1, e^{-j pi d sin}, ..., e^{-j pi (M-1) d sin}].

    Parameters
    ----------
    geom : ArrayGeometry
    theta_deg : float
        Direction of arrival in degrees, within [-90, 90].

    Returns
    -------
    (M,) complex ndarray with unit-modulus entries and first entry exactly 1.
    """
    if not -90.0 <= theta_deg <= 90.0:
        raise ValueError(f"theta_deg must lie in [-90, 90], got {theta_deg}")
    phase = -np.pi * geom.spacing_ratio * np.sin(np.deg2rad(theta_deg))
    return np.exp(1j * phase * np.arange(geom.num_sensors))


def steering_matrix(geom: ArrayGeometry, theta_deg) -> np.ndarray:
    """Stack of steering vectors, one row per angle. Shape (N, M)."""
    theta = np.atleast_1d(np.asarray(theta_deg, dtype=float))
    if theta.size and (theta.min() < -90.0 or theta.max() > 90.0):
        raise ValueError("all angles must lie in [-90, 90]")
    phases = -np.pi * geom.spacing_ratio * np.outer(np.sin(np.deg2rad(theta)), np.arange(geom.num_sensors))
    return np.exp(1j * phases)


def _complex_gaussian(rng: np.random.Generator, shape, power: float) -> np.ndarray:
    """Circular complex Gaussian samples with E|x|^2 = power."""
    scale = np.sqrt(power / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def effective_desired_sv(
    geom: ArrayGeometry,
    nominal_doa_deg: float,
    mismatch: Mismatch,
    rng: np.random.Generator,
) -> FixedSteeringVector | ScatterSet:
    """Draw the per-run desired-signal signature for the given mismatch model."""
    if isinstance(mismatch, NoMismatch):
        return FixedSteeringVector(steering_vector(geom, nominal_doa_deg))

    if isinstance(mismatch, AccumulatedPhaseMismatch):
        a0 = steering_vector(geom, nominal_doa_deg)
        increments = rng.normal(0.0, mismatch.std_rad, geom.num_sensors - 1)
        phi = np.concatenate([[0.0], np.cumsum(increments)])
        return FixedSteeringVector(a0 * np.exp(1j * phi))

    if isinstance(mismatch, IncoherentScatteringMismatch):
        n = mismatch.num_paths + 1
        if mismatch.distribution == "uniform":
            # Uniform with the stated mean and std: half-width sqrt(3)*std.
            half = np.sqrt(3.0) * mismatch.doa_std_deg
            doas = rng.uniform(mismatch.doa_mean_deg - half, mismatch.doa_mean_deg + half, n)
        else:
            doas = rng.normal(mismatch.doa_mean_deg, mismatch.doa_std_deg, n)
        doas = np.clip(doas, -90.0, 90.0)
        return ScatterSet(doas, steering_matrix(geom, doas))

    raise TypeError(f"unknown mismatch model: {mismatch!r}")


def generate_snapshots(
    geom: ArrayGeometry,
    desired: SourceSpec,
    interferers: list[SourceSpec],
    mismatch: Mismatch,
    num_snapshots: int,
    rng: np.random.Generator,
) -> tuple[SnapshotBatch, SceneTruth]:
    """Simulate one batch x(t) = desired + interference + unit-variance noise.

    All waveforms are circular complex Gaussian and independent across
    sources, sensors and snapshots. For incoherent scattering the desired
    power is split equally across the num_paths + 1 paths so the total
    per-sensor power matches ``desired.power``.

    Returns the batch together with the ground truth needed for SINR metrics.
    """
    if num_snapshots < 1:
        raise ValueError(f"num_snapshots must be >= 1, got {num_snapshots}")
    m, k = geom.num_sensors, num_snapshots

    signature = effective_desired_sv(geom, desired.doa_deg, mismatch, rng)
    x = np.zeros((m, k), dtype=np.complex128)
    if isinstance(signature, FixedSteeringVector):
        s0 = _complex_gaussian(rng, k, desired.power)
        x += np.outer(signature.vector, s0)
    else:
        n_paths = signature.steering.shape[0]
        gains = _complex_gaussian(rng, (n_paths, k), desired.power / n_paths)
        x += signature.steering.T @ gains

    int_svs = np.zeros((len(interferers), m), dtype=np.complex128)
    int_powers = np.zeros(len(interferers))
    for i, src in enumerate(interferers):
        int_svs[i] = steering_vector(geom, src.doa_deg)
        int_powers[i] = src.power
        x += np.outer(int_svs[i], _complex_gaussian(rng, k, src.power))

    x += _complex_gaussian(rng, (m, k), 1.0)

    truth = SceneTruth(signature, desired.power, int_svs, int_powers)
    return SnapshotBatch(x), truth


def all_zero(batch: SnapshotBatch) -> bool:
    """True when every snapshot is identically zero."""
    return not np.any(batch.data)


def batch_trace(batch: SnapshotBatch) -> float:
    """Trace of the implied sample covariance: mean squared snapshot norm."""
    data = batch.data
    total = float(np.sum(data.real**2) + np.sum(data.imag**2))
    return total / batch.num_snapshots
