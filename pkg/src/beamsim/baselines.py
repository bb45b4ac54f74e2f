"""Dense oracle, reference beamformers and the output-SINR metric.

This is the only module allowed to materialize M x M matrices. Everything
here runs at desk scale (M <= 64) and exists to validate the matrix-free
paths and to provide comparison curves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .arrays import FixedSteeringVector, ScatterSet, SceneTruth, SnapshotBatch
from .beamformer import SpectrumSamples
from .errors import SingularMatrixError

__all__ = [
    "TruthModel",
    "dense_scm",
    "dense_from_spectrum",
    "solve_dense",
    "mvdr_weights",
    "smi_weights",
    "optimal_weights",
    "output_sinr",
]

#: relative residual bound every dense solve must satisfy
SOLVE_RESIDUAL_RTOL = 1e-10


def dense_scm(batch: SnapshotBatch, loading: float = 0.0) -> np.ndarray:
    """Materialized sample covariance (1/K) X X^H + loading * I."""
    x = batch.data
    r = x @ x.conj().T / batch.num_snapshots
    if loading:
        r = r + loading * np.eye(batch.num_sensors)
    return r


def dense_from_spectrum(samples: SpectrumSamples) -> np.ndarray:
    """Materialize sum_i P_i a_i a_i^H dtheta. Test/oracle use only."""
    a = samples.steering
    return samples.delta_theta * ((a.T * samples.powers) @ a.conj())


def _hermitian_or_raise(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    scale = np.linalg.norm(a)
    if scale > 0 and np.linalg.norm(a - a.conj().T) > 1e-10 * scale:
        raise ValueError("matrix is not Hermitian")
    return a


def solve_dense(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """A^{-1} b via Cholesky with a verified residual bound.

    Raises SingularMatrixError when A is not positive definite or the
    residual bound cannot be met even after one refinement pass.
    """
    a = _hermitian_or_raise(a)
    b = np.asarray(b, dtype=np.complex128)
    try:
        factor = scipy.linalg.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError as err:
        raise SingularMatrixError(f"matrix is not positive definite: {err}") from err
    x = scipy.linalg.cho_solve(factor, b, check_finite=False)
    bnorm = np.linalg.norm(b)
    residual = b - a @ x
    if np.linalg.norm(residual) > SOLVE_RESIDUAL_RTOL * bnorm:
        x = x + scipy.linalg.cho_solve(factor, residual, check_finite=False)
        residual = b - a @ x
        if np.linalg.norm(residual) > SOLVE_RESIDUAL_RTOL * bnorm:
            raise SingularMatrixError(
                f"solve residual {np.linalg.norm(residual):.3e} exceeds "
                f"{SOLVE_RESIDUAL_RTOL:.1e} * ||b||; matrix too ill-conditioned")
    return x


def mvdr_weights(npic: np.ndarray, sv: np.ndarray) -> np.ndarray:
    """Distortionless weights R^{-1} a / (a^H R^{-1} a)."""
    sv = np.asarray(sv, dtype=np.complex128)
    if not np.any(sv):
        raise ValueError("steering vector must be nonzero")
    x = solve_dense(npic, sv)
    return x / np.vdot(sv, x)


def smi_weights(snapshots: SnapshotBatch, sv: np.ndarray, loading: float = 0.0) -> np.ndarray:
    """Sample-matrix-inversion beamformer, optionally diagonally loaded."""
    if loading < 0:
        raise ValueError(f"loading must be >= 0, got {loading}")
    return mvdr_weights(dense_scm(snapshots, loading), sv)


@dataclass(frozen=True)
class TruthModel:
    """Closed-form quantities of one simulated scene, for metrics only."""

    desired: FixedSteeringVector | ScatterSet
    desired_power: float
    npic: np.ndarray  # (M, M) Hermitian PD: sum_l sigma_l^2 a_l a_l^H + I

    @classmethod
    def from_scene(cls, scene: SceneTruth) -> "TruthModel":
        svs, powers = scene.interferer_svs, scene.interferer_powers
        m = svs.shape[1] if svs.size else _desired_dim(scene.desired)
        npic = np.eye(m, dtype=np.complex128)
        for sv, power in zip(svs, powers):
            npic += power * np.outer(sv, sv.conj())
        return cls(scene.desired, scene.desired_power, npic)

    def desired_covariance(self) -> np.ndarray:
        """Rank-1 (fixed SV) or rank-(P+1) (scatter) desired covariance."""
        if isinstance(self.desired, FixedSteeringVector):
            a = self.desired.vector
            return self.desired_power * np.outer(a, a.conj())
        a = self.desired.steering
        per_path = self.desired_power / a.shape[0]
        return per_path * (a.T @ a.conj())


def _desired_dim(desired) -> int:
    if isinstance(desired, FixedSteeringVector):
        return desired.vector.shape[0]
    return desired.steering.shape[1]


def optimal_weights(truth: TruthModel) -> np.ndarray:
    """Max-SINR weights under the true covariances.

    For a deterministic desired SV this is the MVDR solution; for a scatter
    set it is the principal generalized eigenvector of (R_s, R_npic).
    """
    if isinstance(truth.desired, FixedSteeringVector):
        return mvdr_weights(truth.npic, truth.desired.vector)
    rs = truth.desired_covariance()
    _, vecs = scipy.linalg.eigh(rs, truth.npic)
    return vecs[:, -1]


def output_sinr(w: np.ndarray, truth: TruthModel) -> float:
    """Output SINR in dB: desired power over interference-plus-noise power.

    Invariant to any nonzero complex rescaling of w. For scatter scenes the
    numerator is w^H R_s w with the per-run scatter covariance.
    """
    w = np.asarray(w, dtype=np.complex128)
    if not np.any(w):
        raise ValueError("weights must be nonzero")
    if isinstance(truth.desired, FixedSteeringVector):
        numerator = truth.desired_power * abs(np.vdot(w, truth.desired.vector)) ** 2
    else:
        numerator = float(np.real(np.vdot(w, truth.desired_covariance() @ w)))
    denominator = float(np.real(np.vdot(w, truth.npic @ w)))
    return 10.0 * np.log10(numerator / denominator)
