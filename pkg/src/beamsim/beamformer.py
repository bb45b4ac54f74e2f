"""Matrix-free NPIC reconstruction and the conjugate-gradient beamformer.

The reconstructed covariances exist only as ``SpectrumSamples``: a grid of
angles, maximum-entropy powers and steering vectors. Every product with the
implied matrix sum_i P_i a_i a_i^H dtheta is evaluated at O(MQ) cost and no
M x M array is ever materialized here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np

from .arrays import ArrayGeometry, SnapshotBatch
from .errors import ConvergenceError, DegenerateInputError, IndefiniteOperatorError
from .meps import ImplicitSampleCovariance, MepsSolution, solve_v

__all__ = [
    "AngularSector",
    "SpectrumSamples",
    "BeamformerResult",
    "sample_spectrum",
    "reconstruct_sv",
    "npic_matvec",
    "gradient",
    "solve_beamformer",
    "meps_npic_cg",
]


@dataclass(frozen=True)
class AngularSector:
    """Union of angular intervals with a sampling budget.

    Samples are allocated to intervals proportionally to width (largest
    fractional remainder first, ties to the lower interval) and placed at
    cell midpoints, so interval endpoints are never sampled.
    """

    intervals: tuple
    num_samples: int

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        if not ivs:
            raise ValueError("need at least one interval")
        for lo, hi in ivs:
            if not (-90.0 <= lo < hi <= 90.0):
                raise ValueError(f"bad interval [{lo}, {hi}]; need -90 <= lo < hi <= 90")
        for (_, hi0), (lo1, _) in zip(sorted(ivs), sorted(ivs)[1:]):
            if lo1 < hi0:
                raise ValueError("intervals must not overlap")
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        object.__setattr__(self, "intervals", ivs)
        # the sector is immutable, so the grid is fixed: build it once
        widths = np.array([hi - lo for lo, hi in ivs])
        quota = self.num_samples * widths / widths.sum()
        counts = np.floor(quota).astype(int)
        remainder = self.num_samples - int(counts.sum())
        order = np.argsort(-(quota - counts), kind="stable")
        for idx in order[:remainder]:
            counts[idx] += 1
        pieces = []
        for (lo, hi), c in zip(ivs, counts):
            if c > 0:
                step = (hi - lo) / c
                pieces.append(lo + step * (np.arange(c) + 0.5))
        angles = np.concatenate(pieces)
        object.__setattr__(self, "_counts", counts)
        object.__setattr__(self, "_angles", angles)
        object.__setattr__(self, "_sin_angles", np.sin(np.deg2rad(angles)))
        object.__setattr__(self, "_delta", float(np.deg2rad(widths.sum()) / self.num_samples))

    @property
    def total_width_deg(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)

    def interval_counts(self) -> np.ndarray:
        """Per-interval sample counts under the proportional allocation rule."""
        return self._counts.copy()

    def sample_angles(self) -> tuple[np.ndarray, float]:
        """Grid angles (degrees) and the quadrature spacing in radians.

        The returned array is shared across calls; treat it as read-only.
        """
        return self._angles, self._delta

    def contains(self, theta_deg: float) -> bool:
        return any(lo <= theta_deg <= hi for lo, hi in self.intervals)


@dataclass(frozen=True)
class SpectrumSamples:
    """Sampled spectrum: the only representation of a reconstructed covariance.

    The implied matrix sum_i powers[i] steering[i] steering[i]^H delta_theta
    is never formed outside the dense test oracle.
    """

    angles_deg: np.ndarray
    powers: np.ndarray
    steering: np.ndarray  # (n, M), row i is a(angles_deg[i])
    delta_theta: float    # radians

    def __post_init__(self):
        angles = np.asarray(self.angles_deg, dtype=float)
        powers = np.asarray(self.powers, dtype=float)
        steering = np.asarray(self.steering, dtype=np.complex128)
        if not (len(angles) == len(powers) == steering.shape[0]):
            raise ValueError("angles, powers and steering must have matching lengths")
        if len(angles) == 0:
            raise ValueError("need at least one sample")
        if float(powers.min()) <= 0.0:
            raise ValueError("all powers must be > 0")
        if self.delta_theta <= 0:
            raise ValueError("delta_theta must be > 0")
        object.__setattr__(self, "angles_deg", angles)
        object.__setattr__(self, "powers", powers)
        object.__setattr__(self, "steering", steering)

    @property
    def dim(self) -> int:
        return self.steering.shape[1]


@dataclass(frozen=True)
class BeamformerResult:
    weights: np.ndarray
    estimated_sv: np.ndarray
    iterations_used: int
    final_gradient_norm: float
    converged: bool


@nb.njit(cache=True)
def _spectrum_kernel(sin_angles, spacing_ratio, m, v):  # pragma: no cover
    """Steering vectors and spectrum powers for a grid in one O(MQ) pass."""
    q = sin_angles.shape[0]
    steering = np.empty((q, m), dtype=np.complex128)
    powers = np.empty(q)
    v0 = v[0].real
    ok = True
    for i in range(q):
        step = -np.pi * spacing_ratio * sin_angles[i]
        acc = 0.0 + 0.0j
        for j in range(m):
            phase = step * j
            s = complex(np.cos(phase), np.sin(phase))
            steering[i, j] = s
            acc += s.conjugate() * v[j]
        denom = acc.real * acc.real + acc.imag * acc.imag
        if denom <= 0.0:
            ok = False
            denom = 1.0
        powers[i] = v0 / denom
    return steering, powers, ok


def sample_spectrum(sector: AngularSector, sol: MepsSolution, geom: ArrayGeometry) -> SpectrumSamples:
    """Evaluate the maximum-entropy spectrum on the sector grid."""
    angles, delta = sector.sample_angles()
    steering, powers, ok = _spectrum_kernel(
        sector._sin_angles, geom.spacing_ratio, geom.num_sensors, sol.v)
    if not ok:
        raise DegenerateInputError("spectrum degenerate at one or more grid angles")
    return SpectrumSamples(angles, powers, steering, delta)


def reconstruct_sv(signal_samples: SpectrumSamples, nominal_sv: np.ndarray) -> np.ndarray:
    """Estimate the desired-signal steering vector from the signal-sector spectrum.

    Applies the implied signal covariance to the nominal SV,
    a_hat = sum_i P_i (a_i^H a_bar) a_i dtheta, then rescales to ||a_hat||^2 = M.
    Cost O(MS); no M x M product.
    """
    a_bar = np.asarray(nominal_sv, dtype=np.complex128)
    m = signal_samples.dim
    if a_bar.shape != (m,):
        raise ValueError(f"expected nominal SV of length {m}, got shape {a_bar.shape}")
    nominal_norm = np.linalg.norm(a_bar)
    if nominal_norm == 0:
        raise ValueError("nominal SV must be nonzero")
    a = signal_samples.steering
    coeffs = signal_samples.powers * (a.conj() @ a_bar)
    a_hat = signal_samples.delta_theta * (a.T @ coeffs)
    norm = np.linalg.norm(a_hat)
    if norm < 1e-12 * nominal_norm:
        raise DegenerateInputError(
            "nominal SV is effectively orthogonal to the signal sector")
    return a_hat * (np.sqrt(m) / norm)


def npic_matvec(npic_samples: SpectrumSamples, w: np.ndarray) -> np.ndarray:
    """Apply the implied covariance: sum_i P_i (a_i^H w) a_i dtheta. Cost O(MQ)."""
    w = np.asarray(w)
    if w.shape != (npic_samples.dim,):
        raise ValueError(f"expected vector of length {npic_samples.dim}, got shape {w.shape}")
    a = npic_samples.steering
    return npic_samples.delta_theta * (a.T @ (npic_samples.powers * (a.conj() @ w)))


def gradient(npic_samples: SpectrumSamples, w: np.ndarray, alpha: float, a_hat: np.ndarray) -> np.ndarray:
    """Gradient of the constrained quadratic cost: 2 R w + alpha * a_hat."""
    return 2.0 * npic_matvec(npic_samples, w) + alpha * np.asarray(a_hat)


@nb.njit(cache=True)
def _cg_kernel(steering, powers, delta, b, tol, max_iter):  # pragma: no cover
    """Conjugate gradient on sum_i p_i a_i a_i^H dtheta, in O(MQ) memory.

    steering is the (Q, M) stack of grid steering vectors (row i is a_i).
    Returns (x, iterations, residual, status): status 0 converged, 1 hit
    max_iter, -1 non-positive curvature.
    """
    q = steering.shape[0]
    m = steering.shape[1]
    x = np.zeros(m, dtype=np.complex128)
    r = b.copy()
    d = r.copy()
    rz = 0.0
    for j in range(m):
        rz += (r[j].conjugate() * r[j]).real
    bnorm = np.sqrt(rz)
    res = bnorm
    it = 0
    c = np.empty(q, dtype=np.complex128)
    y = np.empty(m, dtype=np.complex128)
    while it < max_iter and res > tol * bnorm:
        for i in range(q):
            acc = 0.0 + 0.0j
            for j in range(m):
                acc += steering[i, j].conjugate() * d[j]
            c[i] = (powers[i] * delta) * acc
        for j in range(m):
            y[j] = 0.0 + 0.0j
        for i in range(q):
            ci = c[i]
            for j in range(m):
                y[j] += steering[i, j] * ci
        den = 0.0
        for j in range(m):
            den += (d[j].conjugate() * y[j]).real
        if den <= 0.0:
            return x, it, res, -1
        alpha = rz / den
        rz_new = 0.0
        cross = 0.0
        for j in range(m):
            x[j] = x[j] + alpha * d[j]
            r_prev = r[j]
            r[j] = r[j] - alpha * y[j]
            rz_new += (r[j].conjugate() * r[j]).real
            cross += (r[j].conjugate() * r_prev).real
        # Polak-Ribiere: reduces to rz_new/rz when successive residuals
        # are orthogonal, as they are for a linear system
        beta = (rz_new - cross) / rz
        rz = rz_new
        res = np.sqrt(rz)
        for j in range(m):
            d[j] = r[j] + beta * d[j]
        it += 1
    status = 0 if res <= tol * bnorm else 1
    return x, it, res, status


def solve_beamformer(
    npic_samples: SpectrumSamples,
    a_hat: np.ndarray,
    tol: float = 1e-3,
    max_iter: int = 7,
    method: str = "cg",
) -> BeamformerResult:
    """Compute MVDR-style weights from the sampled spectrum, matrix-free.

    Solves R w = a_hat by conjugate gradient using only O(MQ) products with
    the implied covariance, then normalizes w <- w / (a_hat^H w) to enforce
    the unit-gain constraint. Stops when the residual drops below
    tol * ||a_hat|| or after max_iter iterations; in the latter case the
    best iterate is returned flagged as unconverged.

    ``method="fixed_step"`` replaces CG with the plain gradient recursion
    w <- w + mu (a_hat - R w), mu = 1/trace(R).
    """
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if method not in ("cg", "fixed_step"):
        raise ValueError(f"unknown method {method!r}")
    a_hat = np.asarray(a_hat, dtype=np.complex128)
    m = npic_samples.dim
    if a_hat.shape != (m,):
        raise ValueError(f"expected estimated SV of length {m}, got shape {a_hat.shape}")
    bnorm = float(np.vdot(a_hat, a_hat).real) ** 0.5
    if bnorm == 0:
        raise ValueError("estimated SV must be nonzero")

    if method == "cg":
        x, it, res, status = _cg_kernel(
            npic_samples.steering, npic_samples.powers, npic_samples.delta_theta,
            a_hat, tol, max_iter)
        if status == -1:
            raise IndefiniteOperatorError(
                "non-positive curvature in CG; the sampled spectrum does not "
                "define a positive definite covariance")
        converged = status == 0
    else:
        mu = 1.0 / (npic_samples.delta_theta
                    * float(np.sum(npic_samples.powers * np.sum(np.abs(npic_samples.steering) ** 2, axis=1))))
        x = np.zeros(m, dtype=np.complex128)
        r = a_hat.copy()
        res = bnorm
        it = 0
        while it < max_iter and res > tol * bnorm:
            q = npic_matvec(npic_samples, r)
            x = x + mu * r
            r = r - mu * q
            res = float(np.linalg.norm(r))
            it += 1
        converged = res <= tol * bnorm

    gain = np.vdot(a_hat, x)
    xnorm = float(np.vdot(x, x).real) ** 0.5
    if abs(gain) <= 1e-12 * bnorm * xnorm:
        raise DegenerateInputError("solution has no component along the estimated SV")
    w = x / gain
    return BeamformerResult(w, a_hat, int(it), float(res), bool(converged))


def meps_npic_cg(
    batch: SnapshotBatch,
    geom: ArrayGeometry,
    nominal_sv: np.ndarray,
    signal_sector: AngularSector,
    complement_sector: AngularSector,
    tol: float = 1e-3,
    max_iter: int = 7,
    v_tol: float = 1e-8,
    v_max_iter: int = 1000,
    diagonal_loading: float = 0.0,
    fixed_step: bool = False,
) -> BeamformerResult:
    """Full pipeline: snapshots -> spectrum -> SV estimate -> weights.

    ``fixed_step=True`` switches both iterative solves to plain fixed-step
    recursions instead of conjugate gradient. A failed v-solve
    falls back to its best iterate and marks the result unconverged.
    """
    cov = ImplicitSampleCovariance(batch, diagonal_loading)
    flavor = "fixed_step" if fixed_step else "cg"
    v_ok = True
    try:
        sol = solve_v(cov, tol=v_tol, max_iter=v_max_iter, method=flavor)
    except ConvergenceError as err:
        if err.solution is None:
            raise
        sol = err.solution
        v_ok = False
    signal_samples = sample_spectrum(signal_sector, sol, geom)
    a_hat = reconstruct_sv(signal_samples, nominal_sv)
    npic_samples = sample_spectrum(complement_sector, sol, geom)
    result = solve_beamformer(npic_samples, a_hat, tol=tol, max_iter=max_iter, method=flavor)
    if not v_ok:
        result = BeamformerResult(
            result.weights, result.estimated_sv, result.iterations_used,
            result.final_gradient_norm, False)
    return result
