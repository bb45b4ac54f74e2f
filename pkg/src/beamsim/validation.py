"""Oracle-equivalence checks: matrix-free paths against dense linear algebra.

These are the same checks the acceptance tests run; ``beamsim validate``
executes them from the command line.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import ArrayGeometry, SnapshotBatch, steering_matrix
from .baselines import dense_from_spectrum, dense_scm, mvdr_weights, solve_dense
from .beamformer import SpectrumSamples, gradient, npic_matvec, solve_beamformer
from .errors import ConvergenceError
from .meps import ImplicitSampleCovariance, MepsSolution, meps_power_grid, solve_v, step_size_xi

__all__ = ["CheckResult", "run_all"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def random_batch(rng: np.random.Generator, m: int = 10, k: int = 30) -> SnapshotBatch:
    data = (rng.standard_normal((m, k)) + 1j * rng.standard_normal((m, k))) / np.sqrt(2)
    return SnapshotBatch(data)


def random_spectrum_samples(rng: np.random.Generator, m: int = 10, q: int = 90) -> SpectrumSamples:
    geom = ArrayGeometry(m)
    angles = np.sort(rng.uniform(-90.0, 90.0, q))
    powers = 10.0 ** rng.uniform(-1.0, 1.0, q)
    return SpectrumSamples(angles, powers, steering_matrix(geom, angles), np.deg2rad(180.0) / q)


def random_unit_sv(rng: np.random.Generator, m: int = 10) -> np.ndarray:
    v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return v * (np.sqrt(m) / np.linalg.norm(v))


def check_spectrum_oracle(n_batches: int = 100, seed: int = 101) -> CheckResult:
    """Spectrum via matrix-free solve vs dense inversion at 181 grid angles."""
    rng = np.random.default_rng(seed)
    geom = ArrayGeometry(10)
    grid = steering_matrix(geom, np.arange(-90.0, 91.0))
    worst = 0.0
    for _ in range(n_batches):
        batch = random_batch(rng)
        sol = solve_v(ImplicitSampleCovariance(batch), tol=1e-10, max_iter=500)
        implicit = meps_power_grid(sol, grid)
        r = dense_scm(batch)
        u1 = np.zeros(10, dtype=np.complex128)
        u1[0] = 1.0
        v_dense = solve_dense(r, u1)
        dense_sol = MepsSolution(v_dense, 1.0 / v_dense[0].real, 0, 0.0)
        dense = meps_power_grid(dense_sol, grid)
        worst = max(worst, float(np.max(np.abs(implicit - dense) / dense)))
    return CheckResult(
        "spectrum oracle equivalence", worst < 1e-6,
        f"max relative error {worst:.3e} over {n_batches} batches (bound 1e-6)")


def check_beamformer_oracle(n_systems: int = 100, seed: int = 202) -> CheckResult:
    """Matrix-free CG weights vs dense MVDR on random sampled spectra."""
    rng = np.random.default_rng(seed)
    worst_w = 0.0
    worst_sinr = 0.0
    for _ in range(n_systems):
        samples = random_spectrum_samples(rng)
        a_hat = random_unit_sv(rng)
        result = solve_beamformer(samples, a_hat, tol=1e-6, max_iter=20)
        dense = dense_from_spectrum(samples)
        w_ref = mvdr_weights(dense, a_hat)
        worst_w = max(worst_w, float(np.linalg.norm(result.weights - w_ref) / np.linalg.norm(w_ref)))
        def sinr_db(w):
            return 10 * np.log10(abs(np.vdot(w, a_hat)) ** 2 / np.vdot(w, dense @ w).real)
        worst_sinr = max(worst_sinr, abs(sinr_db(result.weights) - sinr_db(w_ref)))
    ok = worst_w < 1e-4 and worst_sinr < 0.01
    return CheckResult(
        "beamformer oracle equivalence", ok,
        f"max weight error {worst_w:.3e} (bound 1e-4), "
        f"max SINR difference {worst_sinr:.3e} dB (bound 0.01)")


def finite_difference_gradient(samples: SpectrumSamples, w: np.ndarray, alpha: float,
                               a_hat: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of the real cost over the 2M real coordinates."""
    dense = dense_from_spectrum(samples)

    def cost(wv):
        return float(np.vdot(wv, dense @ wv).real + alpha * (np.vdot(wv, a_hat) - 1.0).real)

    m = w.shape[0]
    grad = np.zeros(m, dtype=np.complex128)
    for j in range(m):
        for part, unit in ((1.0, 1.0), (1j, 1j)):
            wp, wm = w.copy(), w.copy()
            wp[j] += h * unit
            wm[j] -= h * unit
            diff = (cost(wp) - cost(wm)) / (2 * h)
            grad[j] += diff * part
    return grad


def check_gradient(n_points: int = 20, seed: int = 303) -> CheckResult:
    """Analytic gradient vs central finite differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        samples = random_spectrum_samples(rng)
        w = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        a_hat = random_unit_sv(rng)
        alpha = float(rng.uniform(-2.0, 2.0))
        analytic = gradient(samples, w, alpha, a_hat)
        numeric = finite_difference_gradient(samples, w, alpha, a_hat)
        worst = max(worst, float(np.linalg.norm(analytic - numeric) / np.linalg.norm(analytic)))
    return CheckResult(
        "gradient finite-difference check", worst < 1e-5,
        f"max relative error {worst:.3e} over {n_points} points (bound 1e-5)")


def check_step_size(n_batches: int = 100, seed: int = 404, iterations: int = 200) -> CheckResult:
    """xi * lambda_max <= 1 and monotone fixed-step residuals."""
    rng = np.random.default_rng(seed)
    worst_product = 0.0
    monotone = True
    for _ in range(n_batches):
        batch = random_batch(rng)
        xi = step_size_xi(batch)
        lam_max = float(np.linalg.eigvalsh(dense_scm(batch)).max())
        worst_product = max(worst_product, xi * lam_max)
        residuals = []
        try:
            solve_v(ImplicitSampleCovariance(batch), tol=1e-300, max_iter=iterations,
                    method="fixed_step", callback=residuals.append)
        except ConvergenceError:
            pass
        res = np.array(residuals)
        if np.any(res[1:] > res[:-1] * (1 + 1e-9)):
            monotone = False
    ok = worst_product <= 1.0 + 1e-12 and monotone
    return CheckResult(
        "step-size bound and monotonicity", ok,
        f"max xi*lambda_max {worst_product:.6f} (bound 1), "
        f"residuals monotone: {monotone}")


def check_matvec_agreement(n_cases: int = 50, seed: int = 505) -> CheckResult:
    """Implicit matvecs vs their dense materializations."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_cases):
        batch = random_batch(rng)
        cov = ImplicitSampleCovariance(batch)
        z = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        dense = dense_scm(batch)
        worst = max(worst, float(
            np.linalg.norm(cov.matvec(z) - dense @ z) / np.linalg.norm(dense @ z)))
        samples = random_spectrum_samples(rng)
        w = rng.standard_normal(10) + 1j * rng.standard_normal(10)
        ref = dense_from_spectrum(samples) @ w
        worst = max(worst, float(np.linalg.norm(npic_matvec(samples, w) - ref) / np.linalg.norm(ref)))
    return CheckResult(
        "implicit/dense matvec agreement", worst < 1e-12,
        f"max relative error {worst:.3e} over {n_cases} cases (bound 1e-12)")


def run_all(quick: bool = False) -> list[CheckResult]:
    n = 20 if quick else 100
    return [
        check_spectrum_oracle(n_batches=n),
        check_beamformer_oracle(n_systems=n),
        check_gradient(n_points=min(20, n)),
        check_step_size(n_batches=n),
        check_matvec_agreement(n_cases=min(50, n)),
    ]
