"""Implicit sample covariance and the maximum-entropy power spectrum.

The sample covariance R = (1/K) sum_t x(t) x(t)^H is never formed: every
product R z goes through the snapshots at O(MK) cost. The spectrum is built
from v = R^{-1} u1 (u1 the first canonical basis vector), obtained by a
matrix-free solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrays import SnapshotBatch, all_zero, batch_trace
from .errors import ConvergenceError, DegenerateInputError, IndefiniteOperatorError

__all__ = [
    "ImplicitSampleCovariance",
    "MepsSolution",
    "scm_matvec",
    "step_size_xi",
    "solve_v",
    "meps_power",
    "meps_power_grid",
]

#: iterations without residual improvement before a solve is declared stalled
STALL_WINDOW = 50


@dataclass(frozen=True)
class ImplicitSampleCovariance:
    """Sample covariance of a snapshot batch, applied only through matvecs.

    Optional diagonal loading adds ``diagonal_loading * I``. Immutable and
    safe for concurrent use.
    """

    snapshots: SnapshotBatch
    diagonal_loading: float = 0.0

    def __post_init__(self):
        if self.diagonal_loading < 0:
            raise ValueError(f"diagonal_loading must be >= 0, got {self.diagonal_loading}")

    @property
    def dim(self) -> int:
        return self.snapshots.num_sensors

    def matvec(self, z: np.ndarray) -> np.ndarray:
        return scm_matvec(self, z)

    def trace(self) -> float:
        return batch_trace(self.snapshots) + self.diagonal_loading * self.dim


def scm_matvec(cov: ImplicitSampleCovariance, z: np.ndarray) -> np.ndarray:
    """R z computed as (1/K) X (X^H z) + loading * z. Cost O(MK), no M x M temporary."""
    z = np.asarray(z)
    if z.shape != (cov.dim,):
        raise ValueError(f"expected vector of length {cov.dim}, got shape {z.shape}")
    x = cov.snapshots.data
    out = x @ (x.conj().T @ z) / cov.snapshots.num_snapshots
    if cov.diagonal_loading:
        out = out + cov.diagonal_loading * z
    return out


def step_size_xi(snapshots: SnapshotBatch) -> float:
    """Step size K / sum_t ||x(t)||^2 = 1/trace(R) for the fixed-step recursion.

    Satisfies 0 < xi <= 1/lambda_max because every eigenvalue of R is
    bounded by the mean squared snapshot norm.
    """
    if all_zero(snapshots):
        raise DegenerateInputError("step size undefined for an all-zero batch")
    return 1.0 / batch_trace(snapshots)


@dataclass(frozen=True)
class MepsSolution:
    """Solution v = R^{-1} u1 with the spectrum normalization epsilon_p."""

    v: np.ndarray
    epsilon_p: float
    iterations_used: int
    residual_norm: float


def _finalize_solution(v: np.ndarray, iterations: int, residual: float, strict: bool = True) -> MepsSolution:
    v0 = v[0]
    if strict:
        if abs(v0.imag) > 1e-6 * abs(v0):
            raise DegenerateInputError(f"v[0] should be real-positive, got {v0}")
        if v0.real <= 0:
            raise DegenerateInputError(f"Re(v[0]) must be > 0, got {v0}")
    re_v0 = v0.real if v0.real > 0 else np.finfo(float).tiny
    return MepsSolution(v, 1.0 / re_v0, iterations, residual)


def solve_v(
    cov: ImplicitSampleCovariance,
    tol: float = 1e-8,
    max_iter: int = 1000,
    method: str = "cg",
    callback=None,
) -> MepsSolution:
    """Solve R v = u1 without forming R.

    Parameters
    ----------
    cov : ImplicitSampleCovariance
    tol : float
        Relative residual target ||u1 - R v|| <= tol * ||u1||.
    max_iter : int
    method : {"cg", "fixed_step"}
        "cg" (default) is standard conjugate gradient; "fixed_step" is the
        plain recursion v <- v + xi (u1 - R v) with xi = 1/trace(R).
    callback : callable, optional
        Called with the residual norm after every iteration.

    Raises
    ------
    ConvergenceError
        If max_iter is exhausted or the residual stalls (singular or
        ill-conditioned covariance). Carries the best iterate.
    """
    if tol <= 0:
        raise ValueError(f"tol must be > 0, got {tol}")
    if method not in ("cg", "fixed_step"):
        raise ValueError(f"unknown method {method!r}")
    m = cov.dim
    u1 = np.zeros(m, dtype=np.complex128)
    u1[0] = 1.0

    if method == "fixed_step":
        if all_zero(cov.snapshots) and cov.diagonal_loading == 0:
            raise DegenerateInputError("cannot iterate on an all-zero, unloaded batch")
        xi = 1.0 / cov.trace()
        v = np.zeros(m, dtype=np.complex128)
        r = u1.copy()
        res = 1.0
        best_v, best_res, best_it = v.copy(), res, 0
        since_improvement = 0
        it = 0
        while res > tol and it < max_iter:
            if since_improvement >= STALL_WINDOW:
                raise ConvergenceError(
                    "fixed-step residual stalled (singular or ill-conditioned covariance)",
                    res, it, _finalize_solution(best_v, best_it, best_res, strict=False))
            q = cov.matvec(r)
            v = v + xi * r
            r = r - xi * q
            res = float(np.linalg.norm(r))
            it += 1
            if callback is not None:
                callback(res)
            if res < 0.999 * best_res:
                best_v, best_res, best_it = v.copy(), res, it
                since_improvement = 0
            else:
                since_improvement += 1
        if res <= tol:
            return _finalize_solution(v, it, res)
        raise ConvergenceError(
            f"fixed-step solve did not reach tol={tol} in {max_iter} iterations",
            res, it, _finalize_solution(v, it, res, strict=False))

    # conjugate gradient
    v = np.zeros(m, dtype=np.complex128)
    r = u1.copy()
    p = r.copy()
    rz = float(np.vdot(r, r).real)
    res = np.sqrt(rz)
    best_v, best_res, best_it = v.copy(), res, 0
    since_improvement = 0
    it = 0
    while res > tol and it < max_iter:
        q = cov.matvec(p)
        den = float(np.vdot(p, q).real)
        if den <= 0:
            raise IndefiniteOperatorError(
                f"non-positive curvature {den:.3e} in CG (singular covariance?)")
        alpha = rz / den
        v = v + alpha * p
        r = r - alpha * q
        rz_new = float(np.vdot(r, r).real)
        p = r + (rz_new / rz) * p
        rz = rz_new
        res = np.sqrt(rz)
        it += 1
        if callback is not None:
            callback(res)
        if res < 0.999 * best_res:
            best_v, best_res, best_it = v.copy(), res, it
            since_improvement = 0
        else:
            since_improvement += 1
            if since_improvement >= STALL_WINDOW:
                raise ConvergenceError(
                    "CG residual stalled (singular or ill-conditioned covariance)",
                    res, it, _finalize_solution(best_v, best_it, best_res, strict=False))
    if res > tol:
        raise ConvergenceError(
            f"CG did not reach tol={tol} in {max_iter} iterations",
            res, it, _finalize_solution(v, it, res, strict=False))
    return _finalize_solution(v, it, res)


def meps_power(sol: MepsSolution, a_theta: np.ndarray) -> float:
    """Maximum-entropy power at one steering vector: Re(v[0]) / |a^H v|^2."""
    a = np.asarray(a_theta)
    if a.shape != sol.v.shape:
        raise ValueError(f"expected steering vector of shape {sol.v.shape}, got {a.shape}")
    proj = np.vdot(a, sol.v)
    denom = abs(proj) ** 2
    floor = 1e-30 * float(np.vdot(a, a).real) * float(np.vdot(sol.v, sol.v).real)
    if denom <= floor:
        raise DegenerateInputError("steering vector is orthogonal to v; spectrum undefined here")
    return float(sol.v[0].real / denom)


def meps_power_grid(sol: MepsSolution, steering: np.ndarray) -> np.ndarray:
    """Vectorized meps_power over a stack of steering vectors (rows). Cost O(MG)."""
    a = np.asarray(steering)
    proj = a.conj() @ sol.v
    denom = np.abs(proj) ** 2
    floor = 1e-30 * np.sum(np.abs(a) ** 2, axis=1) * float(np.vdot(sol.v, sol.v).real)
    if np.any(denom <= floor):
        raise DegenerateInputError("spectrum degenerate at one or more grid angles")
    return sol.v[0].real / denom
