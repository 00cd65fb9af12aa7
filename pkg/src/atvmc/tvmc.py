"""Regularized equations of motion, LITE diagnostics and time integrators.

Units: hbar = 1. The equations of motion read  i S alpha_dot = F.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .ansatz import ParameterState
from .errors import RankZeroError, StiffnessError
from .estimator import EstimateBundle

log = logging.getLogger(__name__)

NEGATIVE_LITE_WARNING = -1e-8


@dataclass(frozen=True)
class SolverPolicy:
    kind: str = "pseudoinverse"
    pinv_rtol: float = 1e-7
    snr_threshold: float = 4.0
    diagonal_shift: float = 0.0

    def __post_init__(self):
        if self.kind not in ("pseudoinverse", "snr"):
            raise ValueError(f"unknown solver kind {self.kind!r}")
        if not 0 < self.pinv_rtol < 1:
            raise ValueError("pinv_rtol must lie in (0, 1)")
        if not self.snr_threshold > 0:
            raise ValueError("snr_threshold must be positive")
        if self.diagonal_shift < 0:
            raise ValueError("diagonal_shift must be non-negative")


@dataclass
class SolveMeta:
    rank: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    kept: np.ndarray
    S_inv: np.ndarray
    discarded_mass: float
    snr: np.ndarray | None = None

    @property
    def full_rank(self) -> bool:
        return self.rank == self.eigenvalues.shape[0]


def _hermitize(S: np.ndarray) -> np.ndarray:
    S = np.asarray(S, dtype=np.complex128)
    return 0.5 * (S + S.conj().T)


def force_snr(eigenvectors: np.ndarray, O_centered: np.ndarray, E_centered: np.ndarray) -> np.ndarray:
    """|F_k| / (sigma(F_k)/sqrt(n)) for the force rotated into the S eigenbasis."""
    n = E_centered.shape[0]
    per_sample = (O_centered.conj() * E_centered[:, None]) @ eigenvectors.conj()
    mean = per_sample.mean(axis=0)
    sigma = np.sqrt(np.mean(np.abs(per_sample - mean[None, :]) ** 2, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = np.abs(mean) / (sigma / np.sqrt(n))
    return np.where(sigma > 0, snr, np.inf)


def solve_equations_of_motion(S, F, policy: SolverPolicy = SolverPolicy(), samples=None):
    """alpha_dot = -i S^+ F with an eigenvalue-cutoff pseudoinverse.

    ``samples`` is an optional (O_centered, E_centered) pair used by the SNR
    policy; without it the force is treated as noise-free.
    """
    S = _hermitize(S)
    F = np.asarray(F, dtype=np.complex128)
    if S.shape != (F.shape[0], F.shape[0]):
        raise ValueError(f"S of shape {S.shape} does not match F of length {F.shape[0]}")
    if F.shape[0] == 0:
        raise RankZeroError("no active parameters")
    if policy.diagonal_shift:
        S = S + policy.diagonal_shift * np.eye(S.shape[0])
    lam, V = np.linalg.eigh(S)
    top = lam[-1]
    if not top > 0:
        raise RankZeroError("quantum geometric tensor has no positive eigenvalue")
    kept = lam > policy.pinv_rtol * top
    snr = None
    if policy.kind == "snr" and samples is not None and np.isfinite(policy.snr_threshold):
        snr = force_snr(V, *samples)
        kept &= snr >= policy.snr_threshold
    if not kept.any():
        raise RankZeroError("every eigen-direction of S was discarded")
    Vk = V[:, kept]
    S_inv = (Vk / lam[kept][None, :]) @ Vk.conj().T
    alpha_dot = -1j * (Vk @ ((Vk.conj().T @ F) / lam[kept]))
    # one step of iterative refinement; the residual is round-off amplified by cond(S)
    alpha_dot += S_inv @ (-1j * F - S @ alpha_dot)
    meta = SolveMeta(
        rank=int(kept.sum()),
        eigenvalues=lam,
        eigenvectors=V,
        kept=kept,
        S_inv=S_inv,
        discarded_mass=float(np.sum(np.abs(lam[~kept]))),
        snr=snr,
    )
    return alpha_dot, meta


def lite_squared_raw(var_h: float, S, alpha_dot) -> float:
    alpha_dot = np.asarray(alpha_dot)
    return float(var_h - np.real(alpha_dot.conj() @ (np.asarray(S) @ alpha_dot)))


def lite_squared(var_h: float, S, alpha_dot) -> float:
    """eps^2 = Var(H) - alpha_dot^dagger S alpha_dot, clamped at zero."""
    raw = lite_squared_raw(var_h, S, alpha_dot)
    if raw < NEGATIVE_LITE_WARNING:
        warnings.warn(f"negative squared LITE {raw:.3e}: estimator inconsistency", RuntimeWarning, stacklevel=2)
    return max(0.0, raw)


def fs_error_squared(var_h: float, S, F, alpha_dot) -> float:
    """Fubini-Study error rate for an arbitrary alpha_dot."""
    a = np.asarray(alpha_dot, dtype=np.complex128)
    F = np.asarray(F, dtype=np.complex128)
    quad = a.conj() @ (np.asarray(S) @ a)
    val = var_h + quad + 1j * (a.conj() @ F) - 1j * (F.conj() @ a)
    return float(val.real)


@dataclass
class LiteReport:
    epsilon_sq: float
    epsilon_sq_raw: float
    fs_epsilon_sq: float
    var_h: float
    threshold: float = float("nan")
    cumulative_bound: float = 0.0


def accumulate_global_bound(report: LiteReport, dt: float) -> float:
    """Left-endpoint update of the integral of eps dt."""
    return report.cumulative_bound + np.sqrt(max(report.epsilon_sq, 0.0)) * dt


@dataclass
class Derivative:
    """Result of one estimate + solve at fixed parameters."""

    alpha_dot: np.ndarray  # length P, exactly zero on frozen entries
    bundle: EstimateBundle
    meta: SolveMeta
    epsilon_sq: float
    epsilon_sq_raw: float

    @property
    def alpha_dot_active(self) -> np.ndarray:
        return self.alpha_dot[self.bundle.active]


class TvmcIntegrator:
    """Euler/Heun stepping of the active parameters.

    ``estimator`` maps a ParameterState to an EstimateBundle.
    """

    def __init__(self, estimator: Callable[[ParameterState], EstimateBundle], policy: SolverPolicy = SolverPolicy()):
        self.estimator = estimator
        self.policy = policy
        self.n_estimates = 0

    def derivative(self, params: ParameterState) -> Derivative:
        bundle = self.estimator(params)
        self.n_estimates += 1
        S = bundle.S_active()
        F = bundle.F_active()
        samples = None
        if bundle.O_centered is not None:
            samples = (bundle.O_centered, bundle.E_centered)
        ad, meta = solve_equations_of_motion(S, F, self.policy, samples)
        full = np.zeros(params.n_params, dtype=np.complex128)
        full[bundle.active] = ad
        raw = lite_squared_raw(bundle.energy_variance, S, ad)
        if raw < NEGATIVE_LITE_WARNING:
            log.warning("negative squared LITE %.3e before clamping", raw)
        return Derivative(full, bundle, meta, max(0.0, raw), raw)

    def step_euler(self, params: ParameterState, dt: float, first: Derivative | None = None):
        if dt < 0:
            raise ValueError("dt must be non-negative")
        if dt == 0:
            return params.copy(), first
        d1 = first if first is not None else self.derivative(params)
        new = params.values.copy()
        a = params.active
        new[a] = params.values[a] + d1.alpha_dot[a] * dt
        return params.with_values(new), d1

    def step_heun(self, params: ParameterState, dt: float, first: Derivative | None = None):
        if dt < 0:
            raise ValueError("dt must be non-negative")
        if dt == 0:
            return params.copy(), first
        d1 = first if first is not None else self.derivative(params)
        a = params.active
        pred = params.values.copy()
        pred[a] = params.values[a] + d1.alpha_dot[a] * dt
        d2 = self.derivative(params.with_values(pred))
        new = params.values.copy()
        new[a] = params.values[a] + 0.5 * (d1.alpha_dot[a] + d2.alpha_dot[a]) * dt
        return params.with_values(new), d1


@dataclass
class StepSizeController:
    """Step-doubling control for Heun steps.

    The discrepancy is ||one full step - two half steps|| measured against
    1 + ||alpha|| (relative for large parameter vectors, absolute for small
    ones). Normalizing by the parameters rather than by the step itself keeps
    the measure proportional to dt when the right-hand side jumps (a
    pseudoinverse rank change) or carries sampling noise, so halving dt can
    always get past such points.
    """

    tol: float
    dt_min: float = 1e-7
    dt_max: float = 0.05
    grow: float = 1.3
    history: list = field(default_factory=list)

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol_step must be positive")

    @staticmethod
    def discrepancy(start: np.ndarray, full: np.ndarray, halves: np.ndarray) -> float:
        return float(np.linalg.norm(full - halves) / (1.0 + np.linalg.norm(halves)))

    def decide(self, discrepancy: float, dt: float) -> tuple[bool, float]:
        if discrepancy > self.tol:
            dt_next = 0.5 * dt
            if dt_next < self.dt_min:
                raise StiffnessError(f"time step underflow: dt={dt_next:.3e} < dt_min={self.dt_min:.3e}")
            return False, dt_next
        if discrepancy < 0.25 * self.tol:
            return True, min(self.grow * dt, self.dt_max)
        return True, dt


def adaptive_step_control(integrator: TvmcIntegrator, params: ParameterState, dt: float,
                          controller: StepSizeController, first: Derivative | None = None):
    """Attempt one controlled Heun step.

    Returns (accepted, dt_next, new_params, first_derivative, discrepancy).
    On acceptance ``new_params`` is the two-half-step result.
    """
    d1 = first if first is not None else integrator.derivative(params)
    full, _ = integrator.step_heun(params, dt, d1)
    mid, _ = integrator.step_heun(params, 0.5 * dt, d1)
    halves, _ = integrator.step_heun(mid, 0.5 * dt)
    disc = controller.discrepancy(params.values, full.values, halves.values)
    accepted, dt_next = controller.decide(disc, dt)
    controller.history.append((dt, disc, accepted))
    return accepted, dt_next, (halves if accepted else params), d1, disc
