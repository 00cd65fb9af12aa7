"""Ground-state preparation by stochastic reconfiguration.

SR is imaginary-time tVMC: with the same S and F, the update is
delta_alpha = -eta (S + shift)^-1 F, obtained by reusing the tVMC solver with a
diagonal-shift policy.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .ansatz import Ansatz, ParameterState
from .errors import OptimizationStallError
from .model import TfiHamiltonian
from .tvmc import SolverPolicy, solve_equations_of_motion

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SrConfig:
    learning_rate: float = 0.02
    iterations: int = 2000
    diagonal_shift: float = 1e-3
    shift_decay: float = 0.9
    shift_decay_every: int = 100
    shift_floor: float = 1e-5
    tol: float = 1e-8
    tol_window: int = 50
    stall_window: int = 500
    init_scale: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.diagonal_shift < self.shift_floor:
            raise ValueError("diagonal_shift below its floor")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")

    def shift_at(self, iteration: int) -> float:
        k = iteration // self.shift_decay_every
        return max(self.diagonal_shift * self.shift_decay**k, self.shift_floor)


@dataclass
class GroundStateResult:
    params: ParameterState
    energy: float
    variance: float
    iterations: int
    converged: bool
    energies: list = field(default_factory=list)


def optimize_ground_state(ansatz: Ansatz, H: TfiHamiltonian, sr: SrConfig, estimator,
                          initial: ParameterState | None = None) -> GroundStateResult:
    """Minimize <H> over the ansatz.

    ``estimator`` maps a ParameterState to an EstimateBundle (exact-sum or
    Metropolis). In exact-sum mode the lowest-energy iterate is returned, with
    sampling noise the last one.
    """
    if initial is None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(sr.seed, spawn_key=(1,))))
        params = ansatz.random_state(rng, sr.init_scale)
    else:
        params = initial.copy()
        params.active[:] = True
    exact = getattr(estimator, "stats_mode", "") == "exact-sum"

    energies = []
    best = (np.inf, params.copy(), np.nan)
    last_improvement = 0
    converged = False
    it = 0
    for it in range(sr.iterations + 1):
        bundle = estimator(params)
        e = bundle.energy_mean.real
        energies.append(e)
        if e < best[0]:
            best = (e, params.copy(), bundle.energy_variance)
            last_improvement = it
        if it >= sr.tol_window:
            ref = energies[it - sr.tol_window]
            if abs(e - ref) < sr.tol * max(abs(e), 1e-300):
                converged = True
                break
        if it - last_improvement >= sr.stall_window:
            raise OptimizationStallError(
                f"energy has not decreased for {sr.stall_window} iterations (best {best[0]:.10g})"
            )
        if it == sr.iterations:
            break
        policy = SolverPolicy(pinv_rtol=1e-12, diagonal_shift=sr.shift_at(it))
        alpha_dot, _ = solve_equations_of_motion(bundle.S_active(), bundle.F_active(), policy)
        # (S + shift)^-1 F = i * alpha_dot
        step = -sr.learning_rate * 1j * alpha_dot
        params = params.with_values(params.values + step)
        if it % 100 == 0:
            log.info("SR iteration %d: E=%.10f Var=%.3e", it, e, bundle.energy_variance)

    if exact:
        energy, final, variance = best
    else:
        final, energy, variance = params, energies[-1], bundle.energy_variance
    return GroundStateResult(final, float(energy), float(variance), it, converged, energies)
