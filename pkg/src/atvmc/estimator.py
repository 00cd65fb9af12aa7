"""Statistical estimates of S, F, energy moments and sigma_x.

Two modes share one assembly routine:

* :class:`ExactSumEstimator` -- weights |psi|^2/||psi||^2 over all 2^N states.
* :class:`MetropolisEstimator` -- single-spin-flip chains run by the kernels.

The bundle always carries the active-active block of S, the full force vector,
S_ll for each frozen l and the frozen-active cross entries. Frozen-frozen
off-diagonal entries are left as NaN.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .ansatz import Ansatz, JastrowAnsatz, ParameterState, SymmetricRbmAnsatz
from .errors import CapacityError, NumericDomainError, SamplerStallError
from .model import TfiHamiltonian, all_configurations, as_configuration, diagonal_energies, diagonal_energy

DEFAULT_ENUMERATION_CAP = 14


@dataclass(frozen=True)
class SamplerConfig:
    n_samples: int
    n_burn: int = 100
    n_chains: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.n_samples <= 0:
            raise ValueError("n_samples must be positive")
        if self.n_chains < 1:
            raise ValueError("n_chains must be at least 1")
        if self.n_burn < 0:
            raise ValueError("n_burn must be non-negative")

    def samples_per_chain(self) -> list[int]:
        base, extra = divmod(self.n_samples, self.n_chains)
        return [base + (c < extra) for c in range(self.n_chains)]


@dataclass(frozen=True)
class EstimateBundle:
    S: np.ndarray
    F: np.ndarray
    energy_mean: complex
    energy_variance: float
    observables: dict
    sample_count: int
    stats_mode: str
    active: np.ndarray
    standard_errors: dict = field(default_factory=dict)
    # centered per-sample data on the active block, kept for SNR statistics
    O_centered: np.ndarray | None = None
    E_centered: np.ndarray | None = None
    acceptance: float | None = None

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def frozen_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.active)

    def S_active(self) -> np.ndarray:
        a = self.active_indices
        return self.S[np.ix_(a, a)]

    def F_active(self) -> np.ndarray:
        return self.F[self.active]

    def cross(self, l: int) -> np.ndarray:
        """V_l: entries S_{k,l} for active k."""
        return self.S[self.active_indices, l]


def local_energy(config, params, H: TfiHamiltonian, ansatz: Ansatz) -> complex:
    """<x|H|psi>/<x|psi> for a single configuration."""
    s = as_configuration(config, H.n_sites)
    values = params.values if isinstance(params, ParameterState) else np.asarray(params)
    ratios = ansatz.flip_log_ratios_batch(s[None, :], ansatz._check_values(values))[0]
    with np.errstate(over="ignore", invalid="ignore"):
        weights = np.exp(ratios)
    bad = np.flatnonzero(~np.isfinite(weights))
    if bad.size:
        raise NumericDomainError(f"non-finite flip ratio at site {bad[0]}", site=int(bad[0]))
    return complex(diagonal_energy(s, H) - H.h * np.sum(weights))


def _assemble(O, eloc, sxloc, w, active, mode, n, keep_samples=False, chain_slices=None, acceptance=None):
    """Two-pass weighted covariances on centered data."""
    P = O.shape[1]
    e_mean = np.sum(w * eloc)
    O_mean = w @ O
    dO = O - O_mean[None, :]
    dE = eloc - e_mean
    a = np.flatnonzero(active)
    f = np.flatnonzero(~active)
    wdO_a = w[:, None] * dO[:, a]

    S = np.full((P, P), np.nan, dtype=np.complex128)
    S_aa = dO[:, a].conj().T @ wdO_a
    S[np.ix_(a, a)] = 0.5 * (S_aa + S_aa.conj().T)
    if f.size:
        S_fa = dO[:, f].conj().T @ wdO_a
        S[np.ix_(f, a)] = S_fa
        S[np.ix_(a, f)] = S_fa.conj().T
        S[f, f] = np.sum(w[:, None] * np.abs(dO[:, f]) ** 2, axis=0)
    F = dO.conj().T @ (w * dE)
    var = float(np.sum(w * np.abs(dE) ** 2))
    sx = float(np.sum(w * sxloc).real)

    errors = {}
    if chain_slices is not None:
        chain_sx = np.array([np.mean(sxloc[sl].real) for sl in chain_slices])
        chain_e = np.array([np.mean(eloc[sl].real) for sl in chain_slices])
        if len(chain_slices) >= 2:
            c = len(chain_slices)
            errors["sigma_x"] = float(np.std(chain_sx, ddof=1) / np.sqrt(c))
            errors["energy"] = float(np.std(chain_e, ddof=1) / np.sqrt(c))
        else:
            errors["sigma_x"] = float(np.std(sxloc.real) / np.sqrt(n))
            errors["energy"] = float(np.std(eloc.real) / np.sqrt(n))

    return EstimateBundle(
        S=S,
        F=F,
        energy_mean=complex(e_mean),
        energy_variance=max(var, 0.0),
        observables={"sigma_x": sx, "energy": float(e_mean.real)},
        sample_count=n,
        stats_mode=mode,
        active=active.copy(),
        standard_errors=errors,
        O_centered=dO[:, a] if keep_samples else None,
        E_centered=dE if keep_samples else None,
        acceptance=acceptance,
    )


class ExactSumEstimator:
    """Enumerates all 2^N configurations (N <= cap)."""

    stats_mode = "exact-sum"

    def __init__(self, ansatz: Ansatz, H: TfiHamiltonian, cap: int = DEFAULT_ENUMERATION_CAP):
        if ansatz.n_sites != H.n_sites:
            raise ValueError("ansatz and Hamiltonian disagree on N")
        if H.n_sites > cap:
            raise CapacityError(f"N={H.n_sites} exceeds the enumeration cap {cap}")
        self.ansatz = ansatz
        self.H = H
        self.configs = all_configurations(H.n_sites)
        idx = np.arange(self.configs.shape[0])
        self.flip_index = idx[:, None] ^ (1 << np.arange(H.n_sites))[None, :]
        self.diag = diagonal_energies(self.configs, H)
        self._corr = (
            ansatz.correlators(self.configs).astype(np.complex128)
            if isinstance(ansatz, JastrowAnsatz)
            else None
        )

    def probabilities(self, values) -> tuple[np.ndarray, np.ndarray]:
        lp = self.ansatz.log_psi_batch(self.configs, values)
        re = 2.0 * lp.real
        p = np.exp(re - re.max())
        return p / p.sum(), lp

    def dense_state(self, params) -> np.ndarray:
        """Normalized amplitude vector in the fixed bit-order basis."""
        values = params.values if isinstance(params, ParameterState) else np.asarray(params)
        lp = self.ansatz.log_psi_batch(self.configs, self.ansatz._check_values(values))
        psi = np.exp(lp - lp.real.max())
        return psi / np.linalg.norm(psi)

    def local_quantities(self, values):
        p, lp = self.probabilities(values)
        support = p > 0
        with np.errstate(over="ignore", invalid="ignore"):
            ratios = np.exp(lp[self.flip_index] - lp[:, None])
        ratios[~support] = 0.0
        bad = ~np.isfinite(ratios)
        if bad.any():
            site = int(np.argwhere(bad)[0, 1])
            raise NumericDomainError(f"non-finite flip ratio at site {site}", site=site)
        flips = ratios.sum(axis=1)
        eloc = self.diag - self.H.h * flips
        return p, eloc, flips / self.H.n_sites

    def __call__(self, params: ParameterState) -> EstimateBundle:
        values = self.ansatz._check_values(params.values)
        p, eloc, sxloc = self.local_quantities(values)
        if self._corr is not None:
            O = self._corr
        else:
            O = self.ansatz.log_derivatives_batch(self.configs, values)
        return _assemble(O, eloc, sxloc, p, params.active, self.stats_mode, self.configs.shape[0])


class MetropolisEstimator:
    """Single-spin-flip Metropolis with persistent chains.

    Randomness for call number ``k`` and chain ``c`` comes from a Philox
    stream keyed by ``SeedSequence(seed, spawn_key=(k, c))``.
    """

    stats_mode = "metropolis"

    def __init__(self, ansatz: Ansatz, H: TfiHamiltonian, sampler: SamplerConfig, backend: str | None = None):
        if ansatz.n_sites != H.n_sites:
            raise ValueError("ansatz and Hamiltonian disagree on N")
        self.ansatz = ansatz
        self.H = H
        self.sampler = sampler
        self.kernels = kernels.get_backend(backend)
        init = np.random.Generator(np.random.Philox(np.random.SeedSequence(sampler.seed, spawn_key=(0,))))
        self.chains = np.where(init.random((sampler.n_chains, H.n_sites)) < 0.5, 1, -1).astype(np.int8)
        self.calls = 0

    def _rng(self, chain: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.sampler.seed, spawn_key=(self.calls, chain))
        return np.random.Generator(np.random.Philox(ss))

    def _run_chain(self, c: int, values: np.ndarray, n_keep: int):
        N = self.H.n_sites
        n_burn = self.sampler.n_burn
        uniforms = self._rng(c).random((n_burn + n_keep) * N)
        spins = np.ascontiguousarray(self.chains[c])
        if isinstance(self.ansatz, JastrowAnsatz):
            out = self.kernels.jastrow_chain(
                spins, np.ascontiguousarray(values), uniforms, n_burn, n_keep, float(self.H.J), float(self.H.h)
            )
        elif isinstance(self.ansatz, SymmetricRbmAnsatz):
            a, b, W = self.ansatz.split(values)
            out = self.kernels.rbm_chain(
                spins,
                complex(a),
                np.ascontiguousarray(b),
                np.ascontiguousarray(W),
                uniforms,
                n_burn,
                n_keep,
                float(self.H.J),
                float(self.H.h),
            )
        else:
            raise TypeError(f"no kernel for ansatz {type(self.ansatz).__name__}")
        self.chains[c] = spins
        return out

    def __call__(self, params: ParameterState) -> EstimateBundle:
        values = self.ansatz._check_values(params.values)
        self.calls += 1
        parts = []
        acc_burn = acc_keep = 0
        for c, n_keep in enumerate(self.sampler.samples_per_chain()):
            O, eloc, sx, ab, ak = self._run_chain(c, values, n_keep)
            parts.append((O, eloc, sx))
            acc_burn += ab
            acc_keep += ak
        N = self.H.n_sites
        if self.sampler.n_burn > 0 and acc_burn == 0:
            raise SamplerStallError("no move accepted during burn-in (degenerate wave function?)")
        O = np.concatenate([p[0] for p in parts])
        eloc = np.concatenate([p[1] for p in parts])
        sxloc = np.concatenate([p[2] for p in parts])
        if not (np.all(np.isfinite(eloc)) and np.all(np.isfinite(O))):
            raise NumericDomainError("non-finite local quantity in Metropolis samples")
        n = eloc.shape[0]
        bounds = np.cumsum([0] + [p[1].shape[0] for p in parts])
        slices = [slice(bounds[i], bounds[i + 1]) for i in range(len(parts))]
        w = np.full(n, 1.0 / n)
        return _assemble(
            O,
            eloc,
            sxloc,
            w,
            params.active,
            self.stats_mode,
            n,
            keep_samples=True,
            chain_slices=slices,
            acceptance=acc_keep / max(1, n * N),
        )


def estimate_exact_sum(params: ParameterState, H: TfiHamiltonian, ansatz: Ansatz, cap: int = DEFAULT_ENUMERATION_CAP):
    return ExactSumEstimator(ansatz, H, cap)(params)


def estimate_metropolis(params: ParameterState, H: TfiHamiltonian, ansatz: Ansatz, sampler: SamplerConfig):
    return MetropolisEstimator(ansatz, H, sampler)(params)
