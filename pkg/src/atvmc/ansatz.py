"""Variational wave functions with holomorphic complex parameters.

Two translation-invariant ansatze are provided:

* :class:`JastrowAnsatz` -- one coupling per periodic distance d = 1..N//2.
* :class:`SymmetricRbmAnsatz` -- RBM with ``density`` filters, each applied
  at all N cyclic shifts, plus a single shared visible bias.

Every method accepts either a :class:`ParameterState` or a raw complex vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationShapeError, NumericDomainError
from .model import as_configuration

_LOG2 = np.log(2.0)


def lncosh(z):
    """ln cosh z, overflow-safe for large |Re z|.

    Uses cosh(z) = cosh(-z) to keep Re z >= 0, then
    ln cosh z = z + ln(1 + e^{-2z}) - ln 2. The imaginary part may differ
    from the principal branch by multiples of 2*pi, which cancels in ratios.
    """
    z = np.asarray(z, dtype=np.complex128)
    z = np.where(z.real < 0, -z, z)
    return z + np.log1p(np.exp(-2.0 * z)) - _LOG2


@dataclass
class ParameterState:
    values: np.ndarray
    active: np.ndarray
    labels: tuple = field(default_factory=tuple)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.complex128)
        self.active = np.asarray(self.active, dtype=bool)
        if self.values.shape != self.active.shape or self.values.ndim != 1:
            raise ValueError("values and active must be 1-d arrays of equal length")
        if self.labels and len(self.labels) != self.values.shape[0]:
            raise ValueError("one label per parameter required")
        self.labels = tuple(self.labels)

    @property
    def n_params(self) -> int:
        return self.values.shape[0]

    @property
    def n_active(self) -> int:
        return int(self.active.sum())

    @property
    def active_indices(self) -> np.ndarray:
        return np.flatnonzero(self.active)

    @property
    def frozen_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.active)

    def copy(self) -> "ParameterState":
        return ParameterState(self.values.copy(), self.active.copy(), self.labels)

    def with_values(self, values) -> "ParameterState":
        return ParameterState(np.array(values, dtype=np.complex128), self.active.copy(), self.labels)

    def to_records(self):
        return [(lab, float(v.real), float(v.imag)) for lab, v in zip(self.labels, self.values)]


def _values_of(params) -> np.ndarray:
    if isinstance(params, ParameterState):
        vals = params.values
    else:
        vals = np.asarray(params, dtype=np.complex128)
    if not np.all(np.isfinite(vals)):
        raise NumericDomainError("non-finite variational parameter")
    return vals


class Ansatz:
    """Common interface. Subclasses fill in the batched kernels."""

    kind: str = ""

    def __init__(self, n_sites: int):
        if n_sites < 2:
            raise ValueError("need at least two sites")
        self.n_sites = n_sites

    n_params: int
    labels: tuple

    def _check_values(self, params) -> np.ndarray:
        vals = _values_of(params)
        if vals.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {vals.shape}")
        return vals

    def new_state(self, values=None) -> ParameterState:
        if values is None:
            values = np.zeros(self.n_params, dtype=np.complex128)
        values = np.asarray(values, dtype=np.complex128)
        if values.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters")
        return ParameterState(values.copy(), np.ones(self.n_params, dtype=bool), self.labels)

    def random_state(self, rng: np.random.Generator, scale: float = 1e-2) -> ParameterState:
        vals = scale * (rng.standard_normal(self.n_params) + 1j * rng.standard_normal(self.n_params))
        return self.new_state(vals / np.sqrt(2.0))

    # single-configuration API, thin wrappers over the batched versions

    def log_psi(self, config, params) -> complex:
        s = as_configuration(config, self.n_sites)
        return complex(self.log_psi_batch(s[None, :], self._check_values(params))[0])

    def log_derivatives(self, config, params) -> np.ndarray:
        s = as_configuration(config, self.n_sites)
        return self.log_derivatives_batch(s[None, :], self._check_values(params))[0]

    def log_psi_ratio_flip(self, config, site: int, params) -> complex:
        s = as_configuration(config, self.n_sites)
        if not 0 <= site < self.n_sites:
            raise IndexError(f"site {site} out of range for N={self.n_sites}")
        return complex(self.flip_log_ratios_batch(s[None, :], self._check_values(params))[0, site])

    def log_psi_batch(self, configs: np.ndarray, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_derivatives_batch(self, configs: np.ndarray, values: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def flip_log_ratios_batch(self, configs: np.ndarray, values: np.ndarray) -> np.ndarray:
        """(M, N) array: ln psi(x with spin i flipped) - ln psi(x)."""
        raise NotImplementedError


class JastrowAnsatz(Ansatz):
    """psi(s) = exp(sum_d alpha_d C_d(s)), C_d the sum of s_i s_j over pairs at distance d."""

    kind = "jastrow"

    def __init__(self, n_sites: int):
        super().__init__(n_sites)
        self.n_params = n_sites // 2
        self.labels = tuple(f"jastrow-distance-{d}" for d in range(1, self.n_params + 1))
        # pair lists, each unordered pair i<j exactly once
        self.pairs = []
        for d in range(1, self.n_params + 1):
            if 2 * d == n_sites:
                first = np.arange(n_sites // 2)
            else:
                first = np.arange(n_sites)
            self.pairs.append((first, (first + d) % n_sites))
        # neighbor weights: flip at site i changes ln psi by -2 s_i sum_d alpha_d nb_d(i)
        # where nb_d(i) = s_{i+d} + s_{i-d} (just s_{i+N/2} at the antipode)
        self.neighbor_offsets = []
        for d in range(1, self.n_params + 1):
            self.neighbor_offsets.append((d,) if 2 * d == n_sites else (d, -d))

    def correlators(self, configs: np.ndarray) -> np.ndarray:
        s = configs.astype(np.float64)
        out = np.empty((s.shape[0], self.n_params))
        for k, (i, j) in enumerate(self.pairs):
            out[:, k] = np.sum(s[:, i] * s[:, j], axis=1)
        return out

    def log_psi_batch(self, configs, values):
        values = self._check_values(values)
        return self.correlators(configs) @ values

    def log_derivatives_batch(self, configs, values):
        self._check_values(values)
        return self.correlators(configs).astype(np.complex128)

    def local_fields(self, configs: np.ndarray, values: np.ndarray) -> np.ndarray:
        s = configs.astype(np.float64)
        field_ = np.zeros(s.shape, dtype=np.complex128)
        for alpha, offsets in zip(values, self.neighbor_offsets):
            for off in offsets:
                field_ += alpha * np.roll(s, -off, axis=1)
        return field_

    def flip_log_ratios_batch(self, configs, values):
        values = self._check_values(values)
        return -2.0 * configs.astype(np.float64) * self.local_fields(configs, values)


class SymmetricRbmAnsatz(Ansatz):
    """Translation-invariant RBM with ``density`` weight filters.

    Parameter layout: [a, b_0..b_{d-1}, W_0[0..N-1], ..., W_{d-1}[0..N-1]].
    Hidden unit (f, s) sees theta = b_f + sum_i W_f[(i - s) mod N] s_i.
    """

    kind = "rbm"

    def __init__(self, n_sites: int, density: int):
        super().__init__(n_sites)
        if density < 1 or int(density) != density:
            raise ValueError("hidden-variable density must be a positive integer")
        self.density = int(density)
        d, n = self.density, n_sites
        self.n_params = n * d + d + 1
        self.labels = tuple(
            ["rbm-visible-bias"]
            + [f"rbm-hidden-bias-{f}" for f in range(d)]
            + [f"rbm-weight-{f}-{k}" for f in range(d) for k in range(n)]
        )
        # (s, i) -> (i - s) mod N, the filter offset seen by hidden unit shift s
        self._offset = (np.arange(n)[None, :] - np.arange(n)[:, None]) % n

    def split(self, values: np.ndarray):
        d, n = self.density, self.n_sites
        a = values[0]
        b = values[1 : 1 + d]
        W = values[1 + d :].reshape(d, n)
        return a, b, W

    def full_weights(self, values: np.ndarray) -> np.ndarray:
        """(d*N, N) dense weight matrix, row f*N + s."""
        _, _, W = self.split(values)
        return W[:, self._offset].reshape(self.density * self.n_sites, self.n_sites)

    def thetas(self, configs: np.ndarray, values: np.ndarray) -> np.ndarray:
        _, b, _ = self.split(values)
        Wfull = self.full_weights(values)
        return configs.astype(np.float64) @ Wfull.T + np.repeat(b, self.n_sites)[None, :]

    def log_psi_batch(self, configs, values):
        values = self._check_values(values)
        a = values[0]
        theta = self.thetas(configs, values)
        return a * configs.sum(axis=1) + lncosh(theta).sum(axis=1)

    def log_derivatives_batch(self, configs, values):
        values = self._check_values(values)
        m, n, d = configs.shape[0], self.n_sites, self.density
        t = np.tanh(self.thetas(configs, values)).reshape(m, d, n)
        out = np.empty((m, self.n_params), dtype=np.complex128)
        out[:, 0] = configs.sum(axis=1)
        out[:, 1 : 1 + d] = t.sum(axis=2)
        # W derivative is the circular correlation sum_s t[f, s] sigma[s + k], done by FFT
        spins_hat = np.fft.fft(configs.astype(np.float64), axis=1)[:, None, :]
        corr = np.fft.ifft(n * np.fft.ifft(t, axis=2) * spins_hat, axis=2)
        out[:, 1 + d :] = corr.reshape(m, d * n)
        return out

    def flip_log_ratios_batch(self, configs, values):
        values = self._check_values(values)
        a = values[0]
        s = configs.astype(np.float64)
        theta = self.thetas(configs, values)
        base = lncosh(theta)
        Wfull = self.full_weights(values)
        out = np.empty(configs.shape, dtype=np.complex128)
        for i in range(self.n_sites):
            shifted = theta - 2.0 * s[:, i : i + 1] * Wfull[:, i][None, :]
            out[:, i] = -2.0 * a * s[:, i] + (lncosh(shifted) - base).sum(axis=1)
        return out


def make_ansatz(kind: str, n_sites: int, density: int | None = None) -> Ansatz:
    if kind == "jastrow":
        return JastrowAnsatz(n_sites)
    if kind == "rbm":
        if density is None:
            raise ValueError("rbm ansatz needs a hidden-variable density")
        return SymmetricRbmAnsatz(n_sites, density)
    raise ValueError(f"unknown ansatz kind {kind!r}")


__all__ = [
    "Ansatz",
    "ConfigurationShapeError",
    "JastrowAnsatz",
    "ParameterState",
    "SymmetricRbmAnsatz",
    "lncosh",
    "make_ansatz",
]
