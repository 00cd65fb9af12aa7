"""Transverse-field Ising chain with periodic boundaries.

    H = -J sum_i s^z_i s^z_{i+1} - h sum_i s^x_i

Configurations are int8 arrays of +1/-1 in the s^z basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationShapeError


def as_configuration(spins, n_sites: int | None = None) -> np.ndarray:
    """Validate and return a configuration as an int8 array of +-1."""
    arr = np.asarray(spins)
    if arr.ndim != 1:
        raise ConfigurationShapeError(f"configuration must be 1-d, got shape {arr.shape}")
    if n_sites is not None and arr.shape[0] != n_sites:
        raise ConfigurationShapeError(
            f"configuration has {arr.shape[0]} sites, expected {n_sites}"
        )
    if not np.all((arr == 1) | (arr == -1)):
        raise ConfigurationShapeError("spin values must be exactly -1 or +1")
    return arr.astype(np.int8, copy=False)


@dataclass(frozen=True)
class TfiHamiltonian:
    n_sites: int
    h: float
    J: float = 1.0

    def __post_init__(self):
        if self.n_sites < 2:
            raise ValueError("need at least two sites")
        if self.J == 0:
            raise ValueError("J must be nonzero so that g = |h/J| is defined")

    @classmethod
    def from_g(cls, n_sites: int, g: float, J: float = 1.0) -> "TfiHamiltonian":
        return cls(n_sites=n_sites, h=g * abs(J), J=J)

    @property
    def g(self) -> float:
        return abs(self.h / self.J)


def diagonal_energy(config, H: TfiHamiltonian) -> float:
    s = as_configuration(config, H.n_sites).astype(np.int64)
    return float(-H.J * np.sum(s * np.roll(s, -1)))


def diagonal_energies(configs: np.ndarray, H: TfiHamiltonian) -> np.ndarray:
    """Vectorized diagonal energy for a (M, N) batch."""
    s = configs.astype(np.int64)
    return -H.J * np.sum(s * np.roll(s, -1, axis=1), axis=1).astype(np.float64)


def connections(config, H: TfiHamiltonian, sparse: bool = False):
    """Nonzero row of H: [(config, E_diag), (flip_0, -h), ..., (flip_{N-1}, -h)].

    With ``sparse=True`` the zero off-diagonal entries at h == 0 are omitted.
    """
    s = as_configuration(config, H.n_sites)
    out = [(s.copy(), complex(diagonal_energy(s, H)))]
    if sparse and H.h == 0:
        return out
    for i in range(H.n_sites):
        flipped = s.copy()
        flipped[i] = -flipped[i]
        out.append((flipped, complex(-H.h)))
    return out


def all_configurations(n_sites: int) -> np.ndarray:
    """All 2^N configurations; row index b has spin i = +1 iff bit i of b is 0."""
    idx = np.arange(2**n_sites, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(n_sites)) & 1
    return (1 - 2 * bits).astype(np.int8)


def configuration_index(config) -> int:
    s = np.asarray(config)
    bits = (s < 0).astype(np.int64)
    return int(np.sum(bits << np.arange(s.shape[0])))
