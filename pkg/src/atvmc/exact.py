"""Exact reference dynamics for small chains (N <= cap).

Basis convention shared with :func:`atvmc.model.all_configurations`: basis index
b has spin i = +1 iff bit i of b is 0.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .ansatz import Ansatz, ParameterState
from .errors import CapacityError, OracleError
from .model import TfiHamiltonian, all_configurations, diagonal_energies

DEFAULT_ORACLE_CAP = 14


def build_hamiltonian(H: TfiHamiltonian, cap: int = DEFAULT_ORACLE_CAP) -> sp.csr_matrix:
    N = H.n_sites
    if N > cap:
        raise CapacityError(f"N={N} exceeds the oracle cap {cap}")
    dim = 2**N
    diag = diagonal_energies(all_configurations(N), H)
    idx = np.arange(dim)
    rows = [idx]
    cols = [idx]
    vals = [diag]
    if H.h != 0:
        for i in range(N):
            rows.append(idx)
            cols.append(idx ^ (1 << i))
            vals.append(np.full(dim, -H.h))
    mat = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
    )
    return mat.tocsr().astype(np.complex128)


def exact_ground_state(H: TfiHamiltonian, cap: int = DEFAULT_ORACLE_CAP, residual_tol: float = 1e-10):
    """Lowest eigenpair (energy, normalized vector)."""
    Hs = build_hamiltonian(H, cap)
    dim = Hs.shape[0]
    if dim <= 256:
        w, v = np.linalg.eigh(Hs.toarray())
        energy, vec = w[0], v[:, 0]
    else:
        rng = np.random.default_rng(12345)
        v0 = rng.standard_normal(dim) + 0j
        try:
            w, v = spla.eigsh(Hs, k=1, which="SA", tol=1e-14, v0=v0, maxiter=20000)
        except spla.ArpackNoConvergence as exc:
            raise OracleError("ground-state eigensolver did not converge") from exc
        energy, vec = w[0], v[:, 0]
    vec = vec / np.linalg.norm(vec)
    res = np.linalg.norm(Hs @ vec - energy * vec)
    if res > residual_tol * max(1.0, abs(energy)):
        raise OracleError(f"ground-state residual {res:.2e} above tolerance")
    return float(energy), vec


def _krylov_propagate(Hs, psi, tau, m_max, tol):
    """exp(-i H tau) psi by Lanczos with substepping; local error < tol."""
    out = psi.astype(np.complex128, copy=True)
    remaining = tau
    while remaining > 0:
        beta0 = np.linalg.norm(out)
        V = np.zeros((m_max + 1, out.shape[0]), dtype=np.complex128)
        V[0] = out / beta0
        alpha = np.zeros(m_max)
        beta = np.zeros(m_max)
        m = m_max
        for j in range(m_max):
            w = Hs @ V[j]
            alpha[j] = np.vdot(V[j], w).real
            w = w - alpha[j] * V[j] - (beta[j - 1] * V[j - 1] if j > 0 else 0)
            # full reorthogonalization keeps the small basis orthonormal
            w -= V[: j + 1].T @ (V[: j + 1].conj() @ w)
            beta[j] = np.linalg.norm(w)
            if beta[j] < 1e-13 * max(1.0, abs(alpha[j])):
                m = j + 1
                break
            V[j + 1] = w / beta[j]
        T = np.diag(alpha[:m]) + np.diag(beta[: m - 1], 1) + np.diag(beta[: m - 1], -1)
        ev, U = np.linalg.eigh(T)
        step = remaining
        while True:
            c = U @ (np.exp(-1j * ev * step) * U[0].conj())
            happy = m < m_max or beta[m - 1] == 0
            err = 0.0 if happy else beta0 * beta[m - 1] * abs(c[m - 1])
            if err <= tol:
                break
            step *= 0.5
            if step < 1e-12 * tau:
                raise OracleError("Krylov propagation failed to reach the requested accuracy")
        out = beta0 * (V[:m].T @ c)
        remaining -= step
        if remaining < 1e-15 * tau:
            break
    return out


def exact_evolve(state, H, t_total: float, dt_record: float, cap: int = DEFAULT_ORACLE_CAP,
                 krylov_dim: int = 30, tol: float = 1e-12):
    """Snapshots of exp(-i H t) state at t = 0, dt_record, ..., t_total."""
    Hs = H if sp.issparse(H) else build_hamiltonian(H, cap)
    psi = np.asarray(state, dtype=np.complex128)
    if t_total < 0 or dt_record <= 0:
        raise ValueError("need t_total >= 0 and dt_record > 0")
    n_rec = int(round(t_total / dt_record))
    snaps = [psi.copy()]
    for _ in range(n_rec):
        psi = _krylov_propagate(Hs, psi, dt_record, krylov_dim, tol)
        if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
            raise OracleError("Krylov propagation lost unitarity")
        snaps.append(psi.copy())
    return snaps


def exact_evolve_at(state, H, times, cap: int = DEFAULT_ORACLE_CAP, krylov_dim: int = 30, tol: float = 1e-12):
    """Snapshots at an increasing sequence of arbitrary times (first may be 0)."""
    Hs = H if sp.issparse(H) else build_hamiltonian(H, cap)
    psi = np.asarray(state, dtype=np.complex128).copy()
    t_prev = 0.0
    out = []
    for t in times:
        if t < t_prev - 1e-15:
            raise ValueError("times must be non-decreasing")
        if t > t_prev:
            psi = _krylov_propagate(Hs, psi, t - t_prev, krylov_dim, tol)
        out.append(psi.copy())
        t_prev = max(t, t_prev)
    return out


def dense_expm_evolve(state, H, t: float, cap: int = 10):
    """Dense matrix exponential; independent check of the Krylov propagator."""
    Hd = build_hamiltonian(H, cap).toarray()
    return scipy.linalg.expm(-1j * t * Hd) @ np.asarray(state, dtype=np.complex128)


def variational_state(params, ansatz: Ansatz, cap: int = DEFAULT_ORACLE_CAP) -> np.ndarray:
    N = ansatz.n_sites
    if N > cap:
        raise CapacityError(f"N={N} exceeds the oracle cap {cap}")
    values = params.values if isinstance(params, ParameterState) else np.asarray(params)
    lp = ansatz.log_psi_batch(all_configurations(N), ansatz._check_values(values))
    psi = np.exp(lp - lp.real.max())
    return psi / np.linalg.norm(psi)


def variational_fidelity(params, ansatz: Ansatz, reference, cap: int = DEFAULT_ORACLE_CAP):
    """(|<ref|psi(alpha)>|^2, min_phi || psi(alpha) - e^{i phi} ref ||) for normalized states."""
    psi = variational_state(params, ansatz, cap)
    ref = np.asarray(reference, dtype=np.complex128)
    ref = ref / np.linalg.norm(ref)
    ov = np.vdot(ref, psi)
    fid = min(abs(ov) ** 2, 1.0)
    # Form the aligned difference explicitly; 2 - 2|ov| cancels badly near 0.
    phase = ov / abs(ov) if abs(ov) > 0 else 1.0
    dist = np.linalg.norm(psi - phase * ref)
    return float(fid), float(dist)


def sigma_x(psi: np.ndarray, n_sites: int) -> float:
    """<sum_i X_i>/N."""
    idx = np.arange(psi.shape[0])
    tot = 0.0
    for i in range(n_sites):
        tot += np.vdot(psi, psi[idx ^ (1 << i)]).real
    return float(tot / n_sites / np.vdot(psi, psi).real)


def energy(psi: np.ndarray, Hs) -> float:
    return float(np.vdot(psi, Hs @ psi).real / np.vdot(psi, psi).real)
