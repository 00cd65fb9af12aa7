import numpy as np
import pytest
import scipy.linalg

from atvmc import exact
from atvmc.errors import CapacityError
from atvmc.model import TfiHamiltonian

from conftest import dense_tfi


def free_fermion_ground_energy(N, J, h):
    """Even-parity sector of the periodic chain: antiperiodic fermion momenta."""
    k = np.pi * (2 * np.arange(N) + 1) / N
    return -np.sum(np.sqrt(J**2 + h**2 - 2 * J * h * np.cos(k)))


# frozen value of the closed form at N=8, J=h=1
FREE_FERMION_N8_G1 = -10.251661790966024715  # mpmath, 30 digits


def test_free_fermion_oracle_value():
    assert free_fermion_ground_energy(8, 1.0, 1.0) == pytest.approx(FREE_FERMION_N8_G1, abs=1e-12)


@pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
def test_ground_energy_matches_free_fermions(g):
    e, psi = exact.exact_ground_state(TfiHamiltonian.from_g(8, g))
    assert e == pytest.approx(free_fermion_ground_energy(8, 1.0, g), abs=1e-9)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)


def test_sparse_build_matches_kron_oracle():
    H = TfiHamiltonian.from_g(6, 1.3)
    assert np.allclose(exact.build_hamiltonian(H).toarray(), dense_tfi(H), atol=1e-13)


def test_ground_state_n10_vs_dense():
    H = TfiHamiltonian.from_g(10, 0.5)
    e, _ = exact.exact_ground_state(H)
    assert e == pytest.approx(np.linalg.eigvalsh(dense_tfi(H))[0], abs=1e-9)


def test_limits():
    e0, psi = exact.exact_ground_state(TfiHamiltonian(6, h=0.0))
    assert e0 == pytest.approx(-6.0, abs=1e-12)
    assert np.linalg.norm(psi) == pytest.approx(1.0)
    e_big, _ = exact.exact_ground_state(TfiHamiltonian(6, h=1e4))
    assert e_big / (-6 * 1e4) == pytest.approx(1.0, abs=1e-7)


def test_krylov_matches_dense_expm():
    H1, H2 = TfiHamiltonian.from_g(8, 4.0), TfiHamiltonian.from_g(8, 2.0)
    _, psi0 = exact.exact_ground_state(H1)
    times = np.linspace(0.0, 1.0, 11)
    states = exact.exact_evolve_at(psi0, H2, times)
    Hd = exact.build_hamiltonian(H2).toarray()
    for t, psi in zip(times, states):
        ref = scipy.linalg.expm(-1j * t * Hd) @ psi0
        assert abs(exact.sigma_x(psi, 8) - exact.sigma_x(ref, 8)) < 1e-8
        assert np.linalg.norm(psi - ref) < 1e-8


def test_evolve_grid_and_norm():
    H = TfiHamiltonian.from_g(6, 1.0)
    _, psi0 = exact.exact_ground_state(TfiHamiltonian.from_g(6, 3.0))
    states = exact.exact_evolve(psi0, H, 0.5, 0.1)
    assert len(states) == 6
    assert np.allclose([np.linalg.norm(s) for s in states], 1.0, atol=1e-12)


def test_eigenstate_is_stationary():
    H = TfiHamiltonian.from_g(6, 1.5)
    e, psi0 = exact.exact_ground_state(H)
    psi = exact.exact_evolve_at(psi0, H, [2.0])[0]
    assert abs(np.vdot(psi0, psi)) == pytest.approx(1.0, abs=1e-10)
    assert exact.energy(psi, exact.build_hamiltonian(H)) == pytest.approx(e, abs=1e-10)


def test_fidelity_trivial_cases():
    from atvmc.ansatz import JastrowAnsatz

    A = JastrowAnsatz(4)
    p = A.new_state()
    psi = exact.variational_state(p, A)
    fid, dist = exact.variational_fidelity(p, A, psi * np.exp(0.7j))
    assert fid == pytest.approx(1.0, abs=1e-14) and dist < 1e-14
    orth = np.zeros(16, dtype=complex)
    orth[0], orth[15] = 1.0, -1.0  # antisymmetric, the uniform state has zero overlap
    fid, dist = exact.variational_fidelity(p, A, orth)
    assert fid == pytest.approx(0.0, abs=1e-14)
    assert dist == pytest.approx(np.sqrt(2.0))


def test_capacity_guard():
    with pytest.raises(CapacityError):
        exact.build_hamiltonian(TfiHamiltonian(16, 1.0), cap=14)
