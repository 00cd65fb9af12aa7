import numpy as np
import pytest

from atvmc import exact, kernels
from atvmc.ansatz import JastrowAnsatz, SymmetricRbmAnsatz, make_ansatz
from atvmc.errors import CapacityError, SamplerStallError
from atvmc.estimator import (
    ExactSumEstimator,
    MetropolisEstimator,
    SamplerConfig,
    estimate_exact_sum,
    local_energy,
)
from atvmc.model import TfiHamiltonian, all_configurations, configuration_index

from conftest import dense_tfi


def dense_oracle(A, p, H):
    """S, F, <E>, Var from a dense state vector and the Kronecker Hamiltonian."""
    confs = all_configurations(H.n_sites)
    psi = exact.variational_state(p, A)
    prob = np.abs(psi) ** 2
    O = A.log_derivatives_batch(confs, p.values)
    eloc = (dense_tfi(H) @ psi) / psi
    Om = prob @ O
    Em = prob @ eloc
    S = (O.conj().T * prob) @ O - np.outer(Om.conj(), Om)
    F = (O.conj().T * prob) @ eloc - Om.conj() * Em
    var = prob @ np.abs(eloc - Em) ** 2
    return S, F, Em, var


@pytest.mark.parametrize("kind,density", [("jastrow", None), ("rbm", 2)])
def test_local_energy_matches_dense(kind, density, rng):
    A = make_ansatz(kind, 8, density)
    p = A.random_state(rng, 0.3)
    H = TfiHamiltonian.from_g(8, 1.4)
    psi = exact.variational_state(p, A)
    Hpsi = dense_tfi(H) @ psi
    for _ in range(6):
        s = rng.choice([-1, 1], size=8)
        b = configuration_index(s)
        assert abs(local_energy(s, p, H, A) - Hpsi[b] / psi[b]) < 1e-10


def test_uniform_state_energy_and_variance():
    A = JastrowAnsatz(6)
    H = TfiHamiltonian.from_g(6, 1.5)
    b = estimate_exact_sum(A.new_state(), H, A)
    assert b.energy_mean == pytest.approx(-H.h * 6, abs=1e-12)
    psi = np.full(64, 1 / 8.0)
    M = dense_tfi(H)
    var = psi @ M @ M @ psi - (psi @ M @ psi) ** 2
    assert b.energy_variance == pytest.approx(var, abs=1e-12)


@pytest.mark.parametrize("kind,density", [("jastrow", None), ("rbm", 3)])
def test_exact_sum_matches_dense_oracle(kind, density, rng):
    A = make_ansatz(kind, 8, density)
    p = A.random_state(rng, 0.3)
    H = TfiHamiltonian.from_g(8, 2.0)
    b = ExactSumEstimator(A, H)(p)
    S, F, Em, var = dense_oracle(A, p, H)
    assert np.abs(b.S - S).max() < 1e-10
    assert np.abs(b.F - F).max() < 1e-10
    assert abs(b.energy_mean - Em) < 1e-10
    assert b.energy_variance == pytest.approx(var, abs=1e-10)
    assert np.abs(b.S - b.S.conj().T).max() <= 1e-12
    assert b.stats_mode == "exact-sum" and b.standard_errors == {}


def test_frozen_blocks(rng):
    A = SymmetricRbmAnsatz(6, 1)
    p = A.random_state(rng, 0.3)
    p.active[[1, 4, 5]] = False
    est = ExactSumEstimator(A, TfiHamiltonian.from_g(6, 1.0))
    b = est(p)
    full = est(A.new_state(p.values))
    assert np.isnan(b.S[1, 4]) and np.isnan(b.S[5, 4])
    for l in (1, 4, 5):
        assert b.S[l, l] == pytest.approx(full.S[l, l].real, abs=1e-12)
        assert np.allclose(b.cross(l), full.S[b.active_indices, l], atol=1e-12)
    assert np.allclose(b.F, full.F, atol=1e-12)
    assert np.allclose(b.S_active(), full.S[np.ix_(b.active_indices, b.active_indices)], atol=1e-12)


def test_enumeration_cap():
    with pytest.raises(CapacityError):
        ExactSumEstimator(JastrowAnsatz(16), TfiHamiltonian(16, 1.0), cap=14)


def test_metropolis_converges_to_exact_sum():
    A = JastrowAnsatz(10)
    p = A.random_state(np.random.default_rng(3), 0.2)
    H = TfiHamiltonian.from_g(10, 2.0)
    ref = ExactSumEstimator(A, H)(p)
    b = MetropolisEstimator(A, H, SamplerConfig(200_000, n_chains=8, seed=11))(p)
    for key in ("energy", "sigma_x"):
        assert abs(b.observables[key] - ref.observables[key]) <= 3 * b.standard_errors[key]
    assert np.abs(b.S - ref.S).max() < 0.01 * np.abs(ref.S).max()
    assert np.abs(b.F - ref.F).max() < 0.01 * np.abs(ref.F).max()
    assert b.sample_count == 200_000 and 0 < b.acceptance <= 1


def test_zero_parameters_accept_everything():
    A = JastrowAnsatz(6)
    m = MetropolisEstimator(A, TfiHamiltonian.from_g(6, 1.0), SamplerConfig(600, n_burn=10, n_chains=2))
    assert m(A.new_state()).acceptance == 1.0


def test_metropolis_is_deterministic(rng):
    A = SymmetricRbmAnsatz(6, 1)
    p = A.random_state(rng, 0.3)
    H = TfiHamiltonian.from_g(6, 1.0)
    cfg = SamplerConfig(2000, n_chains=3, seed=9)
    m1, m2 = MetropolisEstimator(A, H, cfg), MetropolisEstimator(A, H, cfg)
    for _ in range(2):
        b1, b2 = m1(p), m2(p)
        assert np.array_equal(b1.F, b2.F) and b1.energy_mean == b2.energy_mean
    b3 = MetropolisEstimator(A, H, SamplerConfig(2000, n_chains=3, seed=10))(p)
    assert b3.energy_mean != b1.energy_mean


def test_sampler_stall():
    A = JastrowAnsatz(6)
    p = A.new_state(np.array([40.0, 0.0, 0.0]))  # every flip from the ferromagnet is suppressed by e^-320
    m = MetropolisEstimator(A, TfiHamiltonian.from_g(6, 1.0), SamplerConfig(100, n_burn=20, n_chains=1))
    m.chains[0][:] = 1
    with pytest.raises(SamplerStallError):
        m(p)


@pytest.mark.skipif(kernels.compiled is None, reason="compiled kernels not built")
@pytest.mark.parametrize("kind,density", [("jastrow", None), ("rbm", 2)])
def test_compiled_and_python_kernels_agree(kind, density, rng):
    A = make_ansatz(kind, 7, density)
    p = A.random_state(rng, 0.4).values
    H = TfiHamiltonian.from_g(7, 1.2)
    u = rng.uniform(size=(20 + 50) * 7)
    spins = rng.choice([-1, 1], size=7).astype(np.int8)
    out = []
    for name in ("cython", "python"):
        k = kernels.get_backend(name)
        s = spins.copy()
        if kind == "jastrow":
            res = k.jastrow_chain(s, p.astype(complex), u, 20, 50, H.J, H.h)
        else:
            a, b, W = A.split(p)
            res = k.rbm_chain(s, complex(a), b.copy(), np.ascontiguousarray(W), u, 20, 50, H.J, H.h)
        out.append((res, s))
    (rc, sc), (rp, sp) = out
    assert np.array_equal(sc, sp)
    for x, y in zip(rc[:3], rp[:3]):
        assert np.allclose(x, y, rtol=1e-11, atol=1e-12)
    assert rc[3:] == rp[3:]
