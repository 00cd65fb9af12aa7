import numpy as np
import pytest
import scipy.linalg

from atvmc.ansatz import JastrowAnsatz, SymmetricRbmAnsatz
from atvmc.errors import RankZeroError, StiffnessError
from atvmc.estimator import EstimateBundle, ExactSumEstimator
from atvmc.model import TfiHamiltonian
from atvmc.tvmc import (
    LiteReport,
    SolverPolicy,
    StepSizeController,
    TvmcIntegrator,
    accumulate_global_bound,
    adaptive_step_control,
    fs_error_squared,
    force_snr,
    lite_squared,
    lite_squared_raw,
    solve_equations_of_motion,
)

from conftest import random_system


class LinearEstimator:
    """Bundle with S = 1 and F = i A alpha, so that alpha_dot = A alpha exactly."""

    def __init__(self, A):
        self.A = A

    def __call__(self, params):
        P = params.n_params
        F = 1j * (self.A @ params.values)
        return EstimateBundle(
            S=np.eye(P, dtype=complex), F=F, energy_mean=0.0, energy_variance=1e3,
            observables={"sigma_x": 0.0, "energy": 0.0}, sample_count=0, stats_mode="exact-sum",
            active=params.active.copy(),
        )


def test_solver_full_rank_matches_direct_solve(rng):
    S, F, _ = random_system(5, rng)
    ad, meta = solve_equations_of_motion(S, F)
    assert meta.full_rank and meta.rank == 5
    assert np.allclose(ad, -1j * np.linalg.solve(S, F), atol=1e-10)


def test_solver_rank_deficient_matches_least_squares(rng):
    B = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    S = B @ B.conj().T  # rank 3 PSD
    F = rng.normal(size=5) + 1j * rng.normal(size=5)
    ad, meta = solve_equations_of_motion(S, F)
    assert meta.rank == 3
    # minimum-norm least-squares oracle for S x = -i F
    x, *_ = scipy.linalg.lstsq(S, -1j * F, cond=1e-7)
    assert np.allclose(ad, x, atol=1e-10)
    assert meta.discarded_mass < 1e-10


def test_solver_errors():
    with pytest.raises(RankZeroError):
        solve_equations_of_motion(np.zeros((2, 2)), np.ones(2))
    with pytest.raises(RankZeroError):
        solve_equations_of_motion(np.zeros((0, 0)), np.zeros(0))
    with pytest.raises(ValueError):
        solve_equations_of_motion(np.eye(2), np.ones(3))


def test_snr_drops_noise_directions(rng):
    n = 4000
    O = rng.normal(size=(n, 2)) * np.array([1.0, 3.0]) + 0j  # distinct variances fix the eigenbasis
    O -= O.mean(axis=0)
    E = 3.0 * O[:, 0].real + 0.05 * rng.normal(size=n)  # only direction 0 carries signal
    E = E - E.mean()
    S = O.conj().T @ O / n
    F = O.conj().T @ E / n
    _, meta = solve_equations_of_motion(S, F, SolverPolicy("snr", snr_threshold=4.0), (O, E))
    assert meta.rank == 1
    snr = force_snr(meta.eigenvectors, O, E)
    assert np.sum(snr >= 4.0) == 1
    _, meta_exact = solve_equations_of_motion(S, F, SolverPolicy("snr"))
    assert meta_exact.rank == 2  # no samples: noise-free force


def test_lite_identity_on_pseudoinverse(rng):
    B = rng.normal(size=(6, 4)) + 1j * rng.normal(size=(6, 4))
    S = B @ B.conj().T
    F = rng.normal(size=6) + 1j * rng.normal(size=6)
    var = 50.0
    ad, _ = solve_equations_of_motion(S, F)
    Sp = np.linalg.pinv(S, rcond=1e-7, hermitian=True)
    expected = var - np.real(F.conj() @ Sp @ S @ Sp @ F)
    assert lite_squared(var, S, ad) == pytest.approx(expected, abs=1e-10)


def test_fs_error_is_minimal_at_solution(rng):
    S, F, var = random_system(6, rng)
    ad, _ = solve_equations_of_motion(S, F)
    base = fs_error_squared(var, S, F, ad)
    assert base == pytest.approx(lite_squared(var, S, ad), abs=1e-10)
    for _ in range(100):
        probe = ad + 1e-2 * (rng.normal(size=6) + 1j * rng.normal(size=6))
        assert fs_error_squared(var, S, F, probe) >= base - 1e-12


def test_lite_clamp_warns():
    S = np.eye(1)
    with pytest.warns(RuntimeWarning):
        assert lite_squared(1.0, S, np.array([2.0])) == 0.0
    assert lite_squared_raw(1.0, S, np.array([2.0])) == pytest.approx(-3.0)


def test_global_bound_left_endpoint():
    rep = LiteReport(epsilon_sq=0.04, epsilon_sq_raw=0.04, fs_epsilon_sq=0.04, var_h=1.0, cumulative_bound=0.5)
    assert accumulate_global_bound(rep, 0.1) == pytest.approx(0.52)


@pytest.mark.parametrize("scheme,order", [("euler", 2), ("heun", 3)])
def test_local_error_order_on_linear_system(scheme, order, rng):
    P = 4
    A = 0.5 * (rng.normal(size=(P, P)) + 1j * rng.normal(size=(P, P)))
    ans = SymmetricRbmAnsatz(2, 1)  # P = 2 + 1 + 1 = 4
    p0 = ans.new_state(rng.normal(size=P) + 1j * rng.normal(size=P))
    integ = TvmcIntegrator(LinearEstimator(A))
    step = integ.step_euler if scheme == "euler" else integ.step_heun
    errs = []
    for dt in (1e-2, 5e-3):
        new, _ = step(p0, dt)
        errs.append(np.linalg.norm(new.values - scipy.linalg.expm(A * dt) @ p0.values))
    assert errs[0] / errs[1] == pytest.approx(2**order, rel=0.05)


def test_frozen_entries_and_zero_step(rng):
    A = JastrowAnsatz(6)
    p = A.random_state(rng, 0.2)
    p.active[1] = False
    integ = TvmcIntegrator(ExactSumEstimator(A, TfiHamiltonian.from_g(6, 2.0)))
    new, d1 = integ.step_heun(p, 0.01)
    assert new.values[1] == p.values[1]
    assert d1.alpha_dot[1] == 0
    assert not np.allclose(new.values, p.values)
    same, _ = integ.step_heun(p, 0.0)
    assert np.array_equal(same.values, p.values) and same is not p
    with pytest.raises(ValueError):
        integ.step_euler(p, -1.0)


def test_heun_costs_two_estimates(rng):
    A = JastrowAnsatz(6)
    integ = TvmcIntegrator(ExactSumEstimator(A, TfiHamiltonian.from_g(6, 2.0)))
    integ.step_heun(A.random_state(rng, 0.2), 0.01)
    assert integ.n_estimates == 2


def test_step_size_controller_decisions():
    c = StepSizeController(tol=1e-3, dt_min=1e-4, dt_max=0.02)
    assert c.decide(2e-3, 0.01) == (False, 0.005)
    assert c.decide(1e-4, 0.01) == (True, pytest.approx(0.013))
    assert c.decide(1e-4, 0.019) == (True, 0.02)
    assert c.decide(5e-4, 0.01) == (True, 0.01)
    with pytest.raises(StiffnessError):
        c.decide(1.0, 1.5e-4)


def test_adaptive_step_contract(rng):
    A = JastrowAnsatz(6)
    integ = TvmcIntegrator(ExactSumEstimator(A, TfiHamiltonian.from_g(6, 2.0)))
    p = A.random_state(rng, 0.2)
    ctl = StepSizeController(tol=1e-2)
    ok, dt_next, new, d1, disc = adaptive_step_control(integ, p, 1e-3, ctl)
    assert ok and dt_next > 1e-3 and disc < 1e-2
    assert integ.n_estimates == 5
    mid, _ = integ.step_heun(p, 5e-4, d1)
    halves, _ = integ.step_heun(mid, 5e-4)
    assert np.allclose(new.values, halves.values)
    strict = StepSizeController(tol=1e-14, dt_min=2e-4)
    dt = 1e-3
    with pytest.raises(StiffnessError):
        for _ in range(10):
            ok, dt, p, _, _ = adaptive_step_control(integ, p, dt, strict)
    assert [h[2] for h in strict.history] == [False, False]


class JumpEstimator:
    """alpha_dot = e0 until Re alpha_0 reaches 0.05, then e0 + 5 e1 (a rank-switch-like jump)."""

    def __call__(self, params):
        P = params.n_params
        v = np.zeros(P, dtype=complex)
        v[0] = 1.0
        if params.values[0].real >= 0.05:
            v[1] = 5.0
        return EstimateBundle(
            S=np.eye(P, dtype=complex), F=1j * v, energy_mean=0.0, energy_variance=1e3,
            observables={"sigma_x": 0.0, "energy": 0.0}, sample_count=0, stats_mode="exact-sum",
            active=params.active.copy(),
        )


def test_adaptive_steps_cross_a_jump():
    p = JastrowAnsatz(6).new_state()
    integ = TvmcIntegrator(JumpEstimator())
    ctl = StepSizeController(tol=1e-4, dt_min=1e-9)
    t, dt = 0.0, 0.01
    while t < 0.2:
        ok, dt_next, new, _, _ = adaptive_step_control(integ, p, dt, ctl)
        if ok:
            t += dt
            p = new
        dt = dt_next
    rejected = sum(not h[2] for h in ctl.history)
    assert rejected > 0
    # the error made at the jump is bounded by the step that straddled it
    assert p.values[0].real == pytest.approx(t, abs=1e-12)
    assert p.values[1].real == pytest.approx(5 * (t - 0.05), abs=0.05)
