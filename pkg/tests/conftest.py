import numpy as np
import pytest

from atvmc.model import TfiHamiltonian


def random_pd(P, rng, cond=1e3):
    """Random Hermitian positive-definite matrix with a controlled spectrum."""
    A = rng.normal(size=(P, P)) + 1j * rng.normal(size=(P, P))
    Q, _ = np.linalg.qr(A)
    lam = np.exp(rng.uniform(0.0, np.log(cond), size=P))
    return (Q * lam) @ Q.conj().T


def random_system(P, rng):
    """(S, F, Var) with Var chosen so that the full-set LITE is positive."""
    S = random_pd(P, rng)
    S = 0.5 * (S + S.conj().T)
    F = rng.normal(size=P) + 1j * rng.normal(size=P)
    explained = float(np.real(F.conj() @ np.linalg.solve(S, F)))
    var = explained * (1.0 + rng.uniform(0.05, 2.0))
    return S, F, var


def dense_tfi(H: TfiHamiltonian) -> np.ndarray:
    """Kronecker-product build; site i is bit i, bit 0 means spin up (+1)."""
    N = H.n_sites
    X = np.array([[0.0, 1.0], [1.0, 0.0]])
    Z = np.diag([1.0, -1.0])
    I = np.eye(2)

    def site_op(ops):
        out = np.array([[1.0]])
        for i in reversed(range(N)):
            out = np.kron(out, ops.get(i, I))
        return out

    M = np.zeros((2**N, 2**N))
    for i in range(N):
        M -= H.J * site_op({i: Z, (i + 1) % N: Z})
        M -= H.h * site_op({i: X})
    return M


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
