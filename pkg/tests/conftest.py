import numpy as np
import pytest

from ctxvalues.operators import projector_from_vector, validate_density

ACCEPTANCE_LINES = []


def random_hermitian(rng, n):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (x + x.conj().T) / 2


def random_density(rng, n, rank=None):
    rank = rank or n
    x = rng.normal(size=(n, rank)) + 1j * rng.normal(size=(n, rank))
    rho = x @ x.conj().T
    return validate_density(rho / np.trace(rho).real)


def random_positive_family_ops(rng, n, k):
    """k non-commuting Hermitian PSD operators with sum of squares = I."""
    bs = []
    for _ in range(k):
        x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        bs.append(x @ x.conj().T + 0.1 * np.eye(n))
    sq = [b @ b for b in bs]
    w, v = np.linalg.eigh(sum(sq))
    inv_sqrt = v @ np.diag(w**-0.5) @ v.conj().T
    out = []
    for s in sq:
        e = inv_sqrt @ s @ inv_sqrt
        e = (e + e.conj().T) / 2
        ew, ev = np.linalg.eigh(e)
        out.append(ev @ np.diag(np.sqrt(np.clip(ew, 0, None))) @ ev.conj().T)
    return out


def penrose_residuals(f, x):
    """The four Penrose residuals, each scaled by the size of its product.

    Forming ``X F X`` alone rounds by about eps * |X|^2 |F|, so absolute
    residuals of ill-conditioned matrices say nothing about the solver.
    """
    nf, nx = max(np.linalg.norm(f, 2), 1.0), max(np.linalg.norm(x, 2), 1.0)
    return (
        np.abs(f @ x @ f - f).max() / (nf * nf * nx),
        np.abs(x @ f @ x - x).max() / (nx * nx * nf),
        np.abs((f @ x).T - f @ x).max() / (nf * nx),
        np.abs((x @ f).T - x @ f).max() / (nf * nx),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def counterexample_state():
    return validate_density([[0.5, 0.2], [0.2, 0.5]])


@pytest.fixture
def diagonal_post():
    return projector_from_vector([1, 1])


@pytest.fixture
def state3():
    rho = np.eye(3) / 3
    rho[0, 1] = rho[1, 0] = 0.1
    return validate_density(rho)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
