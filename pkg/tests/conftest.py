import numpy as np
import pytest

from spectralab import kernels
from spectralab import models as M


def pytest_report_header(config):
    return f"spectralab kernels backend: {kernels.backend_name()}"


@pytest.fixture(scope="session")
def scalar_a():
    return M.scalar_a()


@pytest.fixture(scope="session")
def rank1_c():
    return M.rank1_c()


@pytest.fixture(scope="session")
def diag02():
    return M.build_model(M.ModelConfig("diagonal", (-1.0, 3.0), {"spectrum": [0.0, 2.0]}))


def random_hermitian(rng, n, scale=1.0):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * 0.5 * (a + a.conj().T)


def random_complex(rng, n, m=None):
    m = n if m is None else m
    return rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))


def random_model(rng, n, interval=(-3.0, 3.0), j_kind="signs"):
    """Well-conditioned random model: Hermitian h0, diagonal F with entries
    in [0.5, 1.5], J = random signs (or identity)."""
    h0 = random_hermitian(rng, n)
    f = np.diag(rng.uniform(0.5, 1.5, size=n)).astype(np.complex128)
    if j_kind == "identity":
        j = np.eye(n, dtype=np.complex128)
    else:
        j = np.diag(rng.choice([-1.0, 1.0], size=n)).astype(np.complex128)
    return M.OperatorModel(dim=n, h0=h0, f=f, j=j, interval=interval)
