"""Pytest configuration and shared fixtures."""

import numpy as np
import pytest
import scipy.sparse as sp

from adaptive_rom import ui
from adaptive_rom.models import (
    AffineOperator,
    ParameterDomain,
    PointwiseNonlinearity,
    SemiImplicitFom,
    TrainingSet,
    assemble_burgers,
    assemble_synthetic_rd,
)

TOY_SIZE = 8


@pytest.fixture
def tmp_path(tmp_path_factory):
    """Create a temporary directory for testing."""
    return tmp_path_factory.mktemp("test")


@pytest.fixture(autouse=True)
def quiet_console():
    """Keep debug output off between tests."""
    ui.set_verbose(False)
    yield
    ui.set_verbose(False)


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(1234)


def _stiffness(n: int) -> sp.csr_matrix:
    return sp.diags([-1.0, 2.0, -1.0], [-1, 0, 1], shape=(n, n), format="csr")


def make_toy_fom(parametric: bool = True, nonlinear: bool = True, dt: float = 0.01) -> SemiImplicitFom:
    """
    Eight-state system with Ẽ(μ) = I + Δt μ K and f = -x³/2.

    The input is constant, the outputs are the mean state and the last entry.
    """
    n = TOY_SIZE
    K = 4.0 * _stiffness(n)
    identity = sp.identity(n, format="csr")
    if parametric:
        E_tilde = AffineOperator.affine([(lambda c: 1.0, identity), (lambda c: c[0], dt * K)])
        domain = ParameterDomain((0.5,), (2.0,), ("diffusivity",))
    else:
        E_tilde = AffineOperator.constant(identity + dt * K)
        domain = ParameterDomain.empty()

    def _cubic(x):
        return -0.5 * x**3 if nonlinear else np.zeros_like(x)

    C = np.vstack([np.full(n, 1.0 / n), np.eye(1, n, n - 1)])
    return SemiImplicitFom(
        name="toy",
        size=n,
        E_tilde=E_tilde,
        A_tilde=AffineOperator.constant(identity),
        B=sp.csr_matrix(np.linspace(1.0, 2.0, n).reshape(-1, 1)),
        C=C,
        nonlinearity=PointwiseNonlinearity(n, _cubic),
        input_signal=lambda t, mu: np.ones(1),
        dt=dt,
        end_time=lambda mu: 0.5,
        snapshot_stride=5,
        domain=domain,
    )


@pytest.fixture
def toy_fom():
    """Parametric N = 8 model with a cubic nonlinearity."""
    return make_toy_fom()


@pytest.fixture
def static_toy_fom():
    """Non-parametric N = 8 model."""
    return make_toy_fom(parametric=False)


@pytest.fixture
def linear_toy_fom():
    """Parametric N = 8 model without the nonlinear term."""
    return make_toy_fom(nonlinear=False)


@pytest.fixture
def toy_training(toy_fom):
    """Five uniformly spaced parameters of the toy model."""
    return TrainingSet.uniform(toy_fom.domain, [5])


@pytest.fixture
def small_burgers():
    """Coarse Burgers' model on a short horizon."""
    return assemble_burgers(40, 1e-3, horizon=(0.0, 0.2), mu_domain=(0.01, 1.0), snapshot_stride=10)


@pytest.fixture
def small_rd():
    """Coarse non-parametric reaction-diffusion model."""
    return assemble_synthetic_rd(30, dt=1e-3, horizon=(0.0, 0.2), snapshot_stride=5)


@pytest.fixture
def experiment_data(tmp_path):
    """Small Burgers' experiment as a plain mapping."""
    return {
        "name": "tiny",
        "pipeline": "adaptive-greedy",
        "model": {
            "id": "burgers",
            "size": 20,
            "dt": 1e-3,
            "horizon": [0.0, 0.1],
            "domain": [[0.05, 1.0]],
            "snapshot_stride": 10,
        },
        "training": {"sampling": "log-uniform", "counts": [4]},
        "greedy": {
            "tol": 1e-2,
            "max_iter": 6,
            "method": "EIM",
            "infsup": "direct",
            "seed": 1,
        },
        "output": str(tmp_path / "runs"),
    }
