"""
Pytest configuration and shared fixtures.

Provides:
- ARCH(1) specs in both process families
- Innovation models (fixed constants, and certified by quadrature)
- Seeded random generators and simulated ensembles
- An isolated output directory for CLI runs
"""

from pathlib import Path

import numpy as np
import pytest

from process_models import build_innovation, simulate_tvarch
from schemas import ArchInfSpec, InnovationLaw, InnovationModel, InnovationName, TailClass, TvArchSpec

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    """Directory of the shipped JSON specs."""
    return FIXTURES


@pytest.fixture
def unit_exponential():
    """Exponential innovation with K = 1 for closed-form checks (no quadrature)."""
    return InnovationModel(
        law=InnovationLaw(name=InnovationName.EXPONENTIAL),
        lipschitz_iii=1.0,
        lipschitz_iv=1.0,
        second_moment=2.0,
        a_grid_points=1,
        tau_points=1,
    )


@pytest.fixture(scope="session")
def exponential():
    """Exponential innovation with certified constants."""
    return build_innovation("exponential")


@pytest.fixture(scope="session")
def uniform():
    """Uniform(0, 2) innovation with certified constants."""
    return build_innovation("uniform")


@pytest.fixture
def arch1_archinf():
    """ARCH(1) with a0 = 1, a1 = 0.5 as an ARCH(inf) spec."""
    return ArchInfSpec(a0=1.0, coeffs=[0.5], delta=0.3, nu=1.0, tail=TailClass(kind="geometric", param=0.5))


@pytest.fixture
def arch1_tvarch():
    """ARCH(1) with a0 = 0.1, a1 = 0.5 as a constant tvARCH spec."""
    return TvArchSpec.constant(0.1, [0.5], delta=0.5)


@pytest.fixture
def tvarch2():
    """Time-invariant tvARCH(2) with a = (0.3, 0.2)."""
    return TvArchSpec.constant(0.1, [0.3, 0.2], delta=0.45)


@pytest.fixture
def rng():
    """Seeded generator."""
    return np.random.default_rng(20240601)


@pytest.fixture
def arch1_ensemble(arch1_tvarch, unit_exponential):
    """Eight ARCH(1) paths of length 5000."""
    return simulate_tvarch(arch1_tvarch, unit_exponential, (0, 4999), replicates=8, master_seed=11, workers=2)


@pytest.fixture
def out_dir(tmp_path, monkeypatch):
    """Fresh output directory; ARCHMIX_OUT is cleared so --out is honored."""
    monkeypatch.delenv("ARCHMIX_OUT", raising=False)
    return tmp_path / "out"


def pytest_configure(config):
    """Configure pytest markers."""
    config.addinivalue_line("markers", "slow: Monte Carlo runs at full sample size")
    config.addinivalue_line("markers", "property: Hypothesis property-based tests")
    config.addinivalue_line("markers", "asyncio: mark test as async")

