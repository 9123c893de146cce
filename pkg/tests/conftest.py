"""Shared fixtures: bundled settings, the two-state model and a scratch ledger."""

import sys
from fractions import Fraction
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from src.bounds import logspace  # noqa: E402
from src.cftp.random_stream import RandomnessStream  # noqa: E402
from src.kernels.orders import ExplicitOrders  # noqa: E402
from src.kernels.params import ModelParams  # noqa: E402
from src.kernels.weights import Corollary1Weights  # noqa: E402
from src.utils.config_loader import ConfigLoader, set_default_settings  # noqa: E402

CONFIG_DIR = ROOT / "config"
EPSILON = Fraction(1, 4)


@pytest.fixture(scope="session", autouse=True)
def settings():
    """Bundled settings.yaml, installed as the process defaults."""
    loaded = ConfigLoader(config_dir=str(CONFIG_DIR)).load_settings()
    set_default_settings(loaded)
    logspace.configure(
        precision_bits=loaded.bounds.log_precision_bits,
        exact_bit_cap=loaded.bounds.exact_bit_cap,
        log_magnitude_bits=loaded.bounds.log_magnitude_bits,
    )
    return loaded


@pytest.fixture
def two_state_params() -> ModelParams:
    """eps = 1/4, lambda_j = (1/2)(2/3)^j, m_1 = 1: lower(1) is a two-state chain."""
    return ModelParams(EPSILON, Corollary1Weights(), ExplicitOrders([1]))


@pytest.fixture
def small_params() -> ModelParams:
    """Orders 1, 3, 5 with the same weights; exact analysis stays small."""
    return ModelParams(EPSILON, Corollary1Weights(), ExplicitOrders([1, 3, 5]))


@pytest.fixture
def stream() -> RandomnessStream:
    return RandomnessStream(20240101, replicate=0, purpose="tests")


@pytest.fixture
def results_url(tmp_path) -> str:
    return f"sqlite:///{tmp_path / 'results.db'}"
