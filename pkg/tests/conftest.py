"""Pytest configuration and fixtures for twochan tests."""

import json
from pathlib import Path

import numpy as np
import pytest

from src.model_core import linear_benchmark_model, linear_model
from src.stability import RatePair

CONFIG_DIR = Path(__file__).parent.parent / "configs"


def random_psd(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """Random symmetric positive definite matrix."""
    M = rng.standard_normal((n, n))
    return scale * (M @ M.T / n + 0.1 * np.eye(n))


def random_model(rng: np.random.Generator, n_x: int = 3, n_y1: int = 1, n_y2: int = 1, radius: float = 1.2):
    """Linear model with random A (spectral radius ``radius``), C and noise."""
    A = rng.standard_normal((n_x, n_x))
    A *= radius / max(abs(np.linalg.eigvals(A)))
    return linear_model(
        A=A,
        C1=rng.standard_normal((n_y1, n_x)),
        C2=rng.standard_normal((n_y2, n_x)),
        Q=random_psd(rng, n_x, 0.1),
        R=random_psd(rng, n_y1 + n_y2, 0.1),
    )


@pytest.fixture
def rng():
    """Seeded generator for randomized property checks."""
    return np.random.default_rng(20240611)


@pytest.fixture
def benchmark_model():
    """Linear position/velocity benchmark."""
    return linear_benchmark_model()


@pytest.fixture
def benchmark_A(benchmark_model):
    return benchmark_model.jacobian(np.zeros(2))


@pytest.fixture
def unstable_scalar():
    """a = 2, channel 1 blind (C1 = 0), channel 2 sees the state."""
    return linear_model(
        A=[[2.0]],
        C1=[[0.0]],
        C2=[[1.0]],
        Q=[[1.0]],
        R=np.eye(2),
        name="scalar_unstable",
    )


@pytest.fixture
def stable_scalar():
    """a = 0.5, q = 1."""
    return linear_model(A=[[0.5]], C1=[[1.0]], C2=[[1.0]], Q=[[1.0]], R=np.eye(2), name="scalar_stable")


@pytest.fixture
def sample_rates():
    return RatePair(0.6, 0.3)


@pytest.fixture
def linear_config_file(tmp_path):
    """Linear benchmark config with a short simulation horizon."""
    path = tmp_path / "linear.json"
    path.write_text(
        json.dumps({
            "type": "linear",
            "Q_diag": [1e-4, 1e-4],
            "R_diag": [1e-2, 1e-2],
            "candidates": {"grid": [0.0, 0.1, 0.5, 1.0]},
            "simulation": {"duration": 5.0},
        })
    )
    return path


@pytest.fixture
def scalar_config_file(tmp_path):
    path = tmp_path / "scalar.json"
    path.write_text(
        json.dumps({
            "type": "custom_linear",
            "name": "scalar_unstable",
            "A": [[2.0]],
            "C1": [[0.0]],
            "C2": [[1.0]],
            "Q": [[1.0]],
            "R_diag": [1.0, 1.0],
            "simulation": {"duration": 2.0},
        })
    )
    return path


@pytest.fixture
def isolated_env(tmp_path, monkeypatch):
    """Point output and cache directories into tmp_path."""
    monkeypatch.setenv("TWOCHAN_OUTPUT_DIR", str(tmp_path / "output"))
    monkeypatch.setenv("TWOCHAN_CACHE_DIR", str(tmp_path / "cache"))
    monkeypatch.setenv("TWOCHAN_SOLVER", "CLARABEL")
    monkeypatch.delenv("TWOCHAN_DEBUG", raising=False)
    monkeypatch.delenv("TWOCHAN_WORKERS", raising=False)
    return tmp_path
