"""Shared fixtures: small parameter sets and cached forward-simulation data.

The acceptance tests need full-resolution data for the shipped example
configurations; generating it takes a few minutes, so the simulate runs are
session-scoped and shared.
"""

import numpy as np
import pytest

from defectscan import WaveParams, parse_config
from defectscan.cli import main as cli_main
from defectscan.verify import example_config_text


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(42))


@pytest.fixture
def params_small():
    """Light truncation used by unit tests (5 modes, M = 3)."""
    return WaveParams(k=2.3, L=2.0, M=3, h=1.2, n_min=2, n_max=2)


#: Minimal valid configuration used by the I/O and CLI tests.
TINY_CONFIG = """
[wave]
k = 2.3
L = 2.0
M = 3
h = 1.2
n_min = 2
n_max = 2

[solver]
nx = 48
ny = 64
tol = 1e-8

[imaging]
q = 1
alpha0 = 1e-3
delta = 0.01
seed = 7

[[background]]
shape = "disc"
center = [-0.4, 0.45]
radius = 0.3
n = 2.0

[[defect]]
shape = "disc"
center = [0.35, -0.4]
radius = 0.28
mu_inv = 2.0
"""


@pytest.fixture
def tiny_config_text():
    return TINY_CONFIG


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.toml"
    path.write_text(TINY_CONFIG)
    return path


def _write_example_config(tmp_path_factory, number):
    directory = tmp_path_factory.mktemp(f"cfg{number}")
    path = directory / f"example{number}.toml"
    path.write_text(example_config_text(number))
    return path


def _simulate(config_path, out_dir, extra=()):
    code = cli_main(
        ["simulate", "--config", str(config_path), "--out", str(out_dir), *extra]
    )
    assert code == 0, f"simulate failed with exit code {code}"
    return out_dir


@pytest.fixture(scope="session")
def example1_config_path(tmp_path_factory):
    return _write_example_config(tmp_path_factory, 1)


@pytest.fixture(scope="session")
def example3_config_path(tmp_path_factory):
    return _write_example_config(tmp_path_factory, 3)


@pytest.fixture(scope="session")
def example1_data(tmp_path_factory, example1_config_path):
    """Full-resolution forward data for the first reference configuration."""
    out = tmp_path_factory.mktemp("data1")
    return _simulate(example1_config_path, out)


@pytest.fixture(scope="session")
def example3_data(tmp_path_factory, example3_config_path):
    out = tmp_path_factory.mktemp("data3")
    return _simulate(example3_config_path, out)


@pytest.fixture(scope="session")
def example1_media():
    return parse_config(example_config_text(1)).media


@pytest.fixture(scope="session")
def example3_loaded():
    return parse_config(example_config_text(3))
