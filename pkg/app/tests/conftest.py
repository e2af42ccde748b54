# app/tests/conftest.py

"""
Test Fixtures and Factories
---------------------------

Fixtures and factories shared by the unit and integration tests:

- gossip model and linear problem factories
- a config file factory writing JSON under ``tmp_path``
- FastAPI TestClient and click CliRunner
- settings pinned to one in-process worker and a temporary output directory
"""

import copy
import json
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from app.core import gossip as gossip_core
from app.core.config import settings
from app.core.hnorm import metric_for
from app.main import app
from app.models import GossipModel, ProblemInstance, StepSchedule
from app.services.problem_service import ProblemService


BASE_CONFIG = {
    "schema_version": 1,
    "name": "test-linear",
    "gossip": {"generator": "complete", "M": 2},
    "problem": {
        "kind": "linear",
        "theta": [[0.9], [1.1]],
        "beta": 0.05,
        "epsilon": 0.125,
        "region": {"kind": "ball", "radius": 0.5},
    },
    "schedule": {"kind": "harmonic", "scale": 5.0, "shift": 10.0},
    "T_prime": 1.0,
    "n0": 100,
    "horizon": 2000,
    "replicas": 3,
    "master_seed": 11,
    "workers": 1,
}


# --------------------------
# Settings pinned for tests
# --------------------------
@pytest.fixture(autouse=True)
def pinned_settings(monkeypatch: pytest.MonkeyPatch, tmp_path: Path) -> None:
    """
    Runs replicas in-process and writes run directories under ``tmp_path``.

    :return: None
    """

    monkeypatch.setattr(settings, "DEFAULT_WORKERS", 1)
    monkeypatch.setattr(settings, "OUTPUT_DIR", str(tmp_path / "runs"))


# --------------------------
# Factory make_gossip
# --------------------------
@pytest.fixture()
def make_gossip() -> Callable:
    """
    Factory building a validated gossip model.

    :return: Factory ``(generator="complete", M=2, matrix=None) -> GossipModel``.
    :rtype: Callable
    """

    def _make(generator: str = "complete", M: int = 2, matrix=None) -> GossipModel:
        if matrix is not None:
            return gossip_core.validate_gossip(matrix)
        return gossip_core.validate_gossip(gossip_core.GENERATORS[generator](M))

    return _make


# --------------------------
# Schedule used by the problem factory
# --------------------------
@pytest.fixture()
def scaled_harmonic() -> StepSchedule:
    """a(n) = 5/(10 + n)."""
    return StepSchedule(kind="harmonic", scale=5.0, shift=10.0)


# --------------------------
# Factory make_linear_problem
# --------------------------
@pytest.fixture()
def make_linear_problem(make_gossip: Callable, scaled_harmonic: StepSchedule) -> Callable:
    """
    Factory building the linear test problem h^i(x) = θ_i − x.

    :param make_gossip: Gossip factory.
    :type make_gossip: Callable

    :param scaled_harmonic: Schedule whose a(0) enters T.
    :type scaled_harmonic: StepSchedule

    :return: Factory returning a ProblemInstance.
    :rtype: Callable
    """

    def _make(
        gossip: Optional[GossipModel] = None,
        theta=((0.9,), (1.1,)),
        beta: float = 0.05,
        epsilon: float = 0.125,
        radius: float = 0.5,
        T_prime: float = 1.0,
        resolution: int = 17,
    ) -> ProblemInstance:
        """
        :param gossip: Gossip model; complete on two nodes when None.
        :param theta: Node targets, one row per node.
        :param beta: Noise amplitude.
        :param epsilon: Level of A^ε.
        :param radius: Radius of the entry ball around the equilibrium.
        :param T_prime: Target epoch length; T = T′ + a(0).
        :param resolution: Grid points per axis.
        """

        gossip = make_gossip() if gossip is None else gossip
        T = T_prime + scaled_harmonic.c * scaled_harmonic.a(0)
        return ProblemService.build_linear(
            gossip, metric_for(gossip), np.asarray(theta, dtype=float), beta, epsilon, T,
            radius=radius, resolution=resolution,
        )

    return _make


# --------------------------
# Factory make_config
# --------------------------
@pytest.fixture()
def make_config(tmp_path: Path) -> Callable:
    """
    Factory writing an experiment config to ``tmp_path``.

    Top-level keys of ``overrides`` replace the base config; the nested
    ``problem`` and ``schedule`` sections are merged key by key.

    :return: Factory ``(name="config.json", **overrides) -> Path``.
    :rtype: Callable
    """

    def _make(name: str = "config.json", **overrides) -> Path:
        data = copy.deepcopy(BASE_CONFIG)
        for key, value in overrides.items():
            if key in ("problem", "schedule") and isinstance(value, dict):
                data[key].update(value)
            else:
                data[key] = value
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2), encoding="utf-8")
        return path

    return _make


@pytest.fixture()
def config_payload() -> dict:
    """Base config as a JSON body."""
    return copy.deepcopy(BASE_CONFIG)


# --------------------------
# Fixture TestClient
# --------------------------
@pytest.fixture()
def test_client() -> TestClient:
    """
    Provides a FastAPI TestClient for making HTTP requests in tests.

    :return: TestClient instance for the FastAPI app
    :rtype: TestClient
    """

    return TestClient(app)


# --------------------------
# Fixture CliRunner
# --------------------------
@pytest.fixture()
def cli_runner() -> CliRunner:
    """Click runner invoking the CLI in-process."""
    return CliRunner()
