import pytest
from fastapi.testclient import TestClient

from backend.app.main import app
from backend.app.params import ClassicalParams, ModelParams, SeriesControl


@pytest.fixture(name="client")
def client_fixture(monkeypatch):
    # Provides a FastAPI TestClient running on built-in defaults (no QBM_CONFIG file).

    monkeypatch.delenv("QBM_CONFIG", raising=False)
    with TestClient(app) as test_client:
        yield test_client

    app.dependency_overrides.clear()


@pytest.fixture(name="make_params")
def make_params_fixture():
    # Factory for quantum parameters near the classical limit (T=0.053, nu=1e7 unless overridden).

    def _make(gamma: float, **overrides) -> ModelParams:
        values = {"gamma": gamma, "temperature": 0.053, "nu": 1e7}
        values.update(overrides)
        return ModelParams(**values)

    return _make


@pytest.fixture(name="overdamped")
def overdamped_fixture(make_params) -> ModelParams:
    return make_params(4.0)


@pytest.fixture(name="periodic")
def periodic_fixture(make_params) -> ModelParams:
    return make_params(1.0)


@pytest.fixture(name="cold_bath")
def cold_bath_fixture() -> ModelParams:
    # Low nu, so the quantum corrections are large; truncated sums stay bounded by n_max.
    return ModelParams(gamma=1.0, temperature=1.0, nu=3.0, series=SeriesControl(n_max=10**6))


@pytest.fixture(name="classical_params")
def classical_params_fixture():
    def _make(gamma: float, temperature: float = 1.0) -> ClassicalParams:
        return ClassicalParams(gamma=gamma, temperature=temperature)

    return _make
