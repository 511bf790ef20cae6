import numpy as np
import pytest

from moi.config import PipelineConfig
from moi.graph import ExplanationGraph
from moi.models import fit_ridge
from moi.synthetic import SyntheticSpec, gen_additive, linear_shap


@pytest.fixture
def two_triangles() -> ExplanationGraph:
    src = np.array([0, 0, 1, 3, 3, 4])
    dst = np.array([1, 2, 2, 4, 5, 5])
    return ExplanationGraph(6, src, dst, np.ones(6))


@pytest.fixture(scope="session")
def recovery_fixture():
    """Planted additive blocks -> ridge -> exact linear attributions."""
    spec = SyntheticSpec(family="additive", sizes=(8, 8, 8, 8), rho=0.8, snr=10.0, n=4000, seed=0)
    ds = gen_additive(spec)
    model = fit_ridge(ds.x, ds.y, lam=1e-6)
    phi = linear_shap(model, ds.x, ds.x)
    return ds, model, phi


@pytest.fixture(scope="session")
def default_config() -> PipelineConfig:
    return PipelineConfig()
