import textwrap

import pytest

from killing_model import KillingModel
from scalar_fields import Domain2D

SINUSOIDAL_TAU = "sin(2*pi*x)*sin(2*pi*y)"


@pytest.fixture
def euclidean_disk():
    """R^3 over the unit disk"""
    return KillingModel(Domain2D("disk", 33, 33, radius=1.0), 1, 0, 1)


@pytest.fixture
def heisenberg_disk():
    """Nil3(1) over the disk of radius 2"""
    return KillingModel(Domain2D("disk", 33, 33, radius=2.0), 1, 1, 1)


@pytest.fixture
def hyperbolic_disk():
    """H2 x R in the Poincare disk"""
    return KillingModel(Domain2D("disk", 33, 33, radius=0.9), "2/(1 - x^2 - y^2)", 0, 1)


@pytest.fixture
def flat_torus():
    return KillingModel(Domain2D("torus", 16, 16, bounds=(0, 1, 0, 1)), 1, 0, 1)


@pytest.fixture
def sinusoidal_torus():
    return KillingModel(Domain2D("torus", 24, 24, bounds=(0, 1, 0, 1)), 1, SINUSOIDAL_TAU, 1)


@pytest.fixture
def write_config(tmp_path):
    """Write YAML config text (dedented) to a file and return its path"""
    def write(text, name="model.yaml"):
        path = tmp_path / name
        path.write_text(textwrap.dedent(text))
        return str(path)
    return write
