import numpy as np
import pytest

from pnprev import BathConditions, ConstantProfile, Transport, build_geometry


@pytest.fixture
def geom_unit():
    """Uniform channel with junctions at thirds: alpha = 1/3, beta = 2/3."""
    return build_geometry(ConstantProfile(1.0), 1.0 / 3.0, 2.0 / 3.0)


@pytest.fixture
def bath_02_1():
    return BathConditions(l=0.2, r=1.0, z1=1.0)


@pytest.fixture
def bath_sym():
    return BathConditions(l=1.0, r=1.0, z1=1.0)


@pytest.fixture
def transport_eq():
    return Transport(D1=1.0, D2=1.0)


def random_parameter_sets(rng, n, q0_lo=-100.0, q0_hi=100.0, z1_random=True):
    """Admissible random (Q0, theta, z1, l, r, alpha, beta) draws."""
    Q0 = rng.uniform(q0_lo, q0_hi, n)
    theta = rng.uniform(-0.95, 0.95, n)
    l = rng.uniform(0.05, 20.0, n)
    r = rng.uniform(0.05, 20.0, n)
    alpha = rng.uniform(0.02, 0.90, n)
    beta = alpha + (0.98 - alpha) * rng.uniform(0.05, 1.0, n)
    z1 = rng.uniform(0.5, 3.0, n) if z1_random else np.ones(n)
    return Q0, theta, z1, l, r, alpha, beta
