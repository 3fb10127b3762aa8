import numpy as np
import pytest

from eitlsm import (
    build_disk_mesh,
    compute_background_nd_map,
    compute_nd_map,
    parse_scenario,
)


def fourier_coefficient(fn, n, samples=1 << 14):
    """Independent oracle: (1/2pi) int f(theta) exp(-i n theta) dtheta by
    dense periodic trapezoid, detached from any mesh."""
    theta = 2.0 * np.pi * np.arange(samples) / samples
    return np.sum(fn(theta) * np.exp(-1j * n * theta)) / samples


def two_phase_diagonal(n, rho, sigma):
    """Concentric-disk ND diagonal: separation of variables oracle."""
    n = np.abs(np.asarray(n, dtype=float))
    mu = (1.0 - sigma) / (1.0 + sigma)
    k = rho ** (2.0 * n)
    return (1.0 / n) * (1.0 + mu * k) / (1.0 - mu * k)


CONCENTRIC_DOC = {
    "inclusions": [
        {"shape": "disk", "center": [0.0, 0.0], "radius": 0.5,
         "h": [[1.0, 0.0], [0.0, 1.0]]}
    ]
}

# anisotropic complex perturbation satisfying both model assumptions
ANISO_DOC = {
    "inclusions": [
        {"shape": "ellipse", "center": [0.2, 0.1], "semi_axes": [0.3, 0.2], "tilt": 0.4,
         "h": [[[1.0, -0.5], [0.3, -0.1]],
               [[0.3, -0.1], [2.0, -0.3]]]}
    ]
}

SWEEP_DOC = {
    "inclusions": [
        {"shape": "disk", "center": [0.3, 0.0], "radius": 0.25,
         "h": [[2.0, 0.0], [0.0, 2.0]]}
    ]
}


@pytest.fixture(scope="session")
def concentric_field():
    return parse_scenario(CONCENTRIC_DOC)


@pytest.fixture(scope="session")
def aniso_field():
    return parse_scenario(ANISO_DOC)


@pytest.fixture(scope="session")
def mesh02():
    return build_disk_mesh(0.02)


@pytest.fixture(scope="session")
def mesh05():
    return build_disk_mesh(0.05)


@pytest.fixture(scope="session")
def background_nd05(mesh05):
    return compute_background_nd_map(mesh05, 12)


@pytest.fixture(scope="session")
def concentric_nd05(mesh05, concentric_field):
    return compute_nd_map(mesh05, concentric_field, 12)
