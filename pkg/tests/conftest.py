import numpy as np
import pytest

from tomobpdn import (
    AcquisitionGeometry,
    Objective,
    ParameterGrid,
    build_steering_matrix,
    demo_geometry,
)
from tomobpdn.rng import substream


@pytest.fixture(scope="session")
def geometry29() -> AcquisitionGeometry:
    return demo_geometry()


@pytest.fixture(scope="session")
def small_grid(geometry29) -> ParameterGrid:
    rho = geometry29.rayleigh_resolution
    return ParameterGrid.uniform((-2.0 * rho, 2.0 * rho), 101)


def random_objective(seed: int, n: int = 8, l_total: int = 12, lambda_reg: float = 0.3) -> Objective:
    """Small dense complex instance with entries in [-1, 1]."""
    rng = substream(seed, 17)
    a = rng.uniform(-1, 1, (n, l_total)) + 1j * rng.uniform(-1, 1, (n, l_total))
    b = rng.uniform(-1, 1, n) + 1j * rng.uniform(-1, 1, n)
    return Objective(dictionary=a, measurement=b, lambda_reg=lambda_reg)


def fourier_instance(seed: int, n: int = 29, l_total: int = 100, snr_db: float = 10.0):
    """Tomographic instance: random stack, two on-grid scatterers, noise."""
    import tomobpdn as t

    geom = demo_geometry(seed=seed)
    rho = geom.rayleigh_resolution
    grid = ParameterGrid.uniform((-5.0 * rho, 5.0 * rho), l_total)
    i1, i2 = l_total // 3, (2 * l_total) // 3
    scenario = t.Scenario(
        geometry=geom,
        scatterers=(
            t.Scatterer(elevation=float(grid.elevation[i1])),
            t.Scatterer(elevation=float(grid.elevation[i2]), phase=0.7),
        ),
        snr_db=(snr_db, snr_db),
        seed=seed,
    )
    g = t.synthesize_pixel(scenario, substream(seed, 3))
    dictionary = build_steering_matrix(geom, grid).entries
    obj = t.build_objective(dictionary, g, t.SolverConfig())
    return obj, grid, scenario
