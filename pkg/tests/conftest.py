import logging

import numpy as np
import pytest

from corpuscle_lab.dependencies.run import sample_offsets
from corpuscle_lab.models.constants import PhysicalConstants
from corpuscle_lab.physics.corpuscle import WaveCorpuscle
from corpuscle_lab.physics.dynamics import integrate_newton
from corpuscle_lab.physics.formfactor import (
    FormFactor,
    gaussian_profile,
    reconstruct_nonlinearity,
    scaled_nonlinearity,
    sech_profile,
)
from corpuscle_lab.presets import INITIAL_STATE, quadratic_potentials, uniform_b_P3, uniform_b_potentials

SEED = 12345


def observed_order(steps, errors) -> float:
    """Least-squares slope of log(error) against log(step)."""
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


def ball_points(rng: np.random.Generator, count: int, radius: float) -> np.ndarray:
    return sample_offsets(rng, count, radius)


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture(scope="session")
def constants():
    return PhysicalConstants()


@pytest.fixture(scope="session")
def uniform_b():
    return uniform_b_potentials()


def preset_trajectory(pot, constants):
    return integrate_newton(
        pot,
        INITIAL_STATE["r0"],
        INITIAL_STATE["v0"],
        INITIAL_STATE["t0"],
        INITIAL_STATE["t1"],
        INITIAL_STATE["step"],
        constants,
    )


def points_near(traj, rng: np.random.Generator, radius: float, count: int = 40) -> list:
    """(t, x) pairs within radius of the center, away from the ends of the trajectory."""
    times = rng.uniform(0.05, 0.95, count)
    offsets = ball_points(rng, count, radius)
    return [(float(t), traj.position(float(t)) + y) for t, y in zip(times, offsets)]


@pytest.fixture(scope="session")
def preset_traj(uniform_b, constants):
    return preset_trajectory(uniform_b, constants)


@pytest.fixture(scope="session")
def quadratic():
    return quadratic_potentials()


@pytest.fixture(scope="session")
def quadratic_traj(quadratic, constants):
    return preset_trajectory(quadratic, constants)


@pytest.fixture(scope="session")
def gaussian_nl():
    return reconstruct_nonlinearity(gaussian_profile())


@pytest.fixture(scope="session")
def sech_nl():
    return reconstruct_nonlinearity(sech_profile())


@pytest.fixture(scope="session")
def corpuscle(preset_traj, uniform_b, constants):
    return WaveCorpuscle(FormFactor(gaussian_profile(), 0.1), preset_traj, uniform_b, uniform_b_P3(), constants)


@pytest.fixture(scope="session")
def corpuscle_nl(gaussian_nl):
    return scaled_nonlinearity(gaussian_nl, 0.1)


@pytest.fixture
def corpuscle_points(corpuscle, rng):
    return points_near(corpuscle.traj, rng, 3.0 * corpuscle.ff.a)


@pytest.fixture(autouse=True)
def package_logging():
    """Undo the CLI logging setup so caplog sees package records."""
    yield
    logger = logging.getLogger("corpuscle_lab")
    logger.handlers.clear()
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
