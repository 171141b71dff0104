import math

import numpy as np
import pytest
from hypothesis import settings

from homobound.geometry import CameraIntrinsics, PerturbationScenario, ScenarioKind

settings.register_profile("ci", deadline=None, max_examples=60)
settings.load_profile("ci")

DEG = math.pi / 180


def stock_scenarios(z=10.0):
    """The six scenarios at the small amplitudes used throughout the tests."""
    return [
        PerturbationScenario(ScenarioKind.YAW, (0.0, 5 * DEG)),
        PerturbationScenario(ScenarioKind.ROLL, (0.0, 5 * DEG)),
        PerturbationScenario(ScenarioKind.PITCH, (0.0, 5 * DEG)),
        PerturbationScenario(ScenarioKind.TRANS_X, (0.0, 1.0), z),
        PerturbationScenario(ScenarioKind.TRANS_Y, (0.0, 1.0), z),
        PerturbationScenario(ScenarioKind.TRANS_Z, (0.0, 1.0), z),
    ]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def intr28():
    return CameraIntrinsics.for_image(28, 28)
