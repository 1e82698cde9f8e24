import numpy as np
import pytest

import latentvsr as lv


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def default_schedule():
    return lv.make_schedule()


@pytest.fixture
def small_video(rng):
    frames = rng.random((3, 3, 16, 16))
    return lv.Video(frames=frames)
