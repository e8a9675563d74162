import numpy as np
import pytest

from evcorner.pipeline import DetectorConfig
from evcorner.synth import generate, shapes_scene

# Parameters for low-texture scenes of a few polygons; same as configs/shapes.cfg.
SHAPES_CONFIG = DetectorConfig(lam=1.0, surface="down2", polarity="merged")

ACCEPTANCE_RESULTS = {}


def record(number: int, name: str, passed: bool, detail: str = ""):
    ACCEPTANCE_RESULTS[number] = (name, bool(passed), detail)
    return passed


@pytest.fixture(scope="session")
def shapes_stream():
    spec = shapes_scene(seed=0)
    events, truth = generate(spec)
    return spec, events, truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        name, passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(
            f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}")
