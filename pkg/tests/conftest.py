import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from camprecond.camera import PinholeCamera
from camprecond.geometry import look_at
from camprecond.harness import WORLD_UP

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

FROZEN = json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture
def frozen():
    return FROZEN


def realistic_camera(seed=0, k1=0.0, k2=0.0) -> PinholeCamera:
    """A 640x480 camera about four units from the origin, looking at it."""
    rng = np.random.default_rng(seed)
    c = rng.normal(size=3)
    c[1] *= 0.3
    c = 4.0 * c / np.linalg.norm(c)
    f = rng.uniform(500.0, 1000.0)
    pose = look_at(c, rng.normal(scale=0.1, size=3), WORLD_UP)
    return PinholeCamera(f, f * rng.uniform(0.98, 1.02), 320.0 + rng.normal(scale=5), 240.0 + rng.normal(scale=5),
                         k1, k2, pose, 640, 480)


@pytest.fixture
def camera():
    return realistic_camera(0, k1=-0.05, k2=0.01)


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion and fail the test on FAIL."""

    def report(number: int, ok: bool, detail: str):
        ACCEPTANCE[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, ACCEPTANCE[number]

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
