import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def two_region_rgb(size=16):
    rgb = np.zeros((size, size, 3), dtype=np.uint8)
    rgb[:, : size // 2] = (200, 30, 30)
    rgb[:, size // 2 :] = (30, 30, 200)
    truth = np.zeros((size, size), dtype=np.int64)
    truth[:, size // 2 :] = 1
    return rgb, truth


@pytest.fixture
def two_region():
    from afagraph.imgio import image_from_rgb8

    rgb, truth = two_region_rgb()
    return image_from_rgb8(rgb), truth


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def record_criterion(name: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
