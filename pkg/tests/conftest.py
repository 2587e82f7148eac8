import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hopfdec.complex import build_sphere3_mesh  # noqa: E402
from hopfdec.forms import s2_area_extended  # noqa: E402


@pytest.fixture(scope="session")
def s3_meshes():
    cache = {}

    def get(level):
        if level not in cache:
            cache[level] = build_sphere3_mesh(level)
        return cache[level]

    return get


@pytest.fixture(scope="session")
def alpha():
    return s2_area_extended()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "RESULTS", None):
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
