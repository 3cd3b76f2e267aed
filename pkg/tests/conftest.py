import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

from manrom import _kernels  # noqa: E402


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    # First call of a jitted kernel pays the compile cost; do it once up
    # front so individual test timings stay meaningful.
    _kernels.warm_up()
