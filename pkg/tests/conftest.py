import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mgritopt import kernels  # noqa: E402
from mgritopt.problems import build_mp1, build_mp2  # noqa: E402
from mgritopt.sequential import run_sequential  # noqa: E402

BACKENDS = ["python"] + (["cython"] if kernels.COMPILED_AVAILABLE else [])

# Values computed once by the dense oracles in tests/oracles.py and frozen.
FROZEN = {
    "mp1_n40_seed0_Nt": 8520,
    "mp1_n3_nt16_norm_inv": 4.65221825840889,
    "mp1_n3_seed0_u0": [0.01652764, 0.81327024, 0.91275558],
    "mp1_n3_seed0_u2": [0.29782443, 0.51517133, 0.43616368],
}


@pytest.fixture(params=BACKENDS)
def backend(request):
    with kernels.use_backend(request.param):
        yield request.param


@pytest.fixture(scope="session")
def mp1_40():
    return build_mp1(40, seed=0)


@pytest.fixture(scope="session")
def mp1_40_seq(mp1_40):
    return run_sequential(mp1_40)


@pytest.fixture(scope="session")
def mp1_3():
    return build_mp1(3, seed=0)


@pytest.fixture(scope="session")
def mp2_1d_64():
    return build_mp2(1, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def criterion():
    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"Criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
