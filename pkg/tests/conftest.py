import numpy as np
import pytest

from filtann import BuildParams, Dataset, build, gen_synthetic


@pytest.fixture(scope="session")
def small_ds():
    return gen_synthetic(2000, 16, 8, 0.3, seed=1)


@pytest.fixture(scope="session")
def small_graph(small_ds):
    return build(small_ds, BuildParams(m_upper=8, ef_construction=64, seed=1))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def grid_dataset(points) -> Dataset:
    return Dataset(np.asarray(points, dtype=np.float32))


# One line per acceptance criterion, printed at the end of the run.
ACCEPTANCE: dict = {}


def record(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
