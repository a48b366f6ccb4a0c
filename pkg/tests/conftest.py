import os
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from upliftkit.data import UpliftDataset
from upliftkit.synthetic import make_email_like, make_uplift_frame

ROOT = Path(__file__).resolve().parents[1]


def hillstrom_path() -> Path | None:
    """Location of the public e-mail campaign CSV, if available locally."""
    env = os.environ.get("UPLIFTKIT_HILLSTROM")
    for cand in [env, ROOT / "data" / "hillstrom.csv", ROOT / "data" / "Hillstrom.csv"]:
        if cand and Path(cand).is_file():
            return Path(cand)
    return None


def dataset(frame: pd.DataFrame, outcome="y", treat="treat") -> UpliftDataset:
    return UpliftDataset(frame, outcome, treat)


@pytest.fixture
def small_ds():
    return dataset(make_uplift_frame(n=600, n_features=3, seed=1))


@pytest.fixture(scope="session")
def email_ds():
    return UpliftDataset(make_email_like(n=6000, seed=3), "visit", "treat")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (rep.when != "call" and not rep.failed):
        return
    number, title = marker.args
    prev = ACCEPTANCE_RESULTS.get(number, (True, title))[0]
    ACCEPTANCE_RESULTS[number] = (prev and rep.passed, title)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        ok, title = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}")
