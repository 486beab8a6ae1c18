import time

import numpy as np
import pytest

from bellfilter.homsim import preset, simulate
from bellfilter.polarization import TOMOGRAPHIC_LABELS
from bellfilter.tomography import bootstrap, mle_process

PAPER_SEEDS = range(10)
HOLDOUT = ("LL", "RR")
RATE = 1e4


@pytest.fixture(scope="session")
def paper_runs():
    """seed -> (record incl. held-out rows, process MLE) for the paper-like preset."""
    out = {}
    for seed in PAPER_SEEDS:
        rec = simulate(preset("paper-like"), RATE, seed, TOMOGRAPHIC_LABELS + HOLDOUT)
        out[seed] = rec, mle_process(rec)
    return out


@pytest.fixture(scope="session")
def ideal_run():
    t0 = time.perf_counter()
    rec = simulate(preset("ideal"), 1e6, 0)
    res = mle_process(rec)
    return rec, res, time.perf_counter() - t0


@pytest.fixture(scope="session")
def bootstrap_ensembles(paper_runs):
    """250 replicas each of the paper-like (seed 0) and ideal records at rate 1e4."""
    paper_rec = paper_runs[0][0]
    ideal_rec = simulate(preset("ideal"), RATE, 0)
    return {
        "paper-like": bootstrap(paper_rec, 250, seed=0),
        "ideal": bootstrap(ideal_rec, 250, seed=0),
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = []


def pytest_runtest_logreport(report):
    if report.when != "call" or "test_acceptance.py" not in report.nodeid:
        return
    props = dict(report.user_properties)
    if "criterion" in props:
        _ACCEPTANCE.append((props["criterion"], report.outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, outcome, detail in sorted(_ACCEPTANCE, key=lambda r: r[0]):
        flag = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {crit:>2}: {flag}  {detail}")
