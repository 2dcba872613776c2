import numpy as np
import pytest

from morphguard.embeddings import Dataset
from morphguard.simulator import SimulationParams, simulate_population

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(cid, text): acceptance criterion")


def pytest_runtest_logreport(report):
    marker = getattr(report, "_acceptance", None)
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        # a criterion split over several tests passes only if all of them do
        _ACCEPTANCE.setdefault(marker, []).append(report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("acceptance")
    if m is not None:
        report._acceptance = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (cid, text), outcomes in sorted(_ACCEPTANCE.items()):
        verdict = "PASS" if all(o == "passed" for o in outcomes) else "FAIL"
        terminalreporter.write_line(f"{verdict}  {cid:<4} {text}")


def make_dataset(rows, dimension=None):
    """rows: (subject, sample, role, embedding[, pair_subject])"""
    rows = list(rows)
    return Dataset(
        dimension=dimension or len(rows[0][3]),
        subject_ids=[r[0] for r in rows],
        sample_ids=[r[1] for r in rows],
        roles=[r[2] for r in rows],
        kinds=["morph" if len(r) > 4 and r[4] else "bonafide" for r in rows],
        pair_subjects=[r[4] if len(r) > 4 else "" for r in rows],
        embeddings=np.array([r[3] for r in rows], dtype=float),
    )


@pytest.fixture(scope="session")
def small_population():
    return simulate_population(SimulationParams(32, 40, 6, 150.0, 30.0, 1.0, 3))


@pytest.fixture(scope="session")
def fig3_middle():
    return simulate_population(SimulationParams(128, 250, 25, 250.0, 50.0, 1.0, 7))
