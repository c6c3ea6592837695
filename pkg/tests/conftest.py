"""Shared fixtures and the acceptance-criteria summary hook."""

import pytest

from abrplan import CapacityTrace, QualityLevel, VideoSpec


@pytest.fixture
def toy_spec() -> VideoSpec:
    """4 segments x 2 frames at 2 fps, two levels, 2-frame prefetch.

    Small enough that every session can be checked by hand.
    """
    return VideoSpec(
        n_segments=4,
        frames_per_segment=2,
        frame_rate=2.0,
        levels=(QualityLevel(8.0, 0.5), QualityLevel(16.0, 1.0)),
        prefetch_frames=2,
    )


@pytest.fixture
def toy_trace() -> CapacityTrace:
    """6 one-second slots matched to toy_spec's bit scale."""
    return CapacityTrace(slot_duration=1.0, capacities=(16.0, 8.0, 16.0, 16.0, 16.0, 16.0))


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(n): acceptance criterion number for the summary line"
    )


_CRITERION_RESULTS: dict[int, str] = {}


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    marker_n = getattr(report, "_criterion", None)
    if marker_n is not None:
        _CRITERION_RESULTS[marker_n] = "PASS" if report.passed else "FAIL"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report._criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERION_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_CRITERION_RESULTS):
        terminalreporter.write_line(f"CRITERION {n}: {_CRITERION_RESULTS[n]}")
