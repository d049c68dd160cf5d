"""Shared fixtures: desk-scale datasets rendered once per session."""

from __future__ import annotations

import pytest

from sonopipe import (
    ALL_GESTURES,
    PhantomSpec,
    make_phantom,
    render_gesture,
    train_from_frames,
)

# Verdict lines collected by the acceptance tests; echoed after the run
# so they survive output capture.
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance verdicts")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)


def render_class_frames(spec, per_class):
    base = make_phantom(spec)
    return {
        label: [
            render_gesture(base, label, 1.0, spec, draw=i, timestamp_us=i, seq=i)
            for i in range(per_class)
        ]
        for label in ALL_GESTURES
    }


@pytest.fixture(scope="session")
def quiet_spec():
    return PhantomSpec(seed=42, dims=(48, 48), noise_sigma=0.01)


@pytest.fixture(scope="session")
def noisy_spec():
    return PhantomSpec(seed=42, dims=(48, 48), noise_sigma=0.15)


@pytest.fixture(scope="session")
def quiet_frames(quiet_spec):
    return render_class_frames(quiet_spec, 20)


@pytest.fixture(scope="session")
def noisy_frames(noisy_spec):
    return render_class_frames(noisy_spec, 20)


@pytest.fixture(scope="session")
def quiet_trained(quiet_frames):
    return train_from_frames(quiet_frames, k=3, template_n=10)


@pytest.fixture(scope="session")
def noisy_trained(noisy_frames):
    return train_from_frames(noisy_frames, k=3, template_n=10)
