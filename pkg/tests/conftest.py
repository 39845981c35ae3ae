"""Shared fixtures: canonical instances loaded from the repo files."""

from pathlib import Path

import pytest

from repmab.environment import load_instance, solve_oracle

INSTANCE_DIR = Path(__file__).resolve().parents[1] / "instances"


@pytest.fixture(scope="session")
def reference_soft():
    return load_instance(INSTANCE_DIR / "reference_soft.json")


@pytest.fixture(scope="session")
def reference_unconstrained():
    return load_instance(INSTANCE_DIR / "reference_unconstrained.json")


@pytest.fixture(scope="session")
def hard_slater():
    return load_instance(INSTANCE_DIR / "hard_slater.json")


@pytest.fixture(scope="session")
def three_arm_gaps():
    return load_instance(INSTANCE_DIR / "three_arm_gaps.json")


@pytest.fixture(scope="session")
def hard_slater_oracle(hard_slater):
    return solve_oracle(hard_slater)
