import math
import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lowrankpoly.hermite import CoefficientVector
from lowrankpoly.model import make_instance
from lowrankpoly.subspace import random_frame

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# Hermite coefficients of p(z) = z^2: z^2 = 1 + sqrt(2) phi_2(z)
SQUARE = (1.0, 0.0, math.sqrt(2.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def square_coef():
    return CoefficientVector(1, 2, SQUARE)


@pytest.fixture
def phase_instance():
    return make_instance(CoefficientVector(1, 2, SQUARE), random_frame(50, 1, 3))


def orthogonal(r, rng):
    Q, R = np.linalg.qr(rng.standard_normal((r, r)))
    return Q * np.sign(np.diag(R))


# (criterion, passed, detail) lines reported by tests/test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
