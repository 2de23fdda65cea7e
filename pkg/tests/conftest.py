import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from articulated_suspension.model import load_model
from articulated_suspension.pipeline import ForcePipeline

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def model():
    return load_model()


@pytest.fixture(scope="session")
def pipe(model):
    return ForcePipeline(model)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.normal(size=(3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def random_transform(rng, scale=1.0):
    T = np.eye(4)
    T[:3, :3] = random_rotation(rng)
    T[:3, 3] = rng.normal(size=3) * scale
    return T


def random_spd(rng, lo=0.5):
    A = rng.normal(size=(3, 3))
    return A @ A.T + lo * np.eye(3)


def central_tensor(rng):
    """Random physically realisable central inertia (triangle inequality holds)."""
    s = rng.uniform(0.1, 2.0, 3)  # second moments along principal axes
    R = random_rotation(rng)
    lam = np.array([s[1] + s[2], s[0] + s[2], s[0] + s[1]])
    return R @ np.diag(lam) @ R.T


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
