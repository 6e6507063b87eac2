import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mistreatment.data import Dataset
from mistreatment.dataio import SchemaConfig, fixture_path, load_csv

settings.register_profile(
    "default", max_examples=50, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_dataset(rng, n=60, d=2, balance=0.5):
    X = rng.normal(size=(n, d)) * rng.uniform(0.5, 3.0, size=d)
    z = (rng.random(n) < balance).astype(int)
    z[0], z[1] = 0, 1
    y = np.where(rng.random(n) < 0.5, 1, -1)
    y[2], y[3] = 1, -1
    return Dataset(X, y, z)


@pytest.fixture
def figure1():
    return load_csv(fixture_path("figure1.csv"), SchemaConfig.load(fixture_path("figure1_schema.json")))


# decisions of the three example classifiers, rows in fixture order (males first)
FIGURE1_DECISIONS = {
    "c1": [1, 1, 1, 1, 1, -1],
    "c2": [1, 1, -1, -1, 1, 1],
    "c3": [1, -1, 1, 1, 1, -1],
}


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
