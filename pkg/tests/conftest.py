import sys
from pathlib import Path

import numpy as np
import pytest

from twoloop.config import RunConfig

FIXTURES = Path(__file__).parent / "fixtures"


def fixture_command(script: str, *extra: str) -> str:
    """Command template running a fixture script with the current interpreter."""
    args = " ".join(extra)
    return f"{sys.executable} {FIXTURES / script} {{params_file}} {{fitness_file}} {args}".strip()


@pytest.fixture
def make_config(tmp_path):
    def factory(**overrides) -> RunConfig:
        base = dict(run_name="run", optimizee="sphere", optimizer="ga", population_size=8, generations=3,
                    optimizee_params={"dimension": 3}, results_root=str(tmp_path / "results"),
                    worst_fitness=-1e9, seed=7)
        base.update(overrides)
        return RunConfig(**base)

    return factory


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, (verdict, title, detail) in sorted(acceptance.RESULTS.items()):
        terminalreporter.write_line(f"{verdict} {number:2d} {title}: {detail}")
