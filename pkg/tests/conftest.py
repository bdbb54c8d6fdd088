import numpy as np
import pytest

from torus_choreo.cli import bundled_config, load_config, run_proof
from torus_choreo.solver import seed_bundled_trefoil, solve


@pytest.fixture(scope="session")
def trefoil():
    """Refined trefoil: (xbar, ref, report, params)."""
    seed = seed_bundled_trefoil()
    xbar, ref, report = solve(seed)
    return xbar, ref, report, seed.params


@pytest.fixture(scope="session")
def verified_case():
    """Four-body 10:9 orbit at the resolution where the bounds close."""
    cfg = load_config(bundled_config("n4_k2_10-9_m40"))
    cert, xbar = run_proof(cfg, None)
    return cfg, cert, xbar


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""

    def record(label: str, passed: bool, detail: str = "") -> bool:
        line = f"{'PASS' if passed else 'FAIL'}  {label}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
