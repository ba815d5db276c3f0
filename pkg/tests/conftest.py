import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from latentshap.experiment import ExperimentConfig, run_synthetic_experiment
from latentshap.synthetic import build_world

settings.register_profile("default", deadline=None, print_blob=True)
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"

CRITERIA = {
    1: "oracle equivalence (Kernel SHAP vs enumeration, 1e-6, < 2 min)",
    2: "local accuracy / full-coalition constraint (1e-8, >= 200 cases)",
    3: "classifier test accuracy in [95%, 100%]",
    4: "Latent SHAP mean cosine >= 0.85 at |B|=200, alpha=0, < 10 min",
    5: "Latent SHAP beats the naive baseline at all 21 cells",
    6: "noise band [0.70, 0.97] for |B|>=100, alpha in {0.05, 0.10}; Spearman <= -0.8",
    7: "identity transform reproduces Kernel SHAP bit-for-bit",
    8: "byte-identical results.csv across two runs",
    9: "invariant property suites and 10,000-row adapter echo",
}
_results: dict[int, list[tuple[bool, str]]] = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    _results.setdefault(criterion, []).append((bool(ok), detail))
    print(f"[criterion {criterion}] {'PASS' if ok else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k, title in CRITERIA.items():
        entries = _results.get(k)
        if not entries:
            tr.write_line(f"criterion {k}: NOT RUN  {title}")
            continue
        ok = all(e[0] for e in entries)
        tr.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {title}")
        for passed, detail in entries:
            tr.write_line(f"    {'ok  ' if passed else 'FAIL'} {detail}")


@pytest.fixture(scope="session")
def world():
    return build_world()


@pytest.fixture(scope="session")
def default_experiment():
    """The full default grid: 3 sizes x 7 noise levels x 100 test instances."""
    return run_synthetic_experiment(ExperimentConfig())


@pytest.fixture
def python_cmd():
    def cmd(script: str, *args: str) -> list[str]:
        return [sys.executable, str(FIXTURES / script), *args]
    return cmd


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
