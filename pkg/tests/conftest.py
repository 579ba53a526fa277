import shutil

import pytest

from invlearn.engine import INVARIANT, UnsoundResult, infer, verify_invariant
from invlearn.solver import Solver, SolverConfig

# Every engine run made through ``run_engine`` lands here so the soundness
# gate can inspect all of them at the end of the acceptance module.
ENGINE_RUNS: list = []
CRITERIA: dict = {}

HAVE_Z3 = shutil.which("z3") is not None


def run_engine(loop, cfg):
    """infer() plus an extra re-check of any invariant with a fresh solver."""
    try:
        res = infer(loop, cfg)
    except UnsoundResult as exc:
        ENGINE_RUNS.append({"loop": loop.name, "seed": cfg.seed, "unsound": str(exc)})
        raise
    entry = {"loop": loop.name, "seed": cfg.seed, "outcome": res.outcome, "unsound": None}
    if res.outcome == INVARIANT:
        ok = verify_invariant(loop, res.invariant, Solver(integers=loop.integers))
        if ok and HAVE_Z3:
            ok = verify_invariant(loop, res.invariant, Solver(SolverConfig(backend="external"), integers=loop.integers))
            entry["z3"] = True
        if not ok:
            entry["unsound"] = str(res.invariant)
    ENGINE_RUNS.append(entry)
    return res


def record(criterion: int, ok: bool, detail: str):
    CRITERIA[criterion] = (ok, detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def solver():
    return Solver()
