import io
import json

import pytest

from conftest import run_engine
from helpers import CORPUS, corpus_loop
from invlearn.engine import (
    INVARIANT,
    NO_INVARIANT,
    TIMEOUT,
    EngineConfig,
    UnsoundResult,
    infer,
    run_corpus,
    verify_invariant,
)
from invlearn.frontend import parse, parse_formula
from invlearn.logic import TRUE

DEGENERATE = "rat x; pre { true } while (false) { nop; } post { true }"
NO_INV = "rat x; pre { x = 3 } while (x < 1) { x := x + 1; } post { x = 2 }"
# the gate passes but no invariant exists: x = 0 reaches x = 1 and exits
# with x != 2
HOPELESS = "int x; pre { x = 0 } while (x < 1) { x := x + 1; } post { x = 2 }"

STATS_KEYS = {"example", "outcome", "invariant", "P", "MEM", "EQ", "RE", "time_ms", "batches"}


def without_time(d):
    return {k: v for k, v in d.items() if k != "time_ms"}


def test_degenerate_loop_first_equivalence():
    res = run_engine(parse(DEGENERATE, "degenerate"), EngineConfig(seed=0, timeout_s=10))
    assert res.outcome == INVARIANT and res.invariant == TRUE
    assert res.eq == 1 and res.mem == 0 and res.restarts == 0


def test_no_invariant_gate():
    res = infer(parse(NO_INV, "gate"), EngineConfig(timeout_s=10))
    assert res.outcome == NO_INVARIANT and res.invariant is None and res.eq == 0


def test_semi_algorithm_runs_to_timeout():
    res = infer(parse(HOPELESS, "hopeless"), EngineConfig(timeout_s=2))
    assert res.outcome == TIMEOUT
    res = infer(parse(HOPELESS, "hopeless"), EngineConfig(timeout_s=30, max_restarts=3))
    assert res.outcome == TIMEOUT and res.restarts == 4


def test_determinism_and_stats_schema():
    loop = corpus_loop("tar")
    a = infer(loop, EngineConfig(seed=7, timeout_s=60)).to_json()
    b = infer(loop, EngineConfig(seed=7, timeout_s=60)).to_json()
    assert without_time(a) == without_time(b)
    assert set(a) == STATS_KEYS
    assert set(a["batches"]) == {"initial", "conjecture", "conflict"}
    assert a["outcome"] == INVARIANT and isinstance(a["invariant"], str)
    assert all(isinstance(a[k], int) for k in ("P", "MEM", "EQ", "RE", "time_ms"))
    assert sum(a["batches"].values()) == a["P"]
    json.dumps(a)


def test_trace_events_and_monotone_predicates():
    buf = io.StringIO()
    loop = corpus_loop("intro")
    res = run_engine(loop, EngineConfig(seed=1, timeout_s=60, trace=buf))
    events = [json.loads(line) for line in buf.getvalue().splitlines()]
    kinds = {e["event"] for e in events}
    assert {"predicates", "equiv", "outcome"} <= kinds
    sizes = [e["predicates"] for e in events if e["event"] == "restart"]
    assert sizes == sorted(sizes)
    assert events[-1]["event"] == "outcome" and events[-1]["outcome"] == res.outcome
    if res.outcome == INVARIANT:
        assert verify_invariant(loop, parse_formula(events[-1]["invariant"], loop.sorts))


def test_trace_to_file(tmp_path):
    path = tmp_path / "t.jsonl"
    infer(corpus_loop("tar"), EngineConfig(trace=str(path)))
    assert path.read_text().strip()


def test_unsound_result_is_raised(monkeypatch):
    import invlearn.engine as engine

    monkeypatch.setattr(engine, "verify_invariant", lambda loop, theta, solver=None: False)
    with pytest.raises(UnsoundResult):
        engine.infer(parse(DEGENERATE), EngineConfig(timeout_s=10))


@pytest.mark.parametrize(
    "kw",
    [{"timeout_s": 0}, {"seed": -1}, {"seed": 2**64}, {"under": "loose"}, {"max_restarts": -1}],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        EngineConfig(**kw)


def test_run_corpus_reports_errors_and_rows(tmp_path):
    (tmp_path / "a.loop").write_text((CORPUS / "tar.loop").read_text())
    (tmp_path / "b.loop").write_text("rat x; pre { x > } while (x > 0) { nop; } post { true }")
    report = run_corpus(sorted(tmp_path.glob("*.loop")), EngineConfig(timeout_s=30), runs=2)
    data = report.to_json()
    assert len(data["rows"]) == 1 and len(data["errors"]) == 1
    row = data["rows"][0]
    assert row["runs"] == 2 and row["invariants"] == 2
    for key in ("P", "MEM", "EQ", "RE", "time_ms"):
        assert row[key]["min"] <= row[key]["mean"] <= row[key]["max"]
    assert run_corpus([]).to_json() == {"rows": [], "errors": []}


def test_run_corpus_seeds_follow_config():
    loop_path = CORPUS / "tar.loop"
    report = run_corpus([loop_path], EngineConfig(seed=3, timeout_s=30), runs=2)
    again = [infer(corpus_loop("tar"), EngineConfig(seed=s, timeout_s=30)) for s in (3, 4)]
    assert [without_time(r.to_json()) for r in report.rows[0].runs] == [without_time(r.to_json()) for r in again]
