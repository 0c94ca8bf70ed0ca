from __future__ import annotations

import io
import json

import pytest

from kgreason import toy
from kgreason.eval_harness import (
    DatasetError,
    EvalRecord,
    Report,
    RunConfig,
    accuracy,
    f1,
    hits_at_1,
    load_dataset,
    run_benchmark,
)
from kgreason.llm_provider import ScriptedProvider
from kgreason.reasoning import ReasonerConfig

from .metric_fixture import PAIRS


def lines(*objs):
    return io.StringIO("".join(json.dumps(o) + "\n" for o in objs))


def test_load_empty():
    assert load_dataset(io.StringIO("")) == []


def test_load_two_records():
    recs = load_dataset(lines({"id": "a", "question": "q?", "answers": ["x"]},
                              {"id": "b", "question": "r?", "answers": ["y", "z"], "tags": ["t"]}))
    assert [r.id for r in recs] == ["a", "b"]
    assert recs[1].gold == frozenset({"y", "z"}) and recs[1].tags == ("t",)


@pytest.mark.parametrize("text,line", [
    ('{"id":"a","question":"q","answers":["x"]}\n{"id":"a","question":"q","answers":["x"]}\n', 2),
    ('{"id":"a","question":"q","answers":["x"]}\n{oops\n', 2),
    ('{"id":"a","question":"q","answers":[]}\n', 1),
    ('{"id":"a","answers":["x"]}\n', 1),
    ('[1,2]\n', 1),
])
def test_load_errors(text, line):
    with pytest.raises(DatasetError) as info:
        load_dataset(io.StringIO(text))
    assert info.value.line == line


@pytest.mark.parametrize("pred,gold,h,a,f", PAIRS)
def test_metrics_fixture(pred, gold, h, a, f):
    assert hits_at_1(pred, gold) == h
    assert accuracy(pred, gold) == a
    assert f1(pred, gold) == pytest.approx(f, abs=1e-12)


def test_f1_both_empty():
    assert f1([], []) == 1.0


def _toy(toy_kg, variants, n=None):
    with open(toy.BENCHMARK, encoding="utf-8") as fh:
        records = load_dataset(fh)[:n]
    configs = [RunConfig(v, ReasonerConfig(variant=v), lambda: ScriptedProvider.from_file(toy.SCRIPT)) for v in variants]
    return records, run_benchmark(toy_kg, records, configs, "toy")


def test_small_suite_full(toy_kg):
    _, report = _toy(toy_kg, ["full"], 3)
    assert report.row("full").hits_at_1 == 1.0


def test_no_schema_below_full(toy_kg):
    _, report = _toy(toy_kg, ["full", "no_schema"])
    assert report.row("no_schema").hits_at_1 < report.row("full").hits_at_1


def test_ablation_ordering(toy_kg):
    _, report = _toy(toy_kg, ["full", "no_schema", "no_retrieval", "io_prompt"])
    h = {r.method: r.hits_at_1 for r in report.rows}
    assert h["full"] >= h["no_retrieval"] >= h["io_prompt"]
    assert h["full"] >= h["no_schema"]
    assert [r.method for r in report.rows] == ["full", "no_schema", "no_retrieval", "io_prompt"]


def test_aggregates_are_means(toy_kg):
    records, report = _toy(toy_kg, ["full", "no_retrieval"])
    for row in report.rows:
        assert len(row.outcomes) == len(records)
        for attr in ("hits_at_1", "accuracy", "f1"):
            vals = [getattr(o, attr) for o in row.outcomes]
            assert getattr(row, attr) == pytest.approx(sum(vals) / len(vals))
            assert 0 <= getattr(row, attr) <= 1


def test_empty_config_list(toy_kg):
    _, report = _toy(toy_kg, [])
    assert report.rows == [] and report.to_json() == {"rows": []}


def test_failing_question_recorded_as_abstained(toy_kg):
    def boom():
        class Bad:
            name = "bad"

            def complete(self, request):
                raise RuntimeError("kaput")
        return Bad()

    rec = [EvalRecord("x", "who is alice friend_of", frozenset({"bob"}))]
    report = run_benchmark(toy_kg, rec, [RunConfig("full", ReasonerConfig(), boom)])
    out = report.rows[0].outcomes[0]
    assert out.status == "abstained" and "kaput" in out.error


def test_report_files(tmp_path, toy_kg):
    _, report = _toy(toy_kg, ["full", "io_prompt"], 4)
    md, js = report.write(tmp_path / "out")
    table = md.read_text().splitlines()
    assert table[0] == "| Method | toy Hits@1 | toy Acc |"
    assert table[2].startswith("| full | 1.000 |")
    doc = json.loads(js.read_text())
    assert doc["rows"][0]["metrics"]["f1"] == 1.0
    assert "wall_clock" not in js.read_text()


def test_markdown_missing_cells():
    from kgreason.eval_harness import ReportRow

    report = Report([ReportRow("full", "full", "a", []), ReportRow("io", "io_prompt", "b", [])])
    assert report.to_markdown().splitlines()[2] == "| full | 0.000 | 0.000 | -- | -- |"
