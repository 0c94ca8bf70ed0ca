from __future__ import annotations

import json
import subprocess
import sys

import pytest

from kgreason import toy
from kgreason.cli import build_parser, main, resolve_config

TOY_Q = "Where is the company where Alice's friend works located?"
CHAIN = 'MATCH (a {name:"alice"})-[:friend_of]->(b)-[:works_at]->(c)-[:located_in]->(d) RETURN d'


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    import os

    for key in list(os.environ):
        if key.startswith("KGREASON_"):
            monkeypatch.delenv(key)


def toy_args(*extra):
    return ["--kg", str(toy.KG), "--aliases", str(toy.ALIASES), "--provider", f"scripted:{toy.SCRIPT}", *extra]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_ask_toy(capsys):
    code, out, _ = run(capsys, "ask", TOY_Q, *toy_args())
    assert (code, out) == (0, "paris\n")


def test_ask_abstains(capsys):
    code, out, err = run(capsys, "ask", "what is the answer", *toy_args())
    assert code == 2 and out == "" and "no answer" in err


def test_ask_missing_kg(capsys, tmp_path):
    code, out, err = run(capsys, "ask", TOY_Q, "--kg", str(tmp_path / "nope.tsv"))
    assert code == 1 and out == "" and "not found" in err


def test_explain_trace(capsys):
    code, out, _ = run(capsys, "explain", TOY_Q, *toy_args())
    doc = json.loads(out)
    assert code == 0
    assert sum(1 for s in doc["stages"] if s["stage"] == "schema") == 1
    assert any(s.get("query", "").startswith("MATCH") for s in doc["stages"])
    assert doc["answer"]["entities"] == ["paris"] and doc["failure_stage"] is None


def test_explain_abstained_marks_failure(capsys):
    code, out, _ = run(capsys, "explain", "what is the answer", *toy_args())
    assert code == 2 and json.loads(out)["failure_stage"] == "schema"


def test_explain_invalid_config(capsys):
    code, _, err = run(capsys, "explain", TOY_Q, *toy_args("--hop-budget", "0"))
    assert code == 1 and "hop-budget" in err


def test_eval_writes_reports(capsys, tmp_path):
    code, out, err = run(capsys, "eval", "--dataset", str(toy.BENCHMARK), "--variant", "full",
                         *toy_args("--out", str(tmp_path)))
    assert code == 0
    assert sorted(p.name for p in tmp_path.iterdir()) == ["report.json", "report.md"]
    assert out.startswith("| Method |") and "full" in out and "wrote" in err


def test_eval_zero_variants(capsys, tmp_path):
    code, out, _ = run(capsys, "eval", "--dataset", str(toy.BENCHMARK), *toy_args("--out", str(tmp_path)))
    assert code == 0 and json.loads((tmp_path / "report.json").read_text()) == {"rows": []}


def test_eval_bad_dataset(capsys, tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id":"a","question":"q","answers":["x"]}\nnot json\n')
    code, _, err = run(capsys, "eval", "--dataset", str(bad), "--variant", "full", *toy_args("--out", str(tmp_path)))
    assert code == 1 and "line 2" in err


def test_eval_deterministic(capsys, tmp_path):
    files = []
    for name in ("a", "b"):
        assert main(["eval", "--dataset", str(toy.BENCHMARK), "--variant", "full", "--variant", "no_schema",
                     *toy_args("--out", str(tmp_path / name))]) == 0
        files.append([(tmp_path / name / f).read_bytes() for f in ("report.md", "report.json")])
    capsys.readouterr()
    assert files[0] == files[1]


def test_query_toy(capsys):
    code, out, _ = run(capsys, "query", CHAIN, "--kg", str(toy.KG))
    assert code == 0 and out == "d\nparis\n"


def test_query_parse_error(capsys):
    code, out, err = run(capsys, "query", "MATCH (a RETURN a", "--kg", str(toy.KG))
    assert code == 1 and out == "" and "offset" in err


def test_query_empty_result(capsys):
    code, out, _ = run(capsys, "query", 'MATCH (a)-[:friend_of]->(b) WHERE b.name = "nobody" RETURN a, b',
                       "--kg", str(toy.KG))
    assert code == 0 and out == "a\tb\n"


def test_precedence_flag_env_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kg": str(toy.KG), "hop_budget": 2, "max_iterations": 5, "relevance_threshold": 0.1}))
    args = build_parser().parse_args(["ask", "q", "--config", str(cfg), "--hop-budget", "4"])
    env = {"KGREASON_HOP_BUDGET": "3", "KGREASON_MAX_ITERATIONS": "7"}
    c = resolve_config(args, env)
    assert (c.hop_budget, c.max_iterations, c.relevance_threshold) == (4, 7, 0.1)
    assert c.provider == "none"


def test_config_file_errors(capsys, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text('{"kgg": "x"}')
    code, _, err = run(capsys, "ask", "q", "--config", str(cfg))
    assert code == 1 and "unknown config keys" in err


def test_missing_script_file(capsys, tmp_path):
    code, _, err = run(capsys, "ask", "q", "--kg", str(toy.KG), "--provider", f"scripted:{tmp_path}/x.json")
    assert code == 1 and "script file" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "kgreason", "query", CHAIN, "--kg", str(toy.KG)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout == "d\nparis\n"
