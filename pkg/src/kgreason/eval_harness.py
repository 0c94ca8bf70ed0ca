"""Benchmark runner: JSONL datasets, Hits@1 / exact-match accuracy / F1, reports."""

from __future__ import annotations

import json
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .graph_store import KnowledgeGraph
from .llm_provider import Provider
from .reasoning import ReasonerConfig, answer_question


class DatasetError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class EvalRecord:
    id: str
    question: str
    gold: frozenset[str]
    tags: tuple[str, ...] = ()


def load_dataset(source: Iterable[str]) -> list[EvalRecord]:
    records: list[EvalRecord] = []
    seen: set[str] = set()
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"malformed JSON: {exc.msg}", lineno) from None
        if not isinstance(obj, dict):
            raise DatasetError("expected a JSON object", lineno)
        try:
            rid, question, answers = obj["id"], obj["question"], obj["answers"]
        except KeyError as exc:
            raise DatasetError(f"missing field {exc.args[0]!r}", lineno) from None
        if not isinstance(rid, str) or not isinstance(question, str) or not isinstance(answers, list):
            raise DatasetError("id and question must be strings, answers a list", lineno)
        if not answers or not all(isinstance(a, str) for a in answers):
            raise DatasetError("answers must be a non-empty list of strings", lineno)
        if rid in seen:
            raise DatasetError(f"duplicate id {rid!r}", lineno)
        seen.add(rid)
        records.append(EvalRecord(rid, question, frozenset(answers), tuple(obj.get("tags", ()))))
    return records


def normalize(text: str) -> str:
    return " ".join(text.lower().split())


def hits_at_1(predicted: Sequence[str], gold: Iterable[str]) -> int:
    if not predicted:
        return 0
    return int(normalize(predicted[0]) in {normalize(g) for g in gold})


def accuracy(predicted: Iterable[str], gold: Iterable[str]) -> int:
    """Exact set match after normalization."""
    pred = {normalize(p) for p in predicted}
    return int(bool(pred) and pred == {normalize(g) for g in gold})


def f1(predicted: Iterable[str], gold: Iterable[str]) -> float:
    pred = {normalize(p) for p in predicted}
    ref = {normalize(g) for g in gold}
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    overlap = len(pred & ref)
    if not overlap:
        return 0.0
    precision = overlap / len(pred)
    recall = overlap / len(ref)
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class RunConfig:
    name: str
    reasoner: ReasonerConfig
    provider_factory: Callable[[], Provider | None]

    @property
    def variant(self) -> str:
        return self.reasoner.variant


@dataclass
class Outcome:
    id: str
    predicted: list[str]
    status: str
    hits_at_1: int
    accuracy: int
    f1: float
    error: str | None = None


@dataclass
class ReportRow:
    method: str
    variant: str
    dataset: str
    outcomes: list[Outcome]
    wall_clock: float = 0.0

    def _mean(self, attr: str) -> float:
        if not self.outcomes:
            return 0.0
        return sum(getattr(o, attr) for o in self.outcomes) / len(self.outcomes)

    @property
    def hits_at_1(self) -> float:
        return self._mean("hits_at_1")

    @property
    def accuracy(self) -> float:
        return self._mean("accuracy")

    @property
    def f1(self) -> float:
        return self._mean("f1")


@dataclass
class Report:
    rows: list[ReportRow] = field(default_factory=list)

    def row(self, method: str, dataset: str | None = None) -> ReportRow:
        for r in self.rows:
            if r.method == method and (dataset is None or r.dataset == dataset):
                return r
        raise KeyError(method)

    def to_json(self) -> dict[str, Any]:
        # wall-clock stays out of the files so repeated runs are byte-identical
        return {
            "rows": [
                {
                    "method": r.method,
                    "variant": r.variant,
                    "dataset": r.dataset,
                    "metrics": {"hits_at_1": r.hits_at_1, "accuracy": r.accuracy, "f1": r.f1},
                    "questions": [o.__dict__ for o in r.outcomes],
                }
                for r in self.rows
            ]
        }

    def to_markdown(self) -> str:
        datasets = list(dict.fromkeys(r.dataset for r in self.rows))
        methods = list(dict.fromkeys(r.method for r in self.rows))
        head = "| Method | " + " | ".join(f"{d} Hits@1 | {d} Acc" for d in datasets) + " |"
        sep = "|---|" + "---|---|" * len(datasets)
        lines = [head, sep] if datasets else ["| Method |", "|---|"]
        for m in methods:
            cells = []
            for d in datasets:
                try:
                    r = self.row(m, d)
                except KeyError:
                    cells += ["--", "--"]
                else:
                    cells += [f"{r.hits_at_1:.3f}", f"{r.accuracy:.3f}"]
            lines.append(f"| {m} | " + " | ".join(cells) + " |")
        return "\n".join(lines) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        md, js = out / "report.md", out / "report.json"
        md.write_text(self.to_markdown(), encoding="utf-8")
        js.write_text(json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return md, js


def evaluate_record(kg: KnowledgeGraph, record: EvalRecord, provider: Provider | None,
                    config: ReasonerConfig) -> Outcome:
    try:
        answer, _ = answer_question(record.question, kg, provider, config)
    except Exception as exc:  # a single bad question must not abort the run
        return Outcome(record.id, [], "abstained", 0, 0, f1([], record.gold), error=f"{type(exc).__name__}: {exc}")
    names = answer.names(kg)
    return Outcome(record.id, names, answer.status, hits_at_1(names, record.gold),
                   accuracy(names, record.gold), f1(names, record.gold))


def run_benchmark(kg: KnowledgeGraph, dataset: Sequence[EvalRecord], configs: Sequence[RunConfig],
                  dataset_name: str = "toy") -> Report:
    """Run every config over every record. Each config gets a fresh provider."""
    report = Report()
    for cfg in configs:
        provider = cfg.provider_factory()
        start = time.perf_counter()
        outcomes = [evaluate_record(kg, rec, provider, cfg.reasoner) for rec in dataset]
        report.rows.append(ReportRow(cfg.name, cfg.variant, dataset_name, outcomes,
                                     time.perf_counter() - start))
    return report
