"""Paths to the bundled toy graph, benchmark and provider script."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path

_DATA = files("kgreason") / "data"


def data_path(name: str) -> Path:
    return Path(str(_DATA / name))


KG = data_path("toy_kg.tsv")
ALIASES = data_path("toy_aliases.tsv")
BENCHMARK = data_path("toy_benchmark.jsonl")
SCRIPT = data_path("toy_script.json")
