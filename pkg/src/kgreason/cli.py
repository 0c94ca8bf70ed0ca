"""Command line: ask, explain, eval, query.

Settings come from flags, then ``KGREASON_*`` environment variables, then a
JSON config file given with ``--config``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .cypher import CypherError, execute, parse_query
from .eval_harness import DatasetError, RunConfig, load_dataset, run_benchmark
from .graph_store import IngestionError, KnowledgeGraph, load_kg_files
from .llm_provider import provider_from_spec
from .reasoning import VARIANTS, ReasonerConfig, answer_question

EXIT_OK, EXIT_ERROR, EXIT_ABSTAINED = 0, 1, 2

_SETTINGS: dict[str, type] = {
    "kg": str,
    "aliases": str,
    "provider": str,
    "token_env": str,
    "relevance_threshold": float,
    "hop_budget": int,
    "max_iterations": int,
    "out": str,
}
_DEFAULTS: dict[str, Any] = {"provider": "none", "token_env": "KGREASON_API_TOKEN",
                             "relevance_threshold": 0.0, "max_iterations": 3, "out": "."}


class ConfigError(ValueError):
    pass


@dataclass
class CliConfig:
    kg: Path
    aliases: Path | None = None
    provider: str = "none"
    token_env: str = "KGREASON_API_TOKEN"
    relevance_threshold: float = 0.0
    hop_budget: int | None = None
    max_iterations: int = 3
    out: Path = Path(".")
    extra: dict[str, Any] = field(default_factory=dict)

    def reasoner(self, variant: str = "full") -> ReasonerConfig:
        return ReasonerConfig(variant=variant, hop_budget=self.hop_budget,
                              relevance_threshold=self.relevance_threshold,
                              max_iterations=self.max_iterations)

    def make_provider(self):
        return provider_from_spec(self.provider, token_env=self.token_env)

    def load_kg(self) -> KnowledgeGraph:
        return load_kg_files(self.kg, self.aliases)


def resolve_config(args: argparse.Namespace, environ: dict[str, str] | None = None) -> CliConfig:
    environ = os.environ if environ is None else environ
    file_values: dict[str, Any] = {}
    if args.config:
        try:
            file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from None
        unknown = set(file_values) - set(_SETTINGS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

    values: dict[str, Any] = {}
    for key, kind in _SETTINGS.items():
        flag = getattr(args, key, None)
        env = environ.get(f"KGREASON_{key.upper()}")
        raw = flag if flag is not None else env if env is not None else file_values.get(key, _DEFAULTS.get(key))
        if raw is None:
            continue
        try:
            values[key] = kind(raw)
        except (TypeError, ValueError):
            raise ConfigError(f"bad value for {key}: {raw!r}") from None

    if "kg" not in values:
        raise ConfigError("no knowledge graph given (--kg, KGREASON_KG or config file)")
    cfg = CliConfig(
        kg=Path(values["kg"]),
        aliases=Path(values["aliases"]) if "aliases" in values else None,
        provider=values["provider"],
        token_env=values["token_env"],
        relevance_threshold=values["relevance_threshold"],
        hop_budget=values.get("hop_budget"),
        max_iterations=values["max_iterations"],
        out=Path(values["out"]),
    )
    for path in (cfg.kg, cfg.aliases):
        if path is not None and not path.is_file():
            raise ConfigError(f"file not found: {path}")
    kind, _, arg = cfg.provider.partition(":")
    if kind == "scripted" and not Path(arg).is_file():
        raise ConfigError(f"script file not found: {arg}")
    if cfg.hop_budget is not None and cfg.hop_budget < 1:
        raise ConfigError("--hop-budget must be positive")
    if cfg.max_iterations < 1:
        raise ConfigError("--max-iterations must be positive")
    return cfg


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--kg", help="triple file (subject<TAB>relation<TAB>object)")
    p.add_argument("--aliases", help="alias file (alias<TAB>canonical)")
    p.add_argument("--provider", help="scripted:<file>, http:<url> or none")
    p.add_argument("--token-env", dest="token_env", help="env var holding the HTTP bearer token")
    p.add_argument("--relevance-threshold", dest="relevance_threshold", type=float)
    p.add_argument("--hop-budget", dest="hop_budget", type=int)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kgreason", description="Schema-guided question answering over a knowledge graph.")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (("ask", "answer a question"), ("explain", "answer a question and print the JSON trace")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("question")
        p.add_argument("--variant", choices=VARIANTS, default="full")
        _common(p)

    p = sub.add_parser("eval", help="run a benchmark and write report.md / report.json")
    p.add_argument("--dataset", required=True, help="JSONL file of {id, question, answers}")
    p.add_argument("--variant", choices=VARIANTS, action="append", default=[],
                   help="pipeline variant to run; repeat for several")
    p.add_argument("--dataset-name", default=None)
    _common(p)

    p = sub.add_parser("query", help="run a query and print the bindings as TSV")
    p.add_argument("cypher")
    _common(p)
    return parser


def _err(msg: str) -> None:
    print(f"kgreason: {msg}", file=sys.stderr)


def cmd_ask(args, cfg: CliConfig, explain: bool = False) -> int:
    kg = cfg.load_kg()
    answer, trace = answer_question(args.question, kg, cfg.make_provider(), cfg.reasoner(args.variant))
    if explain:
        print(json.dumps(trace.to_dict(answer, kg), indent=2))
    else:
        for name in answer.names(kg):
            print(name)
        if not answer.answered:
            _err(f"no answer (failed at {trace.failure_stage})")
    return EXIT_OK if answer.answered else EXIT_ABSTAINED


def cmd_eval(args, cfg: CliConfig) -> int:
    kg = cfg.load_kg()
    with open(args.dataset, encoding="utf-8") as fh:
        dataset = load_dataset(fh)
    configs = [RunConfig(v, cfg.reasoner(v), cfg.make_provider) for v in args.variant]
    name = args.dataset_name or Path(args.dataset).stem
    report = run_benchmark(kg, dataset, configs, name)
    md, js = report.write(cfg.out)
    sys.stdout.write(report.to_markdown())
    for row in report.rows:
        _err(f"{row.method}: {len(row.outcomes)} questions in {row.wall_clock:.2f}s")
    _err(f"wrote {md} and {js}")
    return EXIT_OK


def cmd_query(args, cfg: CliConfig) -> int:
    kg = cfg.load_kg()
    table = execute(kg, parse_query(args.cypher))
    sys.stdout.write(table.to_tsv(kg))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "eval" and not Path(args.dataset).is_file():
        _err(f"file not found: {args.dataset}")
        return EXIT_ERROR
    try:
        cfg = resolve_config(args)
        if args.command == "ask":
            return cmd_ask(args, cfg)
        if args.command == "explain":
            return cmd_ask(args, cfg, explain=True)
        if args.command == "eval":
            return cmd_eval(args, cfg)
        return cmd_query(args, cfg)
    except (ConfigError, IngestionError, DatasetError, CypherError, OSError, ValueError) as exc:
        _err(str(exc))
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
