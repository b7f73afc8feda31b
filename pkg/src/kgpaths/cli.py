"""Command-line entry points: query (one episode), bench (full benchmark
report), and sweep (parameter-grid benchmark runs).

Exit codes: 0 success, 1 runtime failure, 2 config/usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import RunConfig, _coerce, load_config
from .embeddings import FileEmbeddings, HashEmbeddings, ServiceEmbeddings
from .errors import ConfigError, KgError
from .evaluation import (
    load_benchmark,
    run_benchmark,
    simplex_grid,
    sweep,
    write_report_csv,
    write_report_json,
    write_sweep_csv,
)
from .graph import SeedCandidate, load_prior_overrides, load_triples
from .loop import ExternalReasoner, ScriptedReasoner, run_loop


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override any config tunable by its canonical name "
             "(see kgpaths.config.RunConfig)")
    parser.add_argument("--seed", type=int, help="rng seed")
    parser.add_argument("--jobs", type=int, help="episode parallelism")
    parser.add_argument("--add-inverse", action="store_true", default=None,
                        help="materialize inverse (r⁻¹) triples on load")
    parser.add_argument("--embeddings", metavar="TSV",
                        help="file embeddings (label<TAB>v1,v2,...); "
                             "default: hash-deterministic")
    parser.add_argument("--embed-service", metavar="URL",
                        help="HTTP embedding service endpoint")
    parser.add_argument("--priors", metavar="TSV",
                        help="relation prior overrides (relation<TAB>cost)")
    parser.add_argument("--probes", metavar="JSON",
                        help="scripted-reasoner verification probes: "
                             "{question: [relation, object]}")
    parser.add_argument("--reasoner-url", metavar="URL",
                        help="external reasoner endpoint (default: scripted)")
    parser.add_argument("--timings", action="store_true", default=None,
                        help="include wall times in reports "
                             "(breaks byte-reproducibility)")


def _add_ablations(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--no-verifier", action="store_true",
                        help="ablation: verifier v ≡ 1")
    parser.add_argument("--no-soft-injection", action="store_true",
                        help="ablation: inject only the top-1 path")
    parser.add_argument("--single-round", action="store_true",
                        help="ablation: T = 1")
    parser.add_argument("--fixed-weights", action="store_true",
                        help="ablation: alpha = beta = gamma = 1/3")
    parser.add_argument("--no-align-diagnostics", action="store_true",
                        help="ablation: skip attention-alignment diagnostics")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgpaths",
        description="Path-based retrieval over knowledge graphs with an "
                    "iterative retrieval-reasoning loop.")
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("query", help="answer one question")
    q.add_argument("graph", help="triple TSV")
    q.add_argument("question")
    q.add_argument("--seed-entity", action="append", required=True,
                   metavar="LABEL[@CONF]",
                   help="linked seed entity, optional @confidence")
    q.add_argument("--rounds", type=int, help="max dialogue rounds")
    q.add_argument("--trace", metavar="JSONL", help="write per-round trace")
    _add_common(q)

    b = sub.add_parser("bench", help="run a benchmark")
    b.add_argument("graph", help="triple TSV")
    b.add_argument("benchmark", help="benchmark JSONL")
    b.add_argument("--report-json", metavar="PATH")
    b.add_argument("--report-csv", metavar="PATH")
    _add_common(b)
    _add_ablations(b)

    s = sub.add_parser("sweep", help="benchmark across a parameter grid")
    s.add_argument("graph", help="triple TSV")
    s.add_argument("benchmark", help="benchmark JSONL")
    s.add_argument("--grid", action="append", required=True,
                   metavar="NAME=V1,V2,...",
                   help="swept values; 'alpha,beta,gamma=simplex:STEP' "
                        "sweeps the coefficient simplex, or list triples "
                        "as a:b:c;a:b:c")
    s.add_argument("--out", metavar="CSV", help="grid CSV output")
    _add_common(s)

    return parser


def _build_config(args) -> RunConfig:
    config = load_config(args.config) if args.config else RunConfig()
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    for name in ("seed", "jobs"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.add_inverse:
        overrides["add_inverse"] = True
    if args.timings:
        overrides["include_timings"] = True
    if getattr(args, "rounds", None) is not None:
        overrides["rounds"] = args.rounds
    for flag in ("no_verifier", "no_soft_injection", "no_align_diagnostics"):
        if getattr(args, flag, False):
            overrides[flag] = True
    if getattr(args, "single_round", False):
        overrides["rounds"] = 1
    if getattr(args, "fixed_weights", False):
        overrides.update(alpha=1 / 3, beta=1 / 3, gamma=1 / 3)
    return config.with_overrides(**overrides)


def _load_world(args, config):
    graph = load_triples(args.graph, add_inverse=config.add_inverse)
    if args.priors:
        load_prior_overrides(graph, args.priors)
    if args.embeddings:
        embeddings = FileEmbeddings.load(args.embeddings)
    elif args.embed_service:
        embeddings = ServiceEmbeddings(config.embed_dim, url=args.embed_service)
    else:
        embeddings = HashEmbeddings(dimension=config.embed_dim,
                                    seed=config.seed)
    if args.reasoner_url:
        reasoner = ExternalReasoner(graph, url=args.reasoner_url)
    else:
        probes = {}
        if args.probes:
            with open(args.probes, encoding="utf-8") as fh:
                probes = {q: tuple(p) for q, p in json.load(fh).items()}
        reasoner = ScriptedReasoner(graph,
                                    conf_threshold=config.conf_threshold,
                                    probes=probes)
    return graph, embeddings, reasoner


def _parse_seed_entity(spec: str, graph) -> SeedCandidate:
    label, confidence = spec, 1.0
    if "@" in spec:
        candidate, _, conf_s = spec.rpartition("@")
        try:
            confidence = float(conf_s)
            label = candidate
        except ValueError:
            pass  # the @ belongs to the label
    return SeedCandidate(graph.entity_id(label), confidence)


def cmd_query(args) -> int:
    config = _build_config(args)
    graph, embeddings, reasoner = _load_world(args, config)
    seeds = [_parse_seed_entity(s, graph) for s in args.seed_entity]
    trace_file = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        result = run_loop(args.question, seeds, graph, config, reasoner,
                          embeddings, trace_file=trace_file)
    finally:
        if trace_file:
            trace_file.close()
    print(f"answer: {result.answer}")
    print(f"confidence: {result.confidence}")
    print(f"rounds: {len(result.rounds)}")
    if result.failed:
        print(f"failed: {result.failure}", file=sys.stderr)
        return 1
    return 0


def cmd_bench(args) -> int:
    config = _build_config(args)
    graph, embeddings, reasoner = _load_world(args, config)
    records = load_benchmark(args.benchmark)
    report = run_benchmark(records, graph, config, reasoner, embeddings)
    if args.report_json:
        write_report_json(report, args.report_json)
    if args.report_csv:
        write_report_csv(report, args.report_csv)
    print(json.dumps({"overall": report["overall"],
                      "efficiency": report["efficiency"]}, sort_keys=True))
    return 0


def _parse_grid(specs: list[str]) -> dict[str, list]:
    grid: dict[str, list] = {}
    for spec in specs:
        if "=" not in spec:
            raise ConfigError(f"--grid expects NAME=V1,V2,..., got {spec!r}")
        name, _, values = spec.partition("=")
        name = name.strip()
        values = values.strip()
        if name == "alpha,beta,gamma":
            if values.startswith("simplex:"):
                grid[name] = simplex_grid(float(values[len("simplex:"):]))
            else:
                points = []
                for triple in values.split(";"):
                    parts = triple.split(":")
                    if len(parts) != 3:
                        raise ConfigError(
                            f"coefficient point must be a:b:c, got {triple!r}")
                    points.append(tuple(float(p) for p in parts))
                grid[name] = points
        else:
            grid[name] = [_coerce({name: v})[name]
                          for v in values.split(",") if v != ""]
        if not grid[name]:
            raise ConfigError(f"empty value list in grid spec {spec!r}")
    return grid


def cmd_sweep(args) -> int:
    config = _build_config(args)
    graph, embeddings, reasoner = _load_world(args, config)
    records = load_benchmark(args.benchmark)
    grid = _parse_grid(args.grid)
    rows = sweep(records, graph, config, grid, reasoner, embeddings)
    if args.out:
        write_sweep_csv(rows, args.out)
    for row in rows:
        print(json.dumps(row, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"query": cmd_query, "bench": cmd_bench, "sweep": cmd_sweep}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (KgError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
