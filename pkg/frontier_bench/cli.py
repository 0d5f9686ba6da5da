import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import requests
from hatchling.bridge.app import Application
from pydantic import TypeAdapter, ValidationError

from frontier_bench.config import CrawlConfig, FetchPolicy, LinkScope, StrategyKind, StrategyList
from frontier_bench.engine import (
    CorpusIndex,
    CrawlTrace,
    crawl,
    load_trace,
    run_live_crawl,
    save_trace,
    seed_training_docs,
    train_seed_model,
)
from frontier_bench.evalbench import RelevanceOracle, compare, write_curves, write_report
from frontier_bench.livefetch import LiveFetcher
from frontier_bench.relevance import NBModel, classifier_metrics, load_model, save_model
from frontier_bench.webgraph import GraphSnapshot, load_snapshot, save_snapshot, synth_graph

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

DEFAULT_SEED_URL = "https://en.wikipedia.org/wiki/Main_Page"

# Errors that abort a command at runtime; ValueError covers the package's format and configuration errors.
RUNTIME_ERRORS = (ValueError, KeyError, RuntimeError, OSError, requests.RequestException)

_STRATEGY_LIST = TypeAdapter(StrategyList)


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(value: str) -> int:
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return number


def _non_negative_int(value: str) -> int:
    number = int(value)
    if number < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return number


def _ratio(value: str) -> float:
    number = float(value)
    if not 0 <= number <= 1:
        raise argparse.ArgumentTypeError(f"must be within [0, 1], got {value}")
    return number


def _strategies(value: str) -> list[StrategyKind]:
    try:
        return _STRATEGY_LIST.validate_python(value)
    except ValidationError as e:
        raise argparse.ArgumentTypeError("; ".join(error["msg"] for error in e.errors())) from e


def _add_crawl_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--snapshot", required=True, type=Path)
    parser.add_argument("--query", help="topic terms, defaults to the snapshot's topic query")
    parser.add_argument("--max-pages", type=_positive_int, default=1000)
    parser.add_argument("--time-budget-ms", type=_non_negative_int, default=3_600_000)
    parser.add_argument("--max-depth", type=_non_negative_int, default=3)
    parser.add_argument("--oracle", default="auto", help="labels | url_rule:<substring> | auto")
    parser.add_argument("--delta", type=float, default=0.5)
    parser.add_argument("--gamma", type=float, default=0.5)
    parser.add_argument("--beta", type=float, default=0.8)
    parser.add_argument("--priority-parent", type=float, default=0.5, help="priority weight of the parent's relevance")
    parser.add_argument("--priority-anchor", type=float, default=0.5, help="priority weight of the anchor's relevance")
    parser.add_argument("--nb-threshold", type=_ratio, default=0.5)
    parser.add_argument("--nb-alpha", type=float, default=1.0)
    parser.add_argument("--context-window", type=_non_negative_int, default=8)
    parser.add_argument("--miss-penalty-ms", type=_non_negative_int, default=0)
    parser.add_argument("--link-scope", choices=[s.value for s in LinkScope], default=LinkScope.ANY.value)
    parser.add_argument("--model", type=Path, help="trained naive Bayes model for the nb strategy")
    parser.add_argument("--save-model", type=Path, help="write the naive Bayes model used by the nb strategy")


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="frontier-bench", description="Offline benchmark of crawler frontier strategies.")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a synthetic planted-cluster snapshot")
    synth.add_argument("--pages", type=_positive_int, required=True)
    synth.add_argument("--relevant-fraction", type=_ratio, default=0.2)
    synth.add_argument("--rng-seed", type=int, default=42)
    synth.add_argument("--latency-ms", type=_non_negative_int, default=3600)
    synth.add_argument("--intra-cluster-link-prob", type=_ratio, default=0.05)
    synth.add_argument("--cross-link-prob", type=_ratio, default=0.002)
    synth.add_argument("--query", help="topic terms planted in relevant pages")
    synth.add_argument("--out", required=True, type=Path)

    ingest = commands.add_parser("ingest", help="build a snapshot from live pages (breadth-first)")
    ingest.add_argument("--seed-url", default=DEFAULT_SEED_URL)
    ingest.add_argument("--max-pages", type=_positive_int, default=30)
    ingest.add_argument("--max-depth", type=_non_negative_int, default=3)
    ingest.add_argument("--query", default="")
    ingest.add_argument("--link-scope", choices=[s.value for s in LinkScope], default=LinkScope.ANY.value)
    ingest.add_argument("--user-agent")
    ingest.add_argument("--per-host-delay-ms", type=_non_negative_int, default=1000)
    ingest.add_argument("--timeout-ms", type=_positive_int, default=10_000)
    ingest.add_argument("--max-retries", type=_non_negative_int, default=2)
    ingest.add_argument("--ignore-robots", action="store_true")
    ingest.add_argument("--out", required=True, type=Path)

    crawl_cmd = commands.add_parser("crawl", help="run one strategy over a snapshot and write its trace")
    _add_crawl_arguments(crawl_cmd)
    crawl_cmd.add_argument("--strategy", type=StrategyKind, choices=list(StrategyKind), required=True)
    crawl_cmd.add_argument("--out", required=True, type=Path)

    bench = commands.add_parser("bench", help="run several strategies under identical conditions")
    _add_crawl_arguments(bench)
    bench.add_argument("--strategies", type=_strategies, default=list(StrategyKind))
    bench.add_argument("--report", required=True, type=Path)
    bench.add_argument("--format", choices=["csv", "json"], default="csv")
    bench.add_argument("--trace-dir", type=Path, help="also store every strategy's trace here")
    bench.add_argument("--curves", type=Path, help="write harvest curves as CSV series")
    bench.add_argument("--jobs", type=_positive_int, default=1)

    report = commands.add_parser("report", help="recompute metrics from stored traces")
    report.add_argument("--trace", required=True, nargs="+", type=Path)
    report.add_argument("--snapshot", required=True, type=Path)
    report.add_argument("--oracle", default="auto")
    report.add_argument("--out", required=True, type=Path)
    report.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def _crawl_config(args, strategy: StrategyKind) -> CrawlConfig:
    return CrawlConfig(
        strategy=strategy,
        max_pages=args.max_pages,
        time_budget_ms=args.time_budget_ms,
        max_depth=args.max_depth,
        shark={"delta": args.delta, "gamma": args.gamma, "beta": args.beta},
        priority={"parent": args.priority_parent, "anchor": args.priority_anchor},
        nb_threshold=args.nb_threshold,
        nb_alpha=args.nb_alpha,
        context_window=args.context_window,
        miss_penalty_ms=args.miss_penalty_ms,
        link_scope=args.link_scope,
        query=args.query,
    )


def _nb_model(args, snapshot: GraphSnapshot, oracle: RelevanceOracle, index: CorpusIndex, app) -> NBModel:
    if args.model:
        app.display_info(f"Loading naive Bayes model from '{args.model}'")
        model = load_model(args.model)
    else:
        app.display_info("Training naive Bayes model on the seed pages and their children")
        model = train_seed_model(snapshot, oracle, index, args.nb_alpha)
    accuracy, f1 = classifier_metrics(model, seed_training_docs(snapshot, oracle, index), args.nb_threshold)
    app.display_info(f"Classifier on the seed neighbourhood: accuracy={accuracy:.3f} f1={f1:.3f}")
    if args.save_model:
        save_model(model, args.save_model)
    return model


def cmd_synth(args, app: Application) -> int:
    extra = {"topic_terms": args.query} if args.query else {}
    app.display_waiting(f"Generating {args.pages} pages (rng seed {args.rng_seed})...")
    snapshot = synth_graph(
        rng_seed=args.rng_seed,
        n_pages=args.pages,
        relevant_fraction=args.relevant_fraction,
        intra_cluster_link_prob=args.intra_cluster_link_prob,
        cross_link_prob=args.cross_link_prob,
        latency_ms=args.latency_ms,
        **extra,
    )
    save_snapshot(snapshot, args.out)
    relevant = sum(1 for record in snapshot.pages.values() if record.label)
    app.display(f"pages={len(snapshot.pages)} relevant={relevant}")
    return EXIT_OK


def cmd_ingest(args, app: Application) -> int:
    policy_fields = {
        "per_host_delay_ms": args.per_host_delay_ms,
        "timeout_ms": args.timeout_ms,
        "max_retries": args.max_retries,
        "obey_robots": not args.ignore_robots,
    }
    if args.user_agent:
        policy_fields["user_agent"] = args.user_agent
    fetcher = LiveFetcher(FetchPolicy(**policy_fields), app=app)
    config = CrawlConfig(max_pages=args.max_pages, max_depth=args.max_depth, link_scope=args.link_scope)
    snapshot = run_live_crawl(fetcher, config, args.out, [args.seed_url], args.query.split(), app=app)
    app.display(f"pages={len(snapshot.pages)}")
    return EXIT_OK


def cmd_crawl(args, app: Application) -> int:
    snapshot = load_snapshot(args.snapshot)
    oracle = RelevanceOracle.parse(args.oracle, snapshot)
    config = _crawl_config(args, args.strategy)
    index = CorpusIndex(snapshot, config.context_window)
    model = _nb_model(args, snapshot, oracle, index, app) if config.strategy == StrategyKind.NB else None
    trace = crawl(snapshot, config, oracle, nb_model=model, index=index, app=app)
    save_trace(trace, args.out)
    app.display(f"visits={len(trace.visits)} stop_reason={trace.stop_reason}")
    return EXIT_OK


def cmd_bench(args, app: Application) -> int:
    snapshot = load_snapshot(args.snapshot)
    oracle = RelevanceOracle.parse(args.oracle, snapshot)
    strategies = list(dict.fromkeys(args.strategies))
    configs = [_crawl_config(args, strategy) for strategy in strategies]
    index = CorpusIndex(snapshot, args.context_window)
    model = _nb_model(args, snapshot, oracle, index, app) if StrategyKind.NB in strategies else None
    # Analyse the corpus once up front so parallel crawls only read the shared index.
    for url in sorted(snapshot.pages):
        index.analyze(url)

    app.display_mini_header("frontier-bench")
    app.display_info(f"Snapshot {snapshot.snapshot_id}: {len(snapshot.pages)} pages, oracle {oracle}")

    def run(config: CrawlConfig) -> CrawlTrace:
        return crawl(snapshot, config, oracle, nb_model=model, index=index, app=app)

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        traces = list(pool.map(run, configs))

    report = compare(traces, oracle, snapshot)
    write_report(report, args.report, args.format)
    if args.trace_dir:
        for trace in traces:
            save_trace(trace, args.trace_dir / f"{trace.config.strategy}.trace")
    if args.curves:
        write_curves(traces, oracle, snapshot, args.curves)
    app.display(f"ranking: {' > '.join(report.ranking)}")
    return EXIT_OK


def cmd_report(args, app: Application) -> int:
    snapshot = load_snapshot(args.snapshot)
    oracle = RelevanceOracle.parse(args.oracle, snapshot)
    traces = [load_trace(path) for path in args.trace]
    report = compare(traces, oracle, snapshot)
    write_report(report, args.out, args.format)
    app.display(f"ranking: {' > '.join(report.ranking)}")
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "crawl": cmd_crawl,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv: list[str] | None = None, app: Application | None = None) -> int:
    app = app or Application()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        app.display_error(str(e))
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args, app)
    except ValidationError as e:
        app.display_error(f"[frontier-bench] invalid configuration: {e}")
        return EXIT_USAGE
    except RUNTIME_ERRORS as e:
        app.display_error(f"[frontier-bench] {e}")
        return EXIT_RUNTIME
