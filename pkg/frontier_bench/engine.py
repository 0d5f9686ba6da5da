import itertools
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
from os import PathLike

from hatchling.bridge.app import Application
from pydantic import BaseModel, ConfigDict, ValidationError

from frontier_bench._util import atomic_write, split_records
from frontier_bench.config import CrawlConfig, StrategyKind
from frontier_bench.evalbench import RelevanceOracle, oracle_label
from frontier_bench.extract import Document, LinkCandidate, in_scope, normalize_url, parse_page, tokenize
from frontier_bench.frontiers import (
    FrontierEntry,
    make_frontier,
    nb_link_admit,
    priority_score,
    shark_score,
)
from frontier_bench.livefetch import FetchError, LiveFetcher
from frontier_bench.relevance import (
    NBModel,
    TermVector,
    TopicQuery,
    Vocabulary,
    Weighting,
    build_vector,
    nb_posterior,
    nb_train,
    vocab_fit,
)
from frontier_bench.webgraph import (
    GraphSnapshot,
    PageNotFoundError,
    PageRecord,
    VirtualClock,
    fetch_cost,
    save_snapshot,
    sim_fetch,
)


class CrawlConfigurationError(ValueError):
    pass


class IngestError(RuntimeError):
    pass


class TraceFormatError(ValueError):
    pass


class StopReason(StrEnum):
    PAGE_BUDGET = "page_budget"
    TIME_BUDGET = "time_budget"
    FRONTIER_EXHAUSTED = "frontier_exhausted"


class VisitRecord(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    step: int
    url: str
    virtual_time_ms: int
    relevant: bool
    duplicate_content: bool
    frontier_size: int
    visited_size: int


@dataclass(eq=False)
class CrawlTrace:
    config: CrawlConfig
    snapshot_id: str
    visits: list[VisitRecord] = field(default_factory=list)
    stop_reason: StopReason = StopReason.FRONTIER_EXHAUSTED

    @property
    def strategy(self) -> StrategyKind:
        return self.config.strategy


class _TraceHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    config: CrawlConfig
    snapshot_id: str
    stop_reason: StopReason


def dumps_trace(trace: CrawlTrace) -> bytes:
    header = _TraceHeader(config=trace.config, snapshot_id=trace.snapshot_id, stop_reason=trace.stop_reason)
    lines = [header.model_dump_json()] + [visit.model_dump_json() for visit in trace.visits]
    return ("\n".join(lines) + "\n").encode("utf-8")


def save_trace(trace: CrawlTrace, path: str | PathLike) -> None:
    atomic_write(path, dumps_trace(trace))


def load_trace(path: str | PathLike) -> CrawlTrace:
    with open(path, "rb") as f:
        lines = [line for line in split_records(f.read()) if line.strip()]
    if not lines:
        raise TraceFormatError(f"trace file '{path}' is empty")
    try:
        header = _TraceHeader.model_validate_json(lines[0].decode("utf-8"))
        visits = [VisitRecord.model_validate_json(line.decode("utf-8")) for line in lines[1:]]
    except (ValidationError, UnicodeDecodeError) as e:
        raise TraceFormatError(f"invalid trace file '{path}': {e}") from e
    seen: set[str] = set()
    for visit in visits:
        if visit.url in seen:
            raise TraceFormatError(f"invalid trace file '{path}': {visit.url} visited twice (step {visit.step})")
        seen.add(visit.url)
    return CrawlTrace(
        config=header.config, snapshot_id=header.snapshot_id, visits=visits, stop_reason=header.stop_reason
    )


@dataclass(frozen=True, slots=True)
class PageAnalysis:
    document: Document
    links: tuple[LinkCandidate, ...]
    vector: TermVector


class CorpusIndex:
    """Memoized per-page analysis of one snapshot, shared by every crawl over it.

    The similarity engine's vocabulary and document frequencies are fitted once over all page texts.
    """

    def __init__(self, snapshot: GraphSnapshot, context_window: int = 8):
        self.snapshot = snapshot
        self.context_window = context_window
        self._parsed: dict[str, tuple[Document, tuple[LinkCandidate, ...]]] = {}
        self._analysis: dict[str, PageAnalysis] = {}

    def _parse(self, url: str) -> tuple[Document, tuple[LinkCandidate, ...]]:
        parsed = self._parsed.get(url)
        if parsed is None:
            document, links = parse_page(self.snapshot.pages[url].html, url, self.context_window)
            parsed = self._parsed[url] = (document, tuple(links))
        return parsed

    def document(self, url: str) -> Document:
        return self._parse(url)[0]

    def links(self, url: str) -> tuple[LinkCandidate, ...]:
        return self._parse(url)[1]

    @cached_property
    def vocabulary(self) -> Vocabulary:
        return vocab_fit(self.document(url).tokens for url in sorted(self.snapshot.pages))

    def analyze(self, url: str) -> PageAnalysis:
        analysis = self._analysis.get(url)
        if analysis is None:
            document, links = self._parse(url)
            vector = build_vector(document.tokens, self.vocabulary, Weighting.TFIDF)
            analysis = self._analysis[url] = PageAnalysis(document=document, links=links, vector=vector)
        return analysis

    def topic_query(self, terms: Iterable[str]) -> TopicQuery:
        return TopicQuery.from_terms(tokenize(" ".join(terms)), self.vocabulary)


def seed_training_docs(
    snapshot: GraphSnapshot, oracle: RelevanceOracle, index: CorpusIndex
) -> list[tuple[tuple[str, ...], bool]]:
    """Token streams and oracle labels of the seed pages and their immediate children in the snapshot."""
    urls = list(dict.fromkeys(snapshot.seeds))
    for seed in snapshot.seeds:
        urls.extend(link.target for link in index.links(seed) if link.target in snapshot.pages)
    urls = list(dict.fromkeys(urls))
    return [(index.document(url).tokens, oracle_label(oracle, url, snapshot.pages[url])) for url in urls]


def train_seed_model(
    snapshot: GraphSnapshot, oracle: RelevanceOracle, index: CorpusIndex, alpha: float = 1.0
) -> NBModel:
    """Train the benchmark classifier on `seed_training_docs`."""
    return nb_train(seed_training_docs(snapshot, oracle, index), alpha, index.vocabulary)


class Crawler:
    def __init__(
        self,
        snapshot: GraphSnapshot,
        config: CrawlConfig,
        oracle: RelevanceOracle,
        nb_model: NBModel | None = None,
        index: CorpusIndex | None = None,
        app: Application | None = None,
    ):
        if not snapshot.seeds:
            raise CrawlConfigurationError("the snapshot has no seed URLs")
        if config.strategy == StrategyKind.NB and nb_model is None:
            raise CrawlConfigurationError("the nb strategy needs a trained naive Bayes model")
        if index is not None and index.context_window != config.context_window:
            raise CrawlConfigurationError("corpus index context window differs from the crawl configuration")
        self.snapshot = snapshot
        self.config = config
        self.oracle = oracle
        self.nb_model = nb_model
        self.index = index or CorpusIndex(snapshot, config.context_window)
        self.app = app
        self.query: TopicQuery | None = None
        if config.strategy in (StrategyKind.SHARK, StrategyKind.PRIORITY):
            terms = config.query if config.query is not None else snapshot.topic_query
            try:
                self.query = self.index.topic_query(terms)
            except ValueError:
                raise CrawlConfigurationError(
                    f"the {config.strategy} strategy needs a non-empty topic query"
                ) from None

    def run(self) -> CrawlTrace:
        config = self.config
        trace = CrawlTrace(config=config, snapshot_id=self.snapshot.snapshot_id)
        seq = itertools.count()
        frontier = make_frontier(config.strategy)
        frontier.push(FrontierEntry(seed, 1.0, 0, next(seq)) for seed in self.snapshot.seeds)
        clock = VirtualClock()
        visited: set[str] = set()
        dead: set[str] = set()
        checksums: set[int] = set()

        if self.app:
            self.app.display_waiting(f"Crawling with strategy '{config.strategy}'...")

        while True:
            entry = frontier.pop()
            if entry is None:
                trace.stop_reason = StopReason.FRONTIER_EXHAUSTED
                break
            if entry.target in visited or entry.target in dead:
                continue
            if clock.now_ms + fetch_cost(self.snapshot, entry.target, config.miss_penalty_ms) > config.time_budget_ms:
                trace.stop_reason = StopReason.TIME_BUDGET
                break
            try:
                record = sim_fetch(self.snapshot, entry.target, clock, config.miss_penalty_ms)
            except PageNotFoundError:
                dead.add(entry.target)
                continue

            visited.add(entry.target)
            analysis = self.index.analyze(entry.target)
            duplicate = analysis.document.checksum in checksums
            checksums.add(analysis.document.checksum)
            relevant = oracle_label(self.oracle, entry.target, record)

            if entry.depth < config.max_depth:
                children = self._children(entry, record, analysis, visited, dead, seq)
                frontier.push(children)

            visit = VisitRecord(
                step=len(trace.visits) + 1,
                url=entry.target,
                virtual_time_ms=clock.now_ms,
                relevant=relevant,
                duplicate_content=duplicate,
                frontier_size=frontier.size,
                visited_size=len(visited),
            )
            trace.visits.append(visit)
            if self.app:
                self.app.display_debug(f"{visit.step:>6} {visit.url} (frontier {visit.frontier_size})")
            if len(trace.visits) >= config.max_pages:
                trace.stop_reason = StopReason.PAGE_BUDGET
                break

        if self.app:
            self.app.display_info(
                f"Strategy '{config.strategy}': {len(trace.visits)} pages, stopped on {trace.stop_reason}"
            )
        return trace

    def _children(
        self,
        entry: FrontierEntry,
        record: PageRecord,
        analysis: PageAnalysis,
        visited: set[str],
        dead: set[str],
        seq: Iterator[int],
    ) -> list[FrontierEntry]:
        config = self.config
        links = [
            link
            for link in analysis.links
            if link.target not in visited and link.target not in dead and in_scope(link, config.link_scope)
        ]
        depth = entry.depth + 1
        strategy = config.strategy
        if strategy in (StrategyKind.BFS, StrategyKind.DFS):
            return [FrontierEntry(link.target, 0.0, depth, next(seq)) for link in links]

        if strategy == StrategyKind.NB:
            posterior = nb_posterior(self.nb_model, analysis.document.tokens)
            admit, score = nb_link_admit(posterior, config.nb_threshold)
            # Seed pages are always expanded; the classifier gates links of everything reached from them.
            if not admit and entry.depth > 0:
                return []
            return [FrontierEntry(link.target, score, depth, next(seq)) for link in links]

        parent_sim = self.query.similarity(analysis.vector)
        vocab = self.index.vocabulary
        children = []
        for link in links:
            anchor_sim = self.query.similarity(build_vector(link.anchor_text, vocab, Weighting.TFIDF))
            if strategy == StrategyKind.PRIORITY:
                score = priority_score(parent_sim, anchor_sim, config.priority)
                children.append(FrontierEntry(link.target, score, depth, next(seq)))
            else:
                context_sim = self.query.similarity(build_vector(link.context, vocab, Weighting.TFIDF))
                potential, inherited = shark_score(parent_sim, entry.inherited, anchor_sim, context_sim, config.shark)
                children.append(FrontierEntry(link.target, potential, depth, next(seq), inherited))
        return children


def crawl(
    snapshot: GraphSnapshot,
    config: CrawlConfig,
    oracle: RelevanceOracle,
    nb_model: NBModel | None = None,
    index: CorpusIndex | None = None,
    app: Application | None = None,
) -> CrawlTrace:
    return Crawler(snapshot, config, oracle, nb_model=nb_model, index=index, app=app).run()


def run_live_crawl(
    fetcher: LiveFetcher,
    config: CrawlConfig,
    out: str | PathLike,
    seeds: Sequence[str],
    topic_query: Iterable[str] = (),
    app: Application | None = None,
) -> GraphSnapshot:
    """Breadth-first ingestion of live pages into a snapshot file for later offline benchmarking."""
    seed_urls = [url for url in (normalize_url(s) for s in seeds) if url is not None]
    if not seed_urls:
        raise IngestError(f"no valid http(s) seed URL in {list(seeds)}")

    seq = itertools.count()
    frontier = make_frontier(StrategyKind.BFS)
    frontier.push(FrontierEntry(url, 1.0, 0, next(seq)) for url in seed_urls)
    visited: set[str] = set()
    records: list[PageRecord] = []

    if app:
        app.display_mini_header("frontier-bench ingest")
        app.display_info(f"Ingesting up to {config.max_pages} pages from {', '.join(seed_urls)}")

    while len(records) < config.max_pages and (entry := frontier.pop()) is not None:
        if entry.target in visited:
            continue
        visited.add(entry.target)
        if not fetcher.allowed(entry.target):
            if app:
                app.display_warning(f"Disallowed by robots.txt: {entry.target}")
            continue
        try:
            result = fetcher.fetch(entry.target)
        except FetchError as e:
            if app:
                app.display_warning(f"Skipping {entry.target}: {e}")
            continue
        if result.status != 200:
            if app:
                app.display_debug(f"Skipping {entry.target}: HTTP {result.status}")
            continue

        records.append(PageRecord(url=entry.target, html=result.body, latency_ms=result.elapsed_ms))
        if app:
            app.display_debug(f"{len(records):>5} {entry.target} ({result.elapsed_ms} ms)")
        if entry.depth < config.max_depth:
            _, links = parse_page(result.body, entry.target, config.context_window, entry.depth + 1)
            frontier.push(
                FrontierEntry(link.target, 0.0, link.depth, next(seq))
                for link in links
                if link.target not in visited and in_scope(link, config.link_scope)
            )

    fetched = {record.url for record in records}
    kept_seeds = [url for url in seed_urls if url in fetched]
    if not kept_seeds:
        raise IngestError(f"none of the seed URLs could be fetched: {', '.join(seed_urls)}")
    snapshot = GraphSnapshot.from_records(records, seeds=kept_seeds, topic_query=topic_query)
    save_snapshot(snapshot, out)
    if app:
        app.display_success(f"Wrote {len(records)} pages to '{out}'")
    return snapshot
