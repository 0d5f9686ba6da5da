"""Crawl metrics computed from traces, and the cross-strategy comparison report."""

import csv
import io
import math
from collections.abc import Sequence
from enum import StrEnum
from os import PathLike
from typing import TYPE_CHECKING, NamedTuple

from pydantic import BaseModel, ConfigDict, model_validator

from frontier_bench._util import atomic_write, ceil_div

if TYPE_CHECKING:
    from frontier_bench.engine import CrawlTrace
    from frontier_bench.webgraph import GraphSnapshot, PageRecord

HARVEST_N = 1000
TIME_TO_N = 1000
PAGES_BUDGET_MS = 3_600_000
# score f64 + seq u64 + inherited f64 + depth u32, the URL excluded.
FRONTIER_ENTRY_FIXED_BYTES = 28

CSV_COLUMNS = (
    "strategy",
    "pages_visited",
    "relevant_retrieved",
    "precision",
    "recall",
    "f1",
    "harvest_at_1000",
    "time_to_1000_ms",
    "pages_in_3600s",
    "peak_frontier",
    "peak_visited",
    "est_bytes",
)


class MissingLabelError(KeyError):
    def __init__(self, url: str):
        self.url = url
        super().__init__(url)

    def __str__(self):
        return f"no relevance label for {self.url}"


class SnapshotMismatchError(ValueError):
    pass


class OracleMode(StrEnum):
    LABELS = "labels"
    URL_RULE = "url_rule"


class RelevanceOracle(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    mode: OracleMode = OracleMode.LABELS
    rule_substring: str | None = None

    @model_validator(mode="after")
    def _rule_present(self):
        if self.mode == OracleMode.URL_RULE and not self.rule_substring:
            raise ValueError("url_rule oracles need a non-empty substring")
        return self

    @classmethod
    def parse(cls, spec: str, snapshot: "GraphSnapshot | None" = None) -> "RelevanceOracle":
        """Parse ``labels``, ``url_rule:<substring>`` or ``auto``.

        ``auto`` uses the snapshot labels when every page carries one, otherwise the ``wiki`` URL rule.
        """
        spec = spec.strip()
        if spec == "auto":
            if snapshot is not None and snapshot.pages and snapshot.is_fully_labeled():
                return cls(mode=OracleMode.LABELS)
            return cls(mode=OracleMode.URL_RULE, rule_substring="wiki")
        if spec == OracleMode.LABELS:
            return cls(mode=OracleMode.LABELS)
        mode, _, rule = spec.partition(":")
        if mode != OracleMode.URL_RULE:
            raise ValueError(f"unknown oracle '{spec}', expected 'labels', 'url_rule:<substring>' or 'auto'")
        return cls(mode=OracleMode.URL_RULE, rule_substring=rule)

    def __str__(self):
        return self.mode if self.mode == OracleMode.LABELS else f"{self.mode}:{self.rule_substring}"


def oracle_label(oracle: RelevanceOracle, url: str, record: "PageRecord | None" = None) -> bool:
    if oracle.mode == OracleMode.URL_RULE:
        return oracle.rule_substring.lower() in url.lower()
    if record is None or record.label is None:
        raise MissingLabelError(url)
    return record.label


def total_relevant(oracle: RelevanceOracle, snapshot: "GraphSnapshot") -> int:
    # Unlabelled pages count as not relevant here; only visited pages must carry labels.
    if oracle.mode == OracleMode.LABELS:
        return sum(1 for record in snapshot.pages.values() if record.label)
    return sum(1 for url in snapshot.pages if oracle_label(oracle, url))


def _unique_labels(
    trace: "CrawlTrace", oracle: RelevanceOracle, snapshot: "GraphSnapshot | None"
) -> list[tuple[int, bool | None]]:
    """Per visit, its step and oracle label, or None when the visit is not a unique retrieval.

    Duplicate content and repeated URLs are not unique retrievals.
    """
    pages = snapshot.pages if snapshot is not None else {}
    seen: set[str] = set()
    labels = []
    for visit in trace.visits:
        if visit.duplicate_content or visit.url in seen:
            labels.append((visit.step, None))
        else:
            labels.append((visit.step, oracle_label(oracle, visit.url, pages.get(visit.url))))
        seen.add(visit.url)
    return labels


def harvest_curve(
    trace: "CrawlTrace", oracle: RelevanceOracle, snapshot: "GraphSnapshot | None" = None
) -> list[tuple[int, int]]:
    curve = []
    count = 0
    for step, relevant in _unique_labels(trace, oracle, snapshot):
        if relevant:
            count += 1
        curve.append((step, count))
    return curve


def harvest_at(curve: Sequence[tuple[int, int]], n: int = HARVEST_N) -> float:
    considered = min(n, len(curve))
    if considered == 0:
        return 0.0
    return curve[considered - 1][1] / considered


class PRF(NamedTuple):
    precision: float
    recall: float
    f1: float
    # Share of unique visits that were relevant, i.e. precision.
    accuracy: float
    relevant_retrieved: int
    empty: bool


def _f1(precision: float, recall: float) -> float:
    if precision == 0 or recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def prf(trace: "CrawlTrace", oracle: RelevanceOracle, snapshot: "GraphSnapshot") -> PRF:
    if not trace.visits:
        return PRF(0.0, 0.0, 0.0, 0.0, 0, empty=True)
    retrieved = relevant = 0
    for _, label in _unique_labels(trace, oracle, snapshot):
        if label is None:
            continue
        retrieved += 1
        relevant += label
    precision = relevant / retrieved if retrieved else 0.0
    denominator = total_relevant(oracle, snapshot)
    recall = relevant / denominator if denominator else 0.0
    return PRF(precision, recall, _f1(precision, recall), precision, relevant, empty=False)


def time_metrics(trace: "CrawlTrace", n: int = TIME_TO_N, budget_ms: float = PAGES_BUDGET_MS):
    """Virtual time of the n-th visit (None with fewer visits) and the number of visits within the budget."""
    if n < 1:
        raise ValueError("n must be at least 1")
    time_to_n = trace.visits[n - 1].virtual_time_ms if len(trace.visits) >= n else None
    pages_in_budget = sum(1 for visit in trace.visits if visit.virtual_time_ms <= budget_ms)
    return time_to_n, pages_in_budget


def memory_metrics(trace: "CrawlTrace") -> tuple[int, int, int]:
    """Peak frontier and visited-set sizes, and an analytic byte estimate derived from them.

    est_bytes = ceil(peak_frontier * (FRONTIER_ENTRY_FIXED_BYTES + m) + peak_visited * m), m being the
    mean UTF-8 length of the visited URLs. It is an allocator-independent estimate, not a measurement.
    """
    if not trace.visits:
        return 0, 0, 0
    peak_frontier = max(visit.frontier_size for visit in trace.visits)
    peak_visited = max(visit.visited_size for visit in trace.visits)
    n = len(trace.visits)
    url_bytes = sum(len(visit.url.encode("utf-8")) for visit in trace.visits)
    numerator = peak_frontier * (FRONTIER_ENTRY_FIXED_BYTES * n + url_bytes) + peak_visited * url_bytes
    return peak_frontier, peak_visited, ceil_div(numerator, n)


class MetricRow(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    strategy: str
    pages_visited: int
    relevant_retrieved: int
    precision: float
    recall: float
    f1: float
    harvest_at_1000: float
    time_to_1000_ms: int | None
    pages_in_3600s: int
    peak_frontier: int
    peak_visited: int
    est_bytes: int


class BenchReport(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    snapshot_id: str
    rows: list[MetricRow]
    ranking: list[str]


def metric_row(trace: "CrawlTrace", oracle: RelevanceOracle, snapshot: "GraphSnapshot") -> MetricRow:
    scores = prf(trace, oracle, snapshot)
    time_to_n, pages_in_budget = time_metrics(trace)
    peak_frontier, peak_visited, est_bytes = memory_metrics(trace)
    return MetricRow(
        strategy=str(trace.config.strategy),
        pages_visited=len(trace.visits),
        relevant_retrieved=scores.relevant_retrieved,
        precision=scores.precision,
        recall=scores.recall,
        f1=scores.f1,
        harvest_at_1000=harvest_at(harvest_curve(trace, oracle, snapshot)),
        time_to_1000_ms=time_to_n,
        pages_in_3600s=pages_in_budget,
        peak_frontier=peak_frontier,
        peak_visited=peak_visited,
        est_bytes=est_bytes,
    )


def compare(traces: Sequence["CrawlTrace"], oracle: RelevanceOracle, snapshot: "GraphSnapshot") -> BenchReport:
    ids = {trace.snapshot_id for trace in traces}
    if len(ids) > 1:
        raise SnapshotMismatchError(f"traces come from different snapshots: {', '.join(sorted(ids))}")
    if ids and ids != {snapshot.snapshot_id}:
        raise SnapshotMismatchError(
            f"traces were recorded on snapshot {ids.pop()}, not on the given snapshot {snapshot.snapshot_id}"
        )
    rows = [metric_row(trace, oracle, snapshot) for trace in traces]
    ranked = sorted(rows, key=lambda row: (-row.f1, -row.harvest_at_1000, row.strategy))
    return BenchReport(snapshot_id=snapshot.snapshot_id, rows=rows, ranking=[row.strategy for row in ranked])


def _csv_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ""
    return str(value)


def dumps_report(report: BenchReport, fmt: str = "csv") -> bytes:
    if fmt == "json":
        return (report.model_dump_json(indent=2) + "\n").encode("utf-8")
    if fmt != "csv":
        raise ValueError(f"unknown report format '{fmt}'")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in report.rows:
        values = row.model_dump()
        writer.writerow([_csv_value(values[column]) for column in CSV_COLUMNS])
    return buffer.getvalue().encode("utf-8")


def write_report(report: BenchReport, path: str | PathLike, fmt: str = "csv") -> None:
    atomic_write(path, dumps_report(report, fmt))


def write_curves(
    traces: Sequence["CrawlTrace"], oracle: RelevanceOracle, snapshot: "GraphSnapshot", path: str | PathLike
) -> None:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(("strategy", "step", "relevant"))
    for trace in traces:
        for step, relevant in harvest_curve(trace, oracle, snapshot):
            writer.writerow((str(trace.config.strategy), step, relevant))
    atomic_write(path, buffer.getvalue().encode("utf-8"))
