"""Offline web graph: immutable snapshots served under a virtual clock."""

import base64
import binascii
import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from os import PathLike
from types import MappingProxyType

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from frontier_bench._stopwords import STOP_WORDS
from frontier_bench._util import atomic_write, digest64_hex, split_records
from frontier_bench.config import SynthParams
from frontier_bench.extract import normalize_url

FORMAT_VERSION = 1
DEFAULT_LATENCY_MS = 3600
SYNTH_HOST = "https://synth.example"


class SnapshotFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DuplicateUrlError(SnapshotFormatError):
    pass


class MissingSeedError(SnapshotFormatError):
    pass


class PageNotFoundError(KeyError):
    def __init__(self, url: str):
        self.url = url
        super().__init__(url)

    def __str__(self):
        return f"page not found: {self.url}"


@dataclass(frozen=True, slots=True)
class PageRecord:
    url: str
    html: bytes
    latency_ms: int = DEFAULT_LATENCY_MS
    label: bool | None = None

    def __post_init__(self):
        if self.latency_ms < 0:
            raise ValueError(f"negative latency for {self.url}")
        if normalize_url(self.url) != self.url:
            raise ValueError(f"URL is not absolute and normalized: {self.url!r}")


@dataclass(frozen=True, eq=False)
class GraphSnapshot:
    topic_query: tuple[str, ...]
    pages: Mapping[str, PageRecord]
    seeds: tuple[str, ...]
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        object.__setattr__(self, "pages", MappingProxyType(dict(self.pages)))
        for url, record in self.pages.items():
            if url != record.url:
                raise ValueError(f"page key {url!r} does not match record URL {record.url!r}")
        for seed in self.seeds:
            if seed not in self.pages:
                raise MissingSeedError(f"seed {seed!r} is not in the snapshot")

    @classmethod
    def from_records(
        cls, records: Iterable[PageRecord], seeds: Iterable[str], topic_query: Iterable[str] = ()
    ) -> "GraphSnapshot":
        pages: dict[str, PageRecord] = {}
        for record in records:
            if record.url in pages:
                raise DuplicateUrlError(f"duplicate URL {record.url!r}")
            pages[record.url] = record
        return cls(topic_query=tuple(topic_query), pages=pages, seeds=tuple(seeds))

    @cached_property
    def snapshot_id(self) -> str:
        return digest64_hex(dumps_snapshot(self))

    def is_fully_labeled(self) -> bool:
        return all(record.label is not None for record in self.pages.values())


@dataclass
class VirtualClock:
    now_ms: int = 0

    def advance(self, ms: int) -> int:
        if ms < 0:
            raise ValueError("the virtual clock cannot move backwards")
        self.now_ms += ms
        return self.now_ms


class _Header(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int
    topic_query: str
    seeds: list[str]

    @field_validator("format_version")
    @classmethod
    def _supported(cls, value):
        if value != FORMAT_VERSION:
            raise ValueError(f"unsupported format_version {value}")
        return value


class _Record(BaseModel):
    model_config = ConfigDict(extra="forbid")

    url: str
    latency_ms: int
    label: bool | None
    html_b64: str


def dumps_snapshot(snapshot: GraphSnapshot) -> bytes:
    lines = [
        _Header(
            format_version=snapshot.format_version,
            topic_query=" ".join(snapshot.topic_query),
            seeds=list(snapshot.seeds),
        ).model_dump_json()
    ]
    for url in sorted(snapshot.pages):
        record = snapshot.pages[url]
        lines.append(
            _Record(
                url=record.url,
                latency_ms=record.latency_ms,
                label=record.label,
                html_b64=base64.b64encode(record.html).decode("ascii"),
            ).model_dump_json()
        )
    return ("\n".join(lines) + "\n").encode("utf-8")


def loads_snapshot(data: bytes) -> GraphSnapshot:
    lines = split_records(data)
    if not lines:
        raise SnapshotFormatError("empty snapshot, header missing", line=1)
    try:
        header = _Header.model_validate_json(lines[0].decode("utf-8"))
    except (ValidationError, UnicodeDecodeError) as e:
        raise SnapshotFormatError(f"invalid header: {e}", line=1) from e

    pages: dict[str, PageRecord] = {}
    for number, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            # UnicodeDecodeError is a ValueError
            raw = _Record.model_validate_json(line.decode("utf-8"))
            html = base64.b64decode(raw.html_b64, validate=True)
            url = normalize_url(raw.url)
            if url is None:
                raise ValueError(f"not an absolute http(s) URL: {raw.url!r}")
            record = PageRecord(url=url, html=html, latency_ms=raw.latency_ms, label=raw.label)
        except (ValidationError, ValueError, binascii.Error) as e:
            raise SnapshotFormatError(str(e), line=number) from e
        if url in pages:
            raise DuplicateUrlError(f"duplicate URL {url!r}", line=number)
        pages[url] = record

    seeds = []
    for seed in header.seeds:
        url = normalize_url(seed)
        if url is None or url not in pages:
            raise MissingSeedError(f"seed {seed!r} is not in the snapshot", line=1)
        seeds.append(url)
    return GraphSnapshot(topic_query=tuple(header.topic_query.split()), pages=pages, seeds=tuple(seeds))


def load_snapshot(path: str | PathLike) -> GraphSnapshot:
    with open(path, "rb") as f:
        return loads_snapshot(f.read())


def save_snapshot(snapshot: GraphSnapshot, path: str | PathLike) -> None:
    atomic_write(path, dumps_snapshot(snapshot))


def sim_fetch(snapshot: GraphSnapshot, url: str, clock: VirtualClock, miss_penalty_ms: int = 0) -> PageRecord:
    record = snapshot.pages.get(url)
    if record is None:
        clock.advance(miss_penalty_ms)
        raise PageNotFoundError(url)
    clock.advance(record.latency_ms)
    return record


def fetch_cost(snapshot: GraphSnapshot, url: str, miss_penalty_ms: int = 0) -> int:
    record = snapshot.pages.get(url)
    return miss_penalty_ms if record is None else record.latency_ms


# Synthetic planted-cluster graphs


_SYLLABLES = ("ba", "de", "ki", "lo", "mu", "na", "po", "ri", "sa", "te", "vo", "zu", "gar", "len", "tor", "wim")


def _filler_vocabulary(rng: np.random.Generator, size: int, reserved: set[str]) -> list[str]:
    words: list[str] = []
    seen = set(reserved)
    while len(words) < size:
        n = int(rng.integers(2, 4))
        word = "".join(_SYLLABLES[int(i)] for i in rng.integers(0, len(_SYLLABLES), size=n))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


@dataclass
class _SynthPage:
    url: str
    relevant: bool
    links: list[int] = field(default_factory=list)


def _relevant_count(n_pages: int, fraction: float) -> int:
    # Guard against binary float noise such as 0.07 * 100 = 7.000000000000001.
    return min(n_pages, math.ceil(round(fraction * n_pages, 9)))


def synth_graph(
    rng_seed: int,
    n_pages: int,
    relevant_fraction: float,
    intra_cluster_link_prob: float = 0.05,
    cross_link_prob: float = 0.002,
    latency_ms: int = DEFAULT_LATENCY_MS,
    **extra,
) -> GraphSnapshot:
    """Generate a planted-cluster web graph.

    ``ceil(relevant_fraction * n_pages)`` pages mention the topic terms and form a densely linked cluster;
    the rest are topic-free filler pages. The seed is an irrelevant hub unless every page is relevant.
    A spanning tree rooted at the seed makes every page reachable, and every link into the cluster
    carries a topic term in its anchor text.
    """
    params = SynthParams(
        rng_seed=rng_seed,
        n_pages=n_pages,
        relevant_fraction=relevant_fraction,
        intra_cluster_link_prob=intra_cluster_link_prob,
        cross_link_prob=cross_link_prob,
        latency_ms=latency_ms,
        **extra,
    )
    rng = np.random.default_rng(params.rng_seed)
    topic = [t.lower() for t in params.topic_terms]
    filler = _filler_vocabulary(rng, 400, set(topic) | STOP_WORDS)

    n_rel = _relevant_count(params.n_pages, params.relevant_fraction)
    n_irr = params.n_pages - n_rel
    width = len(str(params.n_pages))
    ids = rng.permutation(params.n_pages)
    pages = [
        _SynthPage(url=f"{SYNTH_HOST}/p/{int(ids[i]):0{width}d}", relevant=i >= n_irr) for i in range(params.n_pages)
    ]
    # Index 0 is the seed. Irrelevant pages occupy [0, n_irr), the cluster [n_irr, n_pages).
    irrelevant = list(range(n_irr))
    cluster = list(range(n_irr, params.n_pages))

    def link(source: int, target: int):
        if source != target and target not in pages[source].links:
            pages[source].links.append(target)

    for i in range(1, n_irr):
        link(int(rng.integers(0, i)), i)
    for position, page in enumerate(cluster):
        if position == 0:
            if page != 0:
                link(0, page)
        else:
            link(cluster[int(rng.integers(0, position))], page)

    if n_rel > 1:
        for page in cluster:
            k = int(rng.binomial(n_rel - 1, params.intra_cluster_link_prob))
            for target in rng.choice(cluster, size=k, replace=False):
                link(page, int(target))
    if n_rel and n_irr:
        for page in irrelevant:
            for target in rng.choice(cluster, size=int(rng.binomial(n_rel, params.cross_link_prob)), replace=False):
                link(page, int(target))
    if n_irr > 1:
        for page in range(params.n_pages):
            k = min(params.background_degree, n_irr)
            for target in rng.choice(n_irr, size=k, replace=False):
                link(page, int(target))
    if params.n_pages > 1:
        fanout = min(params.seed_fanout, params.n_pages - 1)
        for target in rng.choice(np.arange(1, params.n_pages), size=fanout, replace=False):
            link(0, int(target))

    records = []
    for page in pages:
        order = list(page.links)
        rng.shuffle(order)
        records.append(
            PageRecord(
                url=page.url,
                html=_render_page(rng, page, [pages[t] for t in order], topic, filler),
                latency_ms=params.latency_ms,
                label=page.relevant,
            )
        )
    return GraphSnapshot.from_records(records, seeds=[pages[0].url], topic_query=topic)


def _words(rng: np.random.Generator, vocabulary: list[str], n: int) -> list[str]:
    return [vocabulary[int(i)] for i in rng.integers(0, len(vocabulary), size=n)]


def _render_page(rng, page: _SynthPage, targets: list[_SynthPage], topic: list[str], filler: list[str]) -> bytes:
    body = _words(rng, filler, 40)
    if page.relevant:
        for term in _words(rng, topic, 6):
            body.insert(int(rng.integers(0, len(body) + 1)), term)
    title = " ".join(_words(rng, topic if page.relevant else filler, 2))
    items = []
    for target in targets:
        anchor = _words(rng, filler, 2)
        if target.relevant:
            anchor.insert(int(rng.integers(0, 3)), _words(rng, topic, 1)[0])
        items.append(f'<li><a href="{target.url.removeprefix(SYNTH_HOST)}">{" ".join(anchor)}</a></li>')
    html = (
        f"<!DOCTYPE html>\n<html><head><title>{title}</title></head><body>\n"
        f"<p>{' '.join(body)}</p>\n<ul>\n" + "\n".join(items) + "\n</ul>\n</body></html>\n"
    )
    return html.encode("utf-8")
