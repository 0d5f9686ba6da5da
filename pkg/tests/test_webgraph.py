"""Tests for frontier_bench.webgraph module."""

import base64
import json
from collections import deque

import pytest
from pydantic import ValidationError

from frontier_bench.extract import parse_links
from frontier_bench.webgraph import (
    DuplicateUrlError,
    GraphSnapshot,
    MissingSeedError,
    PageNotFoundError,
    PageRecord,
    SnapshotFormatError,
    VirtualClock,
    dumps_snapshot,
    fetch_cost,
    load_snapshot,
    loads_snapshot,
    save_snapshot,
    sim_fetch,
    synth_graph,
)

URL = "https://example.test/"


def _header(**overrides):
    header = {"format_version": 1, "topic_query": "shark", "seeds": [URL]}
    header.update(overrides)
    return json.dumps(header)


def _record(url=URL, html=b"<p>shark</p>", **overrides):
    record = {"url": url, "latency_ms": 10, "label": True, "html_b64": base64.b64encode(html).decode()}
    record.update(overrides)
    return json.dumps(record)


def _reachable(snapshot):
    seen = set(snapshot.seeds)
    queue = deque(snapshot.seeds)
    while queue:
        url = queue.popleft()
        for link in parse_links(snapshot.pages[url].html, url):
            if link.target in snapshot.pages and link.target not in seen:
                seen.add(link.target)
                queue.append(link.target)
    return seen


class TestPageRecord:
    """Test cases for page records."""

    def test_negative_latency_rejected(self):
        """Test latency must be non-negative."""
        with pytest.raises(ValueError, match="negative latency"):
            PageRecord(url=URL, html=b"", latency_ms=-1)

    def test_unnormalized_url_rejected(self):
        """Test records only hold normalized absolute URLs."""
        with pytest.raises(ValueError, match="normalized"):
            PageRecord(url="HTTPS://Example.test", html=b"")


class TestGraphSnapshot:
    """Test cases for snapshot construction."""

    def test_duplicate_url_rejected(self):
        """Test two records for one URL are rejected."""
        with pytest.raises(DuplicateUrlError):
            GraphSnapshot.from_records([PageRecord(URL, b""), PageRecord(URL, b"x")], seeds=[URL])

    def test_missing_seed_rejected(self):
        """Test every seed must be a page of the snapshot."""
        with pytest.raises(MissingSeedError):
            GraphSnapshot.from_records([PageRecord(URL, b"")], seeds=["https://example.test/missing"])

    def test_pages_are_read_only(self, tiny_site):
        """Test the page map cannot be modified."""
        with pytest.raises(TypeError):
            tiny_site.pages["https://example.test/new"] = None

    def test_snapshot_id_is_stable(self, tiny_site):
        """Test the id is a 16 hex digit digest of the serialized snapshot."""
        again = loads_snapshot(dumps_snapshot(tiny_site))

        assert len(tiny_site.snapshot_id) == 16
        assert again.snapshot_id == tiny_site.snapshot_id

    def test_is_fully_labeled(self, tiny_site):
        """Test label coverage detection."""
        unlabeled = GraphSnapshot.from_records([PageRecord(URL, b"")], seeds=[URL])

        assert tiny_site.is_fully_labeled()
        assert not unlabeled.is_fully_labeled()


class TestSnapshotFiles:
    """Test cases for reading and writing snapshot files."""

    def test_save_and_load(self, tiny_site, temp_dir):
        """Test a saved snapshot loads back with identical content."""
        path = temp_dir / "site.snap"

        save_snapshot(tiny_site, path)
        loaded = load_snapshot(path)

        assert loaded.seeds == tiny_site.seeds
        assert loaded.topic_query == tiny_site.topic_query
        assert dict(loaded.pages) == dict(tiny_site.pages)
        assert path.read_bytes() == dumps_snapshot(loaded)

    def test_records_sorted_by_url(self, tiny_site):
        """Test the serialized form is canonical."""
        lines = dumps_snapshot(tiny_site).decode().splitlines()
        urls = [json.loads(line)["url"] for line in lines[1:]]

        assert urls == sorted(urls)

    def test_empty_file(self):
        """Test an empty file reports a missing header."""
        with pytest.raises(SnapshotFormatError, match="header missing") as excinfo:
            loads_snapshot(b"")
        assert excinfo.value.line == 1

    def test_unsupported_version(self):
        """Test unknown format versions are rejected."""
        with pytest.raises(SnapshotFormatError) as excinfo:
            loads_snapshot(f"{_header(format_version=2)}\n{_record()}\n".encode())
        assert excinfo.value.line == 1

    def test_bad_base64_reports_line(self):
        """Test record errors point at their line."""
        data = f"{_header()}\n{_record()}\n{_record(url='https://example.test/b', html_b64='!!!')}\n"

        with pytest.raises(SnapshotFormatError) as excinfo:
            loads_snapshot(data.encode())
        assert excinfo.value.line == 3

    def test_duplicate_url_in_file(self):
        """Test duplicate records in a file are rejected with their line."""
        with pytest.raises(DuplicateUrlError) as excinfo:
            loads_snapshot(f"{_header()}\n{_record()}\n{_record()}\n".encode())
        assert excinfo.value.line == 3

    def test_seed_missing_from_file(self):
        """Test a header seed must appear among the records."""
        data = f"{_header(seeds=['https://example.test/x'])}\n{_record()}\n"

        with pytest.raises(MissingSeedError):
            loads_snapshot(data.encode())

    def test_extra_field_rejected(self):
        """Test unknown record fields are errors."""
        with pytest.raises(SnapshotFormatError):
            loads_snapshot(f"{_header()}\n{_record(extra=1)}\n".encode())

    def test_urls_normalized_on_load(self):
        """Test record URLs are normalized when read."""
        snapshot = loads_snapshot(f"{_header()}\n{_record(url='HTTPS://EXAMPLE.test:443')}\n".encode())

        assert list(snapshot.pages) == [URL]

    def test_unicode_line_separators_inside_strings(self):
        """Test raw U+0085 and U+2028 inside JSON strings do not split records."""
        header = json.dumps(json.loads(_header(topic_query="shark reef\x85fin")), ensure_ascii=False)
        odd = json.dumps(json.loads(_record(url="https://example.test/a\u2028b")), ensure_ascii=False)
        data = "\n".join([header, _record(), odd, ""]).encode()

        snapshot = loads_snapshot(data)

        assert "\u2028".encode() in data
        assert "\x85".encode() in data
        assert snapshot.topic_query == ("shark", "reef", "fin")
        assert sorted(snapshot.pages) == [URL, "https://example.test/a%E2%80%A8b"]
        assert loads_snapshot(dumps_snapshot(snapshot)).snapshot_id == snapshot.snapshot_id

    def test_invalid_utf8_reports_line(self):
        """Test undecodable bytes are a format error pointing at their line."""
        with pytest.raises(SnapshotFormatError) as excinfo:
            loads_snapshot(f"{_header()}\n{_record()}\n".encode() + b'{"url": "\xff"}\n')
        assert excinfo.value.line == 3

        with pytest.raises(SnapshotFormatError) as excinfo:
            loads_snapshot(b"\xfe\xff\n" + f"{_record()}\n".encode())
        assert excinfo.value.line == 1


class TestVirtualClock:
    """Test cases for the virtual clock."""

    def test_advance(self):
        """Test the clock accumulates increments."""
        clock = VirtualClock()
        clock.advance(5)

        assert clock.advance(7) == 12

    def test_negative_advance_rejected(self):
        """Test the clock is monotone."""
        with pytest.raises(ValueError):
            VirtualClock().advance(-1)


class TestSimFetch:
    """Test cases for simulated fetches."""

    def test_sim_fetch_advances_by_latency(self, tiny_site):
        """Test a hit returns the record and charges its latency."""
        clock = VirtualClock()

        record = sim_fetch(tiny_site, "https://example.test/a", clock)

        assert record.label is True
        assert clock.now_ms == 100

    def test_sim_fetch_miss(self, tiny_site):
        """Test a miss raises and charges only the miss penalty."""
        clock = VirtualClock()

        with pytest.raises(PageNotFoundError):
            sim_fetch(tiny_site, "https://example.test/nowhere", clock, miss_penalty_ms=3)
        assert clock.now_ms == 3

    def test_fetch_cost(self, tiny_site):
        """Test the cost lookup matches what sim_fetch charges."""
        assert fetch_cost(tiny_site, "https://example.test/a") == 100
        assert fetch_cost(tiny_site, "https://example.test/nowhere", 9) == 9


class TestSynthGraph:
    """Test cases for the synthetic planted-cluster generator."""

    def test_same_seed_same_bytes(self):
        """Test generation is deterministic in its seed."""
        first = synth_graph(rng_seed=3, n_pages=120, relevant_fraction=0.25)
        second = synth_graph(rng_seed=3, n_pages=120, relevant_fraction=0.25)

        assert dumps_snapshot(first) == dumps_snapshot(second)

    def test_different_seed_different_graph(self):
        """Test the seed actually changes the graph."""
        first = synth_graph(rng_seed=3, n_pages=120, relevant_fraction=0.25)
        second = synth_graph(rng_seed=4, n_pages=120, relevant_fraction=0.25)

        assert first.snapshot_id != second.snapshot_id

    def test_relevant_count(self):
        """Test ceil(fraction * n) pages are labelled relevant."""
        snapshot = synth_graph(rng_seed=1, n_pages=100, relevant_fraction=0.07)

        assert len(snapshot.pages) == 100
        assert sum(record.label for record in snapshot.pages.values()) == 7

    def test_every_page_reachable(self, synth_small):
        """Test the whole graph is reachable from the seed."""
        assert _reachable(synth_small) == set(synth_small.pages)

    def test_seed_is_irrelevant_hub(self, synth_small):
        """Test the seed page is not part of the cluster."""
        assert synth_small.pages[synth_small.seeds[0]].label is False

    def test_topic_query_and_latency(self):
        """Test the topic terms and the uniform latency are carried through."""
        snapshot = synth_graph(rng_seed=1, n_pages=20, relevant_fraction=0.5, latency_ms=42, topic_terms="fish reef")

        assert snapshot.topic_query == ("fish", "reef")
        assert {record.latency_ms for record in snapshot.pages.values()} == {42}

    @pytest.mark.parametrize("fraction", [0.0, 1.0])
    def test_degenerate_fractions(self, fraction):
        """Test graphs with no cluster or only cluster pages still generate."""
        snapshot = synth_graph(rng_seed=1, n_pages=30, relevant_fraction=fraction)

        assert sum(record.label for record in snapshot.pages.values()) == round(30 * fraction)
        assert _reachable(snapshot) == set(snapshot.pages)

    def test_single_page(self):
        """Test a one page graph is just the seed."""
        snapshot = synth_graph(rng_seed=1, n_pages=1, relevant_fraction=0.2)

        assert list(snapshot.pages) == list(snapshot.seeds)

    def test_invalid_parameters(self):
        """Test generator parameters are validated."""
        with pytest.raises(ValidationError):
            synth_graph(rng_seed=1, n_pages=0, relevant_fraction=0.2)
