"""Pytest configuration and shared fixtures."""

import shutil
import tempfile
from pathlib import Path
from unittest.mock import Mock

import pytest

from frontier_bench.engine import CorpusIndex
from frontier_bench.evalbench import RelevanceOracle
from frontier_bench.webgraph import GraphSnapshot, PageRecord, synth_graph

HOST = "https://example.test"


def render_page(body: str = "", links=(), title: str = "") -> bytes:
    """Small HTML page; `links` holds (href, anchor text) pairs."""
    items = "".join(f'<li><a href="{href}">{anchor}</a></li>' for href, anchor in links)
    return f"<html><head><title>{title}</title></head><body><p>{body}</p><ul>{items}</ul></body></html>".encode()


@pytest.fixture
def temp_dir():
    """Create a temporary directory for tests."""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir, ignore_errors=True)


@pytest.fixture
def mock_app():
    """Create a mock Hatch application."""
    app = Mock()
    app.display = Mock()
    app.display_mini_header = Mock()
    app.display_info = Mock()
    app.display_debug = Mock()
    app.display_waiting = Mock()
    app.display_warning = Mock()
    app.display_success = Mock()
    app.display_error = Mock()
    return app


@pytest.fixture
def make_snapshot():
    """Factory building a snapshot from {path: (body, [(href, anchor)], label)} on a single test host."""

    def factory(pages, seeds=("/",), topic=("shark",), latency_ms=100):
        records = [
            PageRecord(url=f"{HOST}{path}", html=render_page(body, links), latency_ms=latency_ms, label=label)
            for path, (body, links, label) in pages.items()
        ]
        return GraphSnapshot.from_records(records, seeds=[f"{HOST}{s}" for s in seeds], topic_query=topic)

    return factory


@pytest.fixture
def tiny_site(make_snapshot):
    """A six page site: a root with a topical branch and an off-topic branch.

    /          -> /a, /b
    /a (rel)   -> /a1, /a2
    /b         -> /b1
    /a1 (rel), /a2, /b1 have no links
    """
    return make_snapshot(
        {
            "/": ("welcome portal", [("/a", "shark news"), ("/b", "cooking recipes")], False),
            "/a": ("shark shark ocean", [("/a1", "shark fins"), ("/a2", "boats")], True),
            "/b": ("cooking pasta recipes", [("/b1", "sauce")], False),
            "/a1": ("shark teeth biology", [], True),
            "/a2": ("boats harbour", [], False),
            "/b1": ("tomato sauce", [], False),
        }
    )


@pytest.fixture
def labels_oracle():
    return RelevanceOracle(mode="labels")


@pytest.fixture(scope="session")
def synth_small():
    """A 300 page planted-cluster snapshot shared by the slower tests."""
    return synth_graph(rng_seed=7, n_pages=300, relevant_fraction=0.2)


@pytest.fixture(scope="session")
def synth_small_index(synth_small):
    return CorpusIndex(synth_small)
