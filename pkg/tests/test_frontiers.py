"""Tests for frontier_bench.frontiers module."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from frontier_bench.config import PriorityWeights, SharkParams, StrategyKind
from frontier_bench.frontiers import (
    BestFirstFrontier,
    FifoFrontier,
    FrontierEntry,
    LifoFrontier,
    frontier_pop,
    frontier_push,
    make_frontier,
    nb_link_admit,
    priority_score,
    shark_score,
)


def _entries(*specs):
    """Entries from (url, score) pairs with increasing sequence numbers."""
    return [FrontierEntry(url, score, 1, seq) for seq, (url, score) in enumerate(specs)]


def _drain(frontier):
    order = []
    while (entry := frontier_pop(frontier)) is not None:
        order.append(entry.target)
    return order


class TestMakeFrontier:
    """Test cases for frontier selection."""

    @pytest.mark.parametrize(
        ("kind", "cls"),
        [
            (StrategyKind.BFS, FifoFrontier),
            (StrategyKind.DFS, LifoFrontier),
            (StrategyKind.SHARK, BestFirstFrontier),
            (StrategyKind.PRIORITY, BestFirstFrontier),
            (StrategyKind.NB, BestFirstFrontier),
        ],
    )
    def test_make_frontier(self, kind, cls):
        """Test each strategy gets its pop discipline."""
        assert type(make_frontier(kind)) is cls

    def test_only_priority_reprioritizes(self):
        """Test the max-score update rule is used by the priority strategy alone."""
        assert make_frontier("priority").reprioritize
        assert not make_frontier("shark").reprioritize


class TestFifoFrontier:
    """Test cases for the breadth-first frontier."""

    def test_insertion_order(self):
        """Test entries pop in insertion order."""
        frontier = FifoFrontier()
        frontier_push(frontier, _entries(("a", 0), ("b", 0), ("c", 0)))

        assert _drain(frontier) == ["a", "b", "c"]

    def test_rediscovery_ignored(self):
        """Test a pending URL keeps its original position."""
        frontier = FifoFrontier()
        frontier_push(frontier, _entries(("a", 0), ("b", 0)))
        frontier_push(frontier, [FrontierEntry("a", 0, 2, 10)])

        assert _drain(frontier) == ["a", "b"]

    def test_empty_pop(self):
        """Test popping an empty frontier returns None."""
        assert frontier_pop(FifoFrontier()) is None


class TestLifoFrontier:
    """Test cases for the depth-first frontier."""

    def test_last_in_first_out(self):
        """Test the most recent entry pops first."""
        frontier = LifoFrontier()
        frontier_push(frontier, _entries(("a", 0), ("b", 0), ("c", 0)))

        assert _drain(frontier) == ["c", "b", "a"]

    def test_rediscovery_moves_to_top(self):
        """Test a rediscovered URL pops next and only once."""
        frontier = LifoFrontier()
        frontier_push(frontier, _entries(("a", 0), ("b", 0)))
        frontier_push(frontier, [FrontierEntry("a", 0, 2, 10)])

        assert len(frontier) == 2
        assert frontier_pop(frontier) == FrontierEntry("a", 0, 2, 10)
        assert _drain(frontier) == ["b"]


class TestBestFirstFrontier:
    """Test cases for the best-first frontier."""

    def test_highest_score_first(self):
        """Test entries pop by descending score."""
        frontier = BestFirstFrontier()
        frontier_push(frontier, _entries(("a", 0.2), ("b", 0.9), ("c", 0.5)))

        assert _drain(frontier) == ["b", "c", "a"]

    def test_ties_by_sequence(self):
        """Test equal scores pop in discovery order."""
        frontier = BestFirstFrontier()
        frontier_push(frontier, _entries(("a", 0.5), ("b", 0.5), ("c", 0.5)))

        assert _drain(frontier) == ["a", "b", "c"]

    def test_first_seen_entry_kept(self):
        """Test without reprioritizing a rediscovery changes nothing."""
        frontier = BestFirstFrontier()
        frontier_push(frontier, _entries(("a", 0.1), ("b", 0.5)))
        frontier_push(frontier, [FrontierEntry("a", 0.9, 3, 10)])

        assert frontier.get("a").score == 0.1
        assert _drain(frontier) == ["b", "a"]

    def test_reprioritize_takes_max(self):
        """Test a higher score lifts the pending entry, keeping its depth and sequence."""
        frontier = BestFirstFrontier(reprioritize=True)
        frontier_push(frontier, _entries(("a", 0.1), ("b", 0.5)))
        frontier_push(frontier, [FrontierEntry("a", 0.9, 3, 10)])

        assert frontier.get("a") == FrontierEntry("a", 0.9, 1, 0)
        assert _drain(frontier) == ["a", "b"]

    def test_reprioritize_ignores_lower(self):
        """Test a lower score leaves the pending entry alone."""
        frontier = BestFirstFrontier(reprioritize=True)
        frontier_push(frontier, _entries(("a", 0.6)))
        frontier_push(frontier, [FrontierEntry("a", 0.1, 3, 10)])

        assert frontier.get("a").score == 0.6

    def test_peak_size(self):
        """Test the largest pending size is remembered."""
        frontier = BestFirstFrontier()
        frontier_push(frontier, _entries(("a", 0.1), ("b", 0.2), ("c", 0.3)))
        _drain(frontier)

        assert frontier.size == 0
        assert frontier.peak_size == 3

    @given(st.lists(st.tuples(st.sampled_from("abcdefgh"), st.floats(0, 1)), max_size=40))
    def test_each_url_pops_once(self, pushes):
        """Test every URL pops at most once whatever the push sequence."""
        frontier = BestFirstFrontier(reprioritize=True)
        frontier_push(frontier, _entries(*pushes))
        order = _drain(frontier)

        assert len(order) == len(set(order)) == len({url for url, _ in pushes})


class TestScoring:
    """Test cases for the per-strategy scoring functions."""

    def test_shark_relevant_parent(self):
        """Test the inherited score decays the parent's similarity."""
        params = SharkParams(delta=0.5, gamma=0.5, beta=0.8)

        potential, inherited = shark_score(0.8, 0.0, 0.5, 0.2, params)

        assert inherited == pytest.approx(0.4)
        assert potential == pytest.approx(0.5 * 0.4 + 0.5 * (0.8 * 0.5 + 0.2 * 1.0))

    def test_shark_irrelevant_parent_inherits(self):
        """Test an irrelevant parent passes on its own inherited score, decayed."""
        params = SharkParams(delta=0.5)

        _, inherited = shark_score(0.0, 0.4, 0.0, 0.0, params)

        assert inherited == pytest.approx(0.2)

    def test_shark_decay_chain(self):
        """Test inherited scores halve along a chain of irrelevant pages."""
        params = SharkParams(delta=0.5)
        _, inherited = shark_score(1.0, 0.0, 0.0, 0.0, params)
        chain = [inherited]
        for _ in range(3):
            _, inherited = shark_score(0.0, inherited, 0.0, 0.0, params)
            chain.append(inherited)

        assert chain == pytest.approx([0.5, 0.25, 0.125, 0.0625])

    def test_shark_context_used_without_anchor_match(self):
        """Test context similarity counts only when the anchor does not match."""
        params = SharkParams(gamma=0.0, beta=0.8)

        potential, _ = shark_score(0.0, 0.0, 0.0, 0.5, params)

        assert potential == pytest.approx(0.2 * 0.5)

    def test_priority_score(self):
        """Test the convex combination of parent and anchor similarity."""
        assert priority_score(0.4, 0.8) == pytest.approx(0.6)
        assert priority_score(1.0, 0.0, PriorityWeights(parent=0.25, anchor=0.75)) == pytest.approx(0.25)

    @pytest.mark.parametrize(("posterior", "admitted"), [(0.49, False), (0.5, True), (0.9, True)])
    def test_nb_link_admit(self, posterior, admitted):
        """Test links are admitted from the threshold on, scored by the parent posterior."""
        assert nb_link_admit(posterior, 0.5) == (admitted, posterior)
