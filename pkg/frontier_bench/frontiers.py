"""URL frontiers. The pop discipline of a frontier is what distinguishes one crawl strategy from another."""

import heapq
from abc import ABC, abstractmethod
from collections import deque
from collections.abc import Iterable
from dataclasses import dataclass

from frontier_bench.config import PriorityWeights, SharkParams, StrategyKind


@dataclass(frozen=True, slots=True)
class FrontierEntry:
    target: str
    score: float
    depth: int
    seq: int
    inherited: float = 0.0


class Frontier(ABC):
    """Holds at most one pending entry per URL and tracks its peak size."""

    def __init__(self):
        self._pending: dict[str, FrontierEntry] = {}
        self.peak_size = 0

    @property
    def size(self) -> int:
        return len(self._pending)

    def __len__(self):
        return len(self._pending)

    def __contains__(self, url: str):
        return url in self._pending

    def get(self, url: str) -> FrontierEntry | None:
        return self._pending.get(url)

    def push(self, entries: Iterable[FrontierEntry]) -> None:
        for entry in entries:
            self._admit(entry)
        self.peak_size = max(self.peak_size, len(self._pending))

    def pop(self) -> FrontierEntry | None:
        while (entry := self._take()) is not None:
            # Lazily discard entries superseded by a later push.
            if self._pending.get(entry.target) is entry:
                del self._pending[entry.target]
                return entry
        return None

    @abstractmethod
    def _admit(self, entry: FrontierEntry) -> None: ...

    @abstractmethod
    def _take(self) -> FrontierEntry | None: ...


class FifoFrontier(Frontier):
    def __init__(self):
        super().__init__()
        self._queue: deque[FrontierEntry] = deque()

    def _admit(self, entry):
        if entry.target not in self._pending:
            self._pending[entry.target] = entry
            self._queue.append(entry)

    def _take(self):
        return self._queue.popleft() if self._queue else None


class LifoFrontier(Frontier):
    def __init__(self):
        super().__init__()
        self._stack: list[FrontierEntry] = []

    def _admit(self, entry):
        # Rediscovery moves a pending URL to the top: the last discovered unvisited URL is popped next.
        self._pending[entry.target] = entry
        self._stack.append(entry)

    def _take(self):
        return self._stack.pop() if self._stack else None


class BestFirstFrontier(Frontier):
    """Highest score first, ties by lowest sequence number.

    With `reprioritize`, pushing a pending URL again raises its score to the larger of the two;
    otherwise the first-seen entry is kept.
    """

    def __init__(self, *, reprioritize: bool = False):
        super().__init__()
        self.reprioritize = reprioritize
        self._heap: list[tuple[float, int, FrontierEntry]] = []

    def _admit(self, entry):
        current = self._pending.get(entry.target)
        if current is not None:
            if not self.reprioritize or entry.score <= current.score:
                return
            entry = FrontierEntry(current.target, entry.score, current.depth, current.seq, current.inherited)
        self._pending[entry.target] = entry
        heapq.heappush(self._heap, (-entry.score, entry.seq, entry))

    def _take(self):
        return heapq.heappop(self._heap)[2] if self._heap else None


def make_frontier(kind: StrategyKind) -> Frontier:
    match StrategyKind(kind):
        case StrategyKind.BFS:
            return FifoFrontier()
        case StrategyKind.DFS:
            return LifoFrontier()
        case StrategyKind.PRIORITY:
            return BestFirstFrontier(reprioritize=True)
        case _:
            return BestFirstFrontier()


def frontier_push(frontier: Frontier, entries: Iterable[FrontierEntry]) -> None:
    frontier.push(entries)


def frontier_pop(frontier: Frontier) -> FrontierEntry | None:
    return frontier.pop()


def shark_score(
    parent_sim: float, parent_inherited: float, anchor_sim: float, context_sim: float, params: SharkParams
) -> tuple[float, float]:
    """Potential score of a child link and the inherited score it carries.

    Relevance decays by `delta` along the descendant chain; `beta` weighs anchor text against the
    surrounding context, and `gamma` weighs the inherited score against that neighbourhood score.
    """
    child_inherited = params.delta * (parent_sim if parent_sim > 0 else parent_inherited)
    context_component = 1.0 if anchor_sim > 0 else context_sim
    neighborhood = params.beta * anchor_sim + (1 - params.beta) * context_component
    potential = params.gamma * child_inherited + (1 - params.gamma) * neighborhood
    return potential, child_inherited


def priority_score(parent_sim: float, anchor_sim: float, weights: PriorityWeights | None = None) -> float:
    weights = weights or PriorityWeights()
    return weights.parent * parent_sim + weights.anchor * anchor_sim


def nb_link_admit(parent_posterior: float, threshold: float) -> tuple[bool, float]:
    return parent_posterior >= threshold, parent_posterior
