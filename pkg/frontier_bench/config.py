import os
from enum import StrEnum
from typing import Annotated

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, model_validator

from frontier_bench import __version__

DEFAULT_USER_AGENT = f"frontier-bench/{__version__}"
USER_AGENT_ENV = "FRONTIER_BENCH_UA"


def validate_and_split(value: str | list[str]) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(i) for i in value]
    if not isinstance(value, str):
        raise ValueError("Must be a string or list of strings")
    if not value.strip():
        raise ValueError("Cannot be empty")
    return [item.strip() for item in value.split(",")]


def validate_and_split_words(value: str | list[str]) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(i) for i in value]
    if not isinstance(value, str):
        raise ValueError("Must be a string or list of strings")
    if not value.strip():
        raise ValueError("Cannot be empty")
    return value.split()


def default_user_agent() -> str:
    return os.environ.get(USER_AGENT_ENV) or DEFAULT_USER_AGENT


class StrategyKind(StrEnum):
    BFS = "bfs"
    DFS = "dfs"
    SHARK = "shark"
    PRIORITY = "priority"
    NB = "nb"


class LinkScope(StrEnum):
    ANY = "any"
    SAME_HOST = "same_host"
    WIKI_ARTICLES = "wiki_articles"


type StrategyList = Annotated[list[StrategyKind], BeforeValidator(validate_and_split)]
type Terms = Annotated[list[str], BeforeValidator(validate_and_split_words)]


class _Config(BaseModel):
    model_config = ConfigDict(
        extra="forbid",
        alias_generator=lambda x: x.replace("_", "-"),
        populate_by_name=True,
        frozen=True,
    )


class SharkParams(_Config):
    delta: float = Field(0.5, gt=0, lt=1)
    gamma: float = Field(0.5, ge=0, le=1)
    beta: float = Field(0.8, ge=0, le=1)


class PriorityWeights(_Config):
    parent: float = Field(0.5, ge=0, le=1)
    anchor: float = Field(0.5, ge=0, le=1)

    @model_validator(mode="after")
    def _convex(self):
        if self.parent + self.anchor > 1:
            raise ValueError("priority weights must sum to at most 1")
        return self


class CrawlConfig(_Config):
    strategy: StrategyKind = StrategyKind.BFS
    max_pages: int = Field(1000, ge=1)
    time_budget_ms: int = Field(3_600_000, ge=0)
    max_depth: int = Field(3, ge=0)
    shark: SharkParams = SharkParams()
    priority: PriorityWeights = PriorityWeights()
    nb_threshold: float = Field(0.5, ge=0, le=1)
    nb_alpha: float = Field(1.0, gt=0)
    context_window: int = Field(8, ge=0)
    miss_penalty_ms: int = Field(0, ge=0)
    link_scope: LinkScope = LinkScope.ANY
    # Overrides the snapshot's topic query when set.
    query: Terms | None = None


class FetchPolicy(_Config):
    user_agent: str = Field(default_factory=default_user_agent, min_length=1)
    per_host_delay_ms: int = Field(1000, ge=0)
    timeout_ms: int = Field(10_000, gt=0)
    max_retries: int = Field(2, ge=0)
    obey_robots: bool = True


class SynthParams(_Config):
    rng_seed: int = 0
    n_pages: int = Field(1000, ge=1)
    relevant_fraction: float = Field(0.2, ge=0, le=1)
    intra_cluster_link_prob: float = Field(0.05, ge=0, le=1)
    cross_link_prob: float = Field(0.002, ge=0, le=1)
    latency_ms: int = Field(3600, ge=0)
    topic_terms: Terms = ["shark", "search", "crawler", "relevance"]
    background_degree: int = Field(8, ge=0)
    seed_fanout: int = Field(20, ge=0)
