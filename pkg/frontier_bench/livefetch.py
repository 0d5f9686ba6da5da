"""Polite HTTP client for building snapshots from live sites. Benchmarks never touch the network."""

import math
import re
import threading
import time
from collections.abc import Callable
from dataclasses import dataclass
from urllib.parse import urlsplit

import requests
from hatchling.bridge.app import Application

from frontier_bench.config import FetchPolicy


class FetchError(RuntimeError):
    pass


class FetchTimeoutError(FetchError):
    pass


@dataclass(frozen=True)
class FetchResult:
    status: int
    body: bytes
    elapsed_ms: int


def _origin(url: str) -> str:
    parts = urlsplit(url)
    return f"{parts.scheme}://{parts.netloc}"


_STAR_RUN = re.compile(r"\*+")


def _wildcard_match(pattern: str, text: str) -> bool:
    """Match `text` in full against `pattern`, where ``*`` is any run of characters.

    Backtracks only to the most recent ``*``, so the cost stays O(len(pattern) * len(text)).
    """
    p = t = 0
    star = resume = -1
    while t < len(text):
        if p < len(pattern) and pattern[p] == "*":
            star, resume = p, t
            p += 1
        elif p < len(pattern) and pattern[p] == text[t]:
            p += 1
            t += 1
        elif star >= 0:
            p = star + 1
            resume += 1
            t = resume
        else:
            return False
    return pattern[p:].strip("*") == ""


@dataclass(frozen=True)
class _Rule:
    allow: bool
    pattern: str

    def matches(self, path: str) -> bool:
        anchored = self.pattern.endswith("$")
        body = _STAR_RUN.sub("*", self.pattern[:-1] if anchored else self.pattern)
        # Without "$" a pattern matches any path it is a prefix of.
        return _wildcard_match(body if anchored else body + "*", path)


def _parse_robots(robots_body: bytes) -> list[tuple[list[str], list[_Rule]]]:
    groups: list[tuple[list[str], list[_Rule]]] = []
    agents: list[str] = []
    rules: list[_Rule] = []
    in_rules = False
    for raw in robots_body.decode("utf-8", errors="replace").splitlines():
        line = raw.split("#", 1)[0].strip()
        if ":" not in line:
            continue
        key, value = (part.strip() for part in line.split(":", 1))
        key = key.lower()
        if key == "user-agent":
            if in_rules:
                groups.append((agents, rules))
                agents, rules, in_rules = [], [], False
            agents.append(value.lower())
        elif key in ("allow", "disallow"):
            if not agents:
                continue
            in_rules = True
            # An empty Disallow allows everything, so it contributes no rule.
            if value:
                rules.append(_Rule(allow=key == "allow", pattern=value))
    if agents:
        groups.append((agents, rules))
    return groups


def robots_allowed(url: str, robots_body: bytes, user_agent: str) -> bool:
    """Evaluate robots exclusion rules for `url`: most specific (longest) match wins, Allow wins ties."""
    groups = _parse_robots(robots_body)
    # Groups are selected by the product token, compared whole and case-insensitively.
    product = user_agent.split("/", 1)[0].strip().lower()
    specific = [rules for agents, rules in groups if product in agents]
    applicable = specific or [rules for agents, rules in groups if "*" in agents]
    if not applicable:
        return True

    parts = urlsplit(url)
    path = (parts.path or "/") + (f"?{parts.query}" if parts.query else "")
    best: _Rule | None = None
    for rules in applicable:
        for rule in rules:
            if not rule.matches(path):
                continue
            if (
                best is None
                or len(rule.pattern) > len(best.pattern)
                or (len(rule.pattern) == len(best.pattern) and rule.allow)
            ):
                best = rule
    return best is None or best.allow


class LiveFetcher:
    def __init__(
        self,
        policy: FetchPolicy | None = None,
        session: requests.Session | None = None,
        app: Application | None = None,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.policy = policy or FetchPolicy()
        self.session = session or requests.Session()
        self.session.headers["User-Agent"] = self.policy.user_agent
        self.app = app
        self._clock = clock
        self._sleep = sleep
        self._host_locks: dict[str, threading.Lock] = {}
        self._last_request: dict[str, float] = {}
        self._robots: dict[str, bytes | None] = {}
        self._lock = threading.Lock()

    def _host_lock(self, host: str) -> threading.Lock:
        with self._lock:
            return self._host_locks.setdefault(host, threading.Lock())

    def _get(self, url: str) -> FetchResult:
        host = urlsplit(url).netloc
        with self._host_lock(host):
            last = self._last_request.get(host)
            if last is not None:
                wait = last + self.policy.per_host_delay_ms / 1000 - self._clock()
                if wait > 0:
                    self._sleep(wait)
            self._last_request[host] = self._clock()
            start = time.perf_counter()
            response = self.session.get(url, timeout=self.policy.timeout_ms / 1000)
            elapsed = time.perf_counter() - start
        return FetchResult(
            status=response.status_code, body=response.content, elapsed_ms=max(1, math.ceil(elapsed * 1000))
        )

    def fetch(self, url: str) -> FetchResult:
        if urlsplit(url).scheme not in ("http", "https"):
            raise FetchError(f"not an http(s) URL: {url}")
        attempts = self.policy.max_retries + 1
        for attempt in range(1, attempts + 1):
            try:
                return self._get(url)
            except requests.Timeout as e:
                error: FetchError = FetchTimeoutError(f"timed out after {self.policy.timeout_ms} ms: {url}")
                cause: Exception = e
            except requests.ConnectionError as e:
                error, cause = FetchError(f"connection failed: {url}: {e}"), e
            except requests.RequestException as e:
                raise FetchError(f"request failed: {url}: {e}") from e
            if self.app:
                self.app.display_debug(f"Attempt {attempt}/{attempts} failed for {url}")
        raise error from cause

    def robots_body(self, url: str) -> bytes | None:
        """The host's robots.txt, b"" when it has none, or None when the host must be treated as disallowed."""
        origin = _origin(url)
        if origin not in self._robots:
            try:
                result = self.fetch(f"{origin}/robots.txt")
            except FetchError:
                body = None
            else:
                if result.status == 200:
                    body = result.body
                elif 400 <= result.status < 500:
                    body = b""
                else:
                    body = None
            self._robots[origin] = body
        return self._robots[origin]

    def allowed(self, url: str) -> bool:
        if not self.policy.obey_robots:
            return True
        body = self.robots_body(url)
        if body is None:
            return False
        return robots_allowed(url, body, self.policy.user_agent)
