"""HTML analysis: page tokens, outlink candidates with anchor context, URL resolution and content checksums."""

import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from urllib.parse import quote, urljoin, urlsplit, urlunsplit

from bs4 import BeautifulSoup
from bs4.element import NavigableString, PreformattedString, Tag

from frontier_bench._stopwords import STOP_WORDS
from frontier_bench._util import digest64
from frontier_bench.config import LinkScope

_ALPHA = re.compile(r"[A-Za-z]+")
_HIDDEN_TAGS = frozenset({"script", "style", "template"})
# Elements that end a word; inline markup such as <b>, <span> or <a> does not.
_BLOCK_TAGS = frozenset(
    {
        "address", "article", "aside", "blockquote", "body", "br", "caption", "dd", "details", "div", "dl", "dt",
        "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6", "head",
        "header", "hr", "html", "img", "input", "li", "main", "nav", "ol", "option", "p", "pre", "section",
        "select", "summary", "table", "tbody", "td", "textarea", "tfoot", "th", "thead", "title", "tr", "ul",
    }
)
# RFC 3986 characters left as they are; everything else in paths and queries is percent-encoded.
_PATH_SAFE = "/%:@!$&'()*+,;=-._~"
_QUERY_SAFE = _PATH_SAFE + "?"
_DEFAULT_PORTS = {"http": 80, "https": 443}

DEFAULT_CONTEXT_WINDOW = 8


@dataclass(frozen=True, slots=True)
class LinkCandidate:
    target: str
    anchor_text: tuple[str, ...]
    context: tuple[str, ...]
    source: str
    depth: int


@dataclass(frozen=True, slots=True)
class Document:
    url: str
    tokens: tuple[str, ...]
    checksum: int


def normalize_url(url: str) -> str | None:
    try:
        parts = urlsplit(url.strip())
        port = parts.port
    except ValueError:
        return None
    scheme = parts.scheme.lower()
    if scheme not in _DEFAULT_PORTS or not parts.hostname:
        return None
    host = parts.hostname.lower()
    if ":" in host:
        host = f"[{host}]"
    if port is not None and port != _DEFAULT_PORTS[scheme]:
        host = f"{host}:{port}"
    if parts.username is not None:
        userinfo = parts.username + (f":{parts.password}" if parts.password is not None else "")
        host = f"{userinfo}@{host}"
    path = quote(_remove_dot_segments(parts.path or "/"), safe=_PATH_SAFE)
    return urlunsplit((scheme, host, path, quote(parts.query, safe=_QUERY_SAFE), ""))


def _remove_dot_segments(path: str) -> str:
    segments = path.split("/")
    kept: list[str] = []
    for segment in segments[1:]:
        if segment == "..":
            if kept:
                kept.pop()
        elif segment != ".":
            kept.append(segment)
    result = "/" + "/".join(kept)
    if segments[-1] in (".", "..") and not result.endswith("/"):
        result += "/"
    return result


def resolve_url(base: str, href: str) -> str | None:
    """Resolve an anchor's href against the page URL.

    Absolute http(s) references pass through; references starting with ``/`` resolve against the base's
    scheme and authority. Everything else (fragments, ``mailto:``, ``javascript:``, path-relative
    references) is not followed.
    """
    href = href.strip()
    if href.lower().startswith(("http://", "https://")):
        return normalize_url(href)
    if href.startswith("/"):
        return normalize_url(urljoin(base, href))
    return None


def tokenize(text: str) -> list[str]:
    return [token for token in (m.lower() for m in _ALPHA.findall(text)) if token not in STOP_WORDS]


def content_checksum(html: bytes) -> int:
    return digest64(html)


def _soup(html: bytes) -> BeautifulSoup:
    return BeautifulSoup(html.decode("utf-8", errors="replace"), "html.parser")


def _flatten(soup: BeautifulSoup) -> tuple[str, list[tuple[Tag, int, int]]]:
    """Page text with markup stripped, and the character span of every anchor in it.

    Block-level elements contribute a space; inline elements join their text with the surrounding words.
    """
    pieces: list[str] = []
    length = 0
    anchors: list[list] = []
    # (node, None) opens a node; (tag, slot) closes a tag, slot being its anchor index or -1.
    stack: list[tuple[object, int | None]] = [(soup, None)]
    while stack:
        node, slot = stack.pop()
        if isinstance(node, Tag):
            if slot is None and node.name in _HIDDEN_TAGS:
                continue
            if node.name in _BLOCK_TAGS:
                pieces.append(" ")
                length += 1
            if slot is not None:
                if slot >= 0:
                    anchors[slot][2] = length
                continue
            close = -1
            if node.name == "a":
                close = len(anchors)
                anchors.append([node, length, length])
            stack.append((node, close))
            stack.extend((child, None) for child in reversed(node.contents))
        elif isinstance(node, NavigableString) and not isinstance(node, PreformattedString):
            text = str(node)
            pieces.append(text)
            length += len(text)
    return "".join(pieces), [(anchor, start, end) for anchor, start, end in anchors]


def _walk(soup: BeautifulSoup) -> tuple[list[str], list[tuple[Tag, int, int]]]:
    text, char_spans = _flatten(soup)
    tokens: list[str] = []
    starts: list[int] = []
    ends: list[int] = []
    for match in _ALPHA.finditer(text):
        token = match.group().lower()
        if token not in STOP_WORDS:
            tokens.append(token)
            starts.append(match.start())
            ends.append(match.end())
    spans = []
    for anchor, char_start, char_end in char_spans:
        # A word partly inside the anchor belongs to its text.
        first = bisect_right(ends, char_start)
        last = max(first, bisect_left(starts, char_end))
        spans.append((anchor, first, last))
    return tokens, spans


def in_scope(link: LinkCandidate, scope: LinkScope) -> bool:
    if scope == LinkScope.ANY:
        return True
    target = urlsplit(link.target)
    if scope == LinkScope.SAME_HOST:
        return target.netloc == urlsplit(link.source).netloc
    return target.path.startswith("/wiki/") and ":" not in target.path


def parse_page(
    html: bytes, base: str, context_window: int = DEFAULT_CONTEXT_WINDOW, depth: int = 1
) -> tuple[Document, list[LinkCandidate]]:
    tokens, spans = _walk(_soup(html))
    links = []
    for anchor, start, end in spans:
        href = anchor.get("href")
        if not isinstance(href, str):
            continue
        target = resolve_url(base, href)
        if target is None:
            continue
        before = tokens[max(0, start - context_window) : start] if context_window else []
        links.append(
            LinkCandidate(
                target=target,
                anchor_text=tuple(tokens[start:end]),
                context=tuple(before) + tuple(tokens[end : end + context_window]),
                source=base,
                depth=depth,
            )
        )
    return Document(url=base, tokens=tuple(tokens), checksum=content_checksum(html)), links


def parse_links(html: bytes, base: str, context_window: int = DEFAULT_CONTEXT_WINDOW) -> list[LinkCandidate]:
    return parse_page(html, base, context_window)[1]


def normalize_text(html: bytes) -> list[str]:
    return _walk(_soup(html))[0]
