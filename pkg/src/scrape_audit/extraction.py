"""HTML to text conversion in three representations, plus wall detection.

The three representations are the full HTML document, the raw visible text,
and a cleaned text that keeps only the main content block. Cleaning uses an
inspectable density heuristic rather than an opaque third-party extractor:
paragraph-ish text counts for a candidate root, anchor text counts twice
against it.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from html.parser import HTMLParser
from importlib.resources import files
from pathlib import Path

REPRESENTATIONS = ("html_full", "raw_text", "cleaned_text")

RESTRICTED_KINDS = ("js_required", "paywall", "login", "cookie_wall", "captcha")

_VOID = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}
_DROP = {"script", "style", "noscript", "template"}
_BOILERPLATE_TAGS = {"nav", "header", "footer", "aside", "form"}
_BOILERPLATE_ROLES = {"navigation", "banner", "contentinfo"}
_BLOCK = {
    "address", "article", "aside", "blockquote", "body", "br", "caption",
    "dd", "div", "dl", "dt", "fieldset", "figcaption", "figure", "footer",
    "form", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "html",
    "li", "main", "nav", "ol", "p", "pre", "section", "table", "tbody",
    "td", "tfoot", "th", "thead", "tr", "ul",
}
_PARAGRAPHISH = {"p", "li", "h1", "h2", "h3", "h4", "h5", "h6"}
_CANDIDATE_TAGS = {
    "article", "blockquote", "div", "figure", "main", "ol", "p", "section",
    "table", "td", "ul", "li", "h1", "h2", "h3", "h4", "h5", "h6",
}


class _Node:
    __slots__ = ("tag", "attrs", "children")

    def __init__(self, tag: str, attrs: dict[str, str]):
        self.tag = tag
        self.attrs = attrs
        self.children: list = []  # _Node or str


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = _Node("#document", {})
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        node = _Node(tag, {k: (v or "") for k, v in reversed(attrs)})
        self.stack[-1].children.append(node)
        if tag not in _VOID:
            self.stack.append(node)

    def handle_startendtag(self, tag, attrs):
        self.stack[-1].children.append(_Node(tag, {k: (v or "") for k, v in reversed(attrs)}))

    def handle_endtag(self, tag):
        for i in range(len(self.stack) - 1, 0, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return
        # stray end tag: ignore

    def handle_data(self, data):
        if data:
            self.stack[-1].children.append(data)


def _decode(html: str | bytes) -> str:
    if isinstance(html, bytes):
        return html.decode("utf-8", errors="replace")
    return html


def parse_html(html: str | bytes) -> _Node:
    builder = _TreeBuilder()
    builder.feed(_decode(html))
    builder.close()
    return builder.root


def _roles(node: _Node) -> set[str]:
    return set(node.attrs.get("role", "").lower().split())


def _collect(node: _Node, out: list[str], drop: set[str], drop_roles: bool):
    for child in node.children:
        if isinstance(child, str):
            out.append(child)
            continue
        if child.tag in drop:
            continue
        if drop_roles and _roles(child) & _BOILERPLATE_ROLES:
            continue
        block = child.tag in _BLOCK
        if block:
            out.append(" ")
        _collect(child, out, drop, drop_roles)
        if block:
            out.append(" ")


def _text_of(node: _Node, drop: set[str], drop_roles: bool = False) -> str:
    out: list[str] = []
    _collect(node, out, drop, drop_roles)
    return " ".join("".join(out).split())


def raw_text(html: str | bytes) -> str:
    """Visible text in document order, whitespace collapsed."""
    if not html:
        return ""
    return _text_of(parse_html(html), _DROP)


def _score(node: _Node) -> int:
    """Paragraph-ish text length minus twice the anchor text length."""
    total = 0

    def walk(current: _Node, in_para: bool, in_anchor: bool):
        nonlocal total
        for child in current.children:
            if isinstance(child, str):
                length = len(" ".join(child.split()))
                if in_para:
                    total += length
                if in_anchor:
                    total -= 2 * length
                continue
            if child.tag in _DROP:
                continue
            walk(
                child,
                in_para or child.tag in _PARAGRAPHISH,
                in_anchor or child.tag == "a",
            )

    walk(node, node.tag in _PARAGRAPHISH, node.tag == "a")
    return total


def _strip_boilerplate(node: _Node) -> _Node:
    clean = _Node(node.tag, node.attrs)
    for child in node.children:
        if isinstance(child, str):
            clean.children.append(child)
            continue
        if child.tag in _DROP or child.tag in _BOILERPLATE_TAGS:
            continue
        if _roles(child) & _BOILERPLATE_ROLES:
            continue
        clean.children.append(_strip_boilerplate(child))
    return clean


def _walk_nodes(node: _Node):
    for child in node.children:
        if isinstance(child, _Node):
            yield child
            yield from _walk_nodes(child)


def cleaned_text(html: str | bytes) -> str:
    """Main-content text: boilerplate containers removed, one root selected."""
    if not html:
        return ""
    stripped = _strip_boilerplate(parse_html(html))
    nodes = list(_walk_nodes(stripped))
    for node in nodes:
        if node.tag == "article":
            return _text_of(node, _DROP)
    for node in nodes:
        if node.tag == "main" or "main" in _roles(node):
            return _text_of(node, _DROP)
    best: _Node | None = None
    best_score = 0
    for node in nodes:
        if node.tag not in _CANDIDATE_TAGS:
            continue
        score = _score(node)
        if score > best_score:  # ties keep the earlier node
            best, best_score = node, score
    if best is None:
        return _text_of(stripped, _DROP)
    return _text_of(best, _DROP)


def extract(html: str | bytes | None, representation: str) -> str:
    """Dispatch to one of the three representations; empty input → ''."""
    if representation not in REPRESENTATIONS:
        raise ValueError(
            f"representation must be one of {REPRESENTATIONS}, got {representation!r}"
        )
    if not html:
        return ""
    if representation == "html_full":
        return _decode(html)
    if representation == "raw_text":
        return raw_text(html)
    return cleaned_text(html)


@dataclass(frozen=True)
class RestrictedFlag:
    kind: str  # one of RESTRICTED_KINDS or "none"
    matched_terms: tuple[str, ...]
    short_content: bool


_DEFAULT_TERMS: dict[str, list[str]] | None = None


def default_restricted_terms() -> dict[str, list[str]]:
    global _DEFAULT_TERMS
    if _DEFAULT_TERMS is None:
        raw = json.loads(
            files("scrape_audit.data")
            .joinpath("restricted_terms.json")
            .read_text(encoding="utf-8")
        )
        _DEFAULT_TERMS = {kind: list(raw.get(kind, [])) for kind in RESTRICTED_KINDS}
    return _DEFAULT_TERMS


def load_restricted_terms(source: str | Path) -> dict[str, list[str]]:
    raw = json.loads(Path(source).read_text(encoding="utf-8"))
    return {kind: list(raw.get(kind, [])) for kind in RESTRICTED_KINDS}


def _term_matches(term: str, text: str) -> bool:
    # short alphanumeric terms ("js", "abo") only count as whole tokens
    if len(term) <= 3 and term.isalnum():
        return re.search(rf"\b{re.escape(term)}\b", text) is not None
    return term in text


def detect_restricted(
    cleaned: str,
    raw: str,
    terms: dict[str, list[str]] | None = None,
    short_limit: int = 500,
) -> RestrictedFlag:
    """Classify access walls by vocabulary, in fixed priority order.

    Priority runs js_required > paywall > login > cookie_wall > captcha; the
    first kind with any matching term wins and only its matches are reported.
    """
    if terms is None:
        terms = default_restricted_terms()
    haystack = f"{cleaned}\n{raw}".lower()
    short = len(cleaned) < short_limit
    for kind in RESTRICTED_KINDS:
        matched = tuple(
            term for term in terms.get(kind, []) if _term_matches(term.lower(), haystack)
        )
        if matched:
            return RestrictedFlag(kind=kind, matched_terms=matched, short_content=short)
    return RestrictedFlag(kind="none", matched_terms=(), short_content=short)


class ExtractionCache:
    """Memoizes extract() results keyed by (content hash, representation).

    With a directory the cache persists as text files; without one it is a
    per-process dictionary.
    """

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)
        self._memory: dict[tuple[str, str], str] = {}

    def text(self, html: str | bytes | None, representation: str) -> str:
        if not html:
            return ""
        data = html.encode("utf-8") if isinstance(html, str) else html
        key = (hashlib.sha256(data).hexdigest(), representation)
        if key in self._memory:
            return self._memory[key]
        if self.root is not None:
            path = self.root / f"{key[0]}.{representation}.txt"
            if path.is_file():
                value = path.read_text(encoding="utf-8")
                self._memory[key] = value
                return value
        value = extract(html, representation)
        self._memory[key] = value
        if self.root is not None:
            (self.root / f"{key[0]}.{representation}.txt").write_text(
                value, encoding="utf-8"
            )
        return value
