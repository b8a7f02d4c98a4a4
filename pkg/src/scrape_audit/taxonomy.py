"""URL-level news article identification and categorization.

All decisions here are pure functions over an immutable rule set: domain
matching against an outlet list, homepage and leaf-page shape heuristics,
keyword exclusions, path-based categories, and the precision/recall
evaluation of the whole identifier against a labeled corpus.
"""

from __future__ import annotations

import csv
import json
import logging
import re
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import IO, Iterable
from urllib.parse import urlsplit

log = logging.getLogger(__name__)

OUTLET_TYPES = frozenset(
    {
        "commercial_broadcasting",
        "digital_born",
        "hyperpartisan",
        "legacy_press",
        "public_broadcasting",
        "tabloid",
        "portal_news",
    }
)

_EXT_RE = re.compile(r"\.[A-Za-z][A-Za-z0-9]{0,5}$")


def _data_text(name: str) -> str:
    return files("scrape_audit.data").joinpath(name).read_text(encoding="utf-8")


@dataclass(frozen=True)
class UrlRules:
    exclusion_keywords: dict[str, str] = field(default_factory=dict)
    category_keywords: dict[str, str] = field(default_factory=dict)
    homepage_keywords: tuple[str, ...] = ("index", "home")
    min_digit_run: int = 5
    min_slug_tokens: int = 2

    def __post_init__(self):
        for kw in list(self.exclusion_keywords) + list(self.category_keywords) + list(
            self.homepage_keywords
        ):
            if not kw or kw != kw.lower():
                raise ValueError(f"rule keywords must be lowercase and non-empty: {kw!r}")
        if self.min_digit_run < 1 or self.min_slug_tokens < 1:
            raise ValueError("min_digit_run and min_slug_tokens must be >= 1")

    @property
    def categories(self) -> frozenset[str]:
        return frozenset(self.category_keywords.values())

    @classmethod
    def from_dict(cls, obj: dict) -> "UrlRules":
        return cls(
            exclusion_keywords=dict(obj.get("exclusion_keywords", {})),
            category_keywords=dict(obj.get("category_keywords", {})),
            homepage_keywords=tuple(obj.get("homepage_keywords", ("index", "home"))),
            min_digit_run=int(obj.get("min_digit_run", 5)),
            min_slug_tokens=int(obj.get("min_slug_tokens", 2)),
        )

    @classmethod
    def load(cls, source: str | Path) -> "UrlRules":
        return cls.from_dict(json.loads(Path(source).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class ArticleDecision:
    is_article: bool
    reasons: tuple[str, ...]


@dataclass(frozen=True)
class EvalReport:
    precision: float
    recall: float
    f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    confusion: dict[str, int]


def default_rules() -> UrlRules:
    return UrlRules.from_dict(json.loads(_data_text("url_rules.json")))


def load_domain_list(source: str | Path | IO[str]) -> dict[str, str]:
    """Read a domain,outlet_type CSV into a validated mapping."""
    own = isinstance(source, (str, Path))
    fh = open(source, encoding="utf-8", newline="") if own else source
    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["domain", "outlet_type"]:
            raise ValueError(
                f"domain list must have header 'domain,outlet_type', got {reader.fieldnames}"
            )
        entries: dict[str, str] = {}
        for row in reader:
            domain = row["domain"].strip()
            outlet = row["outlet_type"].strip()
            if domain != domain.lower() or "/" in domain or "://" in domain:
                raise ValueError(f"domain must be lowercase with no scheme/path: {domain!r}")
            if domain in entries:
                raise ValueError(f"duplicate domain: {domain}")
            if outlet not in OUTLET_TYPES:
                raise ValueError(f"unknown outlet_type {outlet!r} for {domain}")
            entries[domain] = outlet
        return entries
    finally:
        if own:
            fh.close()


def default_domain_list() -> dict[str, str]:
    import io

    return load_domain_list(io.StringIO(_data_text("news_domains.csv")))


_SUFFIXES: frozenset[str] | None = None


def _suffixes() -> frozenset[str]:
    global _SUFFIXES
    if _SUFFIXES is None:
        lines = _data_text("public_suffixes.txt").splitlines()
        _SUFFIXES = frozenset(
            l.strip() for l in lines if l.strip() and not l.startswith("#")
        )
    return _SUFFIXES


def host_of(url: str) -> str | None:
    """Lowercased host with port and leading www. removed; None if unparseable."""
    try:
        parts = urlsplit(url)
    except ValueError:
        log.debug("unparseable url: %r", url)
        return None
    host = parts.hostname
    if not host:
        log.debug("url without host: %r", url)
        return None
    if host.startswith("www."):
        host = host[4:]
    return host or None


def registrable_domain(host: str) -> str:
    """eTLD+1 under the bundled suffix snapshot; last two labels otherwise."""
    labels = host.lower().strip(".").split(".")
    if len(labels) <= 1:
        return host.lower()
    suffixes = _suffixes()
    for i in range(len(labels)):
        if ".".join(labels[i:]) in suffixes:
            if i == 0:
                return host.lower()  # the host itself is a public suffix
            return ".".join(labels[i - 1 :])
    return ".".join(labels[-2:])


def match_news_domain(url: str, domain_list: dict[str, str]) -> str | None:
    """Outlet type for the URL's host, or None when no entry covers it.

    An entry matches its own host exactly and any host for which it is a
    suffix at a label boundary.
    """
    host = host_of(url)
    if host is None:
        return None
    labels = host.split(".")
    for i in range(len(labels)):
        outlet = domain_list.get(".".join(labels[i:]))
        if outlet is not None:
            return outlet
    return None


def _path_segments(url: str) -> list[str]:
    try:
        path = urlsplit(url).path
    except ValueError:
        return []
    return [seg for seg in path.split("/") if seg]


def _strip_extension(segment: str) -> str:
    return _EXT_RE.sub("", segment)


def is_homepage(url: str, rules: UrlRules) -> bool:
    segments = _path_segments(url)
    if not segments:
        return True
    if len(segments) > 1:
        return False
    return _strip_extension(segments[0]).lower() in rules.homepage_keywords


def is_leaf_page(url: str, rules: UrlRules) -> bool:
    """Article-shaped final segment: a dashed slug or a long numeric id."""
    segments = _path_segments(url)
    if not segments:
        return False
    final = _strip_extension(segments[-1])
    tokens = final.split("-")
    alpha = sum(1 for t in tokens if t.isalpha())
    if len(tokens) >= rules.min_slug_tokens and alpha >= 2:
        return True
    return re.search(rf"\d{{{rules.min_digit_run},}}", final) is not None


def exclusion_reason(url: str, rules: UrlRules) -> tuple[str, str] | None:
    """First excluded keyword along the path, as (keyword, reason)."""
    for segment in _path_segments(url):
        seg = segment.lower()
        if seg in rules.exclusion_keywords:
            return seg, rules.exclusion_keywords[seg]
        for token in _strip_extension(seg).split("-"):
            if token in rules.exclusion_keywords:
                return token, rules.exclusion_keywords[token]
    return None


def identify_article(
    url: str, domain_list: dict[str, str], rules: UrlRules
) -> ArticleDecision:
    """Gate chain: news domain, then not-homepage, then leaf, then no exclusion."""
    reasons: list[str] = []
    if match_news_domain(url, domain_list) is None:
        reasons.append("not_news_domain")
    homepage = is_homepage(url, rules)
    if homepage:
        reasons.append("homepage")
    elif not is_leaf_page(url, rules):
        reasons.append("not_leaf")
    excluded = exclusion_reason(url, rules)
    if excluded is not None:
        reasons.append(f"excluded:{excluded[0]}")
    return ArticleDecision(is_article=not reasons, reasons=tuple(reasons))


def categorize_by_path(url: str, rules: UrlRules) -> set[str]:
    """Union of categories keyed by full path segments before the final slug."""
    segments = _path_segments(url)
    cats = {
        rules.category_keywords[seg.lower()]
        for seg in segments[:-1]
        if seg.lower() in rules.category_keywords
    }
    return cats if cats else {"uncategorized"}


def evaluate_identifier(
    labeled: list[tuple[str, bool]],
    domain_list: dict[str, str],
    rules: UrlRules,
    domain_freq: dict[str, int] | None = None,
) -> EvalReport:
    """Score the identifier against gold labels, plain and frequency-weighted.

    Weighted variants give each URL weight proportional to its registrable
    domain's frequency in the tracked sample, normalized so weights sum to
    the corpus size. Missing or absent frequencies degrade to uniform.
    """
    if not labeled:
        raise ValueError("labeled corpus is empty")
    n = len(labeled)
    raw_weights: list[float] = []
    for url, _ in labeled:
        host = host_of(url)
        freq = 0.0
        if domain_freq and host is not None:
            freq = float(domain_freq.get(registrable_domain(host), 0))
        raw_weights.append(freq)
    total = sum(raw_weights)
    weights = [w * n / total for w in raw_weights] if total > 0 else [1.0] * n

    confusion = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    weighted = {"tp": 0.0, "fp": 0.0, "fn": 0.0, "tn": 0.0}
    for (url, gold), weight in zip(labeled, weights):
        predicted = identify_article(url, domain_list, rules).is_article
        if predicted and gold:
            cell = "tp"
        elif predicted and not gold:
            cell = "fp"
        elif not predicted and gold:
            cell = "fn"
        else:
            cell = "tn"
        confusion[cell] += 1
        weighted[cell] += weight

    def prf(tp: float, fp: float, fn: float) -> tuple[float, float, float]:
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        return precision, recall, f1

    p, r, f1 = prf(confusion["tp"], confusion["fp"], confusion["fn"])
    wp, wr, wf1 = prf(weighted["tp"], weighted["fp"], weighted["fn"])
    return EvalReport(
        precision=p,
        recall=r,
        f1=f1,
        weighted_precision=wp,
        weighted_recall=wr,
        weighted_f1=wf1,
        confusion=confusion,
    )


def load_labeled_corpus(source: str | Path | IO[str]) -> list[tuple[str, bool]]:
    """Read a url,is_article CSV; is_article parses true/false (any case)."""
    own = isinstance(source, (str, Path))
    fh = open(source, encoding="utf-8", newline="") if own else source
    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["url", "is_article"]:
            raise ValueError(
                f"labeled corpus must have header 'url,is_article', got {reader.fieldnames}"
            )
        out = []
        for row in reader:
            flag = row["is_article"].strip().lower()
            if flag not in ("true", "false"):
                raise ValueError(f"is_article must be true/false, got {row['is_article']!r}")
            out.append((row["url"].strip(), flag == "true"))
        return out
    finally:
        if own:
            fh.close()


def default_labeled_corpus() -> list[tuple[str, bool]]:
    import io

    return load_labeled_corpus(io.StringIO(_data_text("labeled_urls.csv")))
