"""In-situ visit log ingestion, validation, and pre-filtering.

A visit log is UTF-8 JSON Lines. Each line carries exactly the keys
visit_id, participant_id, url, html_path or html (one of the two),
visit_start_ms, visit_end_ms. Inline HTML is moved into a blob store on
ingest so records always reference blobs by relative path.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable
from urllib.parse import urlsplit

from scrape_audit.blobs import BlobStore, MemoryBlobStore

log = logging.getLogger(__name__)

_REQUIRED = ("visit_id", "participant_id", "url", "visit_start_ms", "visit_end_ms")
_ALLOWED = set(_REQUIRED) | {"html_path", "html"}
_STRING_FIELDS = ("visit_id", "participant_id", "url")
_INT_FIELDS = ("visit_start_ms", "visit_end_ms")


@dataclass(frozen=True)
class VisitRecord:
    visit_id: str
    participant_id: str
    url: str
    html_ref: str
    visit_start: int  # epoch ms
    visit_end: int  # epoch ms


@dataclass(frozen=True)
class RejectedLine:
    line: int
    reason: str


@dataclass(frozen=True)
class FilterConfig:
    refresh_window: float = 20.0  # seconds
    max_scrape_gap: float = 12.0  # hours
    launch_exclusion: float = 3.0  # days

    def __post_init__(self):
        for name in ("refresh_window", "max_scrape_gap", "launch_exclusion"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


class IngestError(Exception):
    """Raised in strict mode on the first bad line, or on fatal input problems."""


def _line_error(obj: dict) -> str | None:
    for field in _REQUIRED:
        if field not in obj:
            return f"missing field: {field}"
    has_path = "html_path" in obj
    has_inline = "html" in obj
    if has_path and has_inline:
        return "conflicting fields: html_path and html"
    if not has_path and not has_inline:
        return "missing field: html_path or html"
    for field in sorted(obj):
        if field not in _ALLOWED:
            return f"unexpected field: {field}"
    for field in _STRING_FIELDS:
        if not isinstance(obj[field], str):
            return f"invalid type: {field}"
    if has_path and not isinstance(obj["html_path"], str):
        return "invalid type: html_path"
    if has_inline and not isinstance(obj["html"], str):
        return "invalid type: html"
    for field in _INT_FIELDS:
        if not isinstance(obj[field], int) or isinstance(obj[field], bool):
            return f"invalid type: {field}"
    parts = urlsplit(obj["url"])
    if parts.scheme not in ("http", "https") or not parts.netloc:
        return f"invalid url: {obj['url']}"
    if obj["visit_end_ms"] < obj["visit_start_ms"]:
        return "visit_end_ms before visit_start_ms"
    return None


def ingest_visit_log(
    source: str | Path | IO[str] | Iterable[str],
    strict: bool = False,
    store: BlobStore | MemoryBlobStore | None = None,
) -> tuple[list[VisitRecord], list[RejectedLine]]:
    """Parse a visit log into records plus a rejection list.

    ``store`` receives inline HTML payloads and is where html_path references
    are expected to resolve. When omitted it defaults to a file store rooted
    beside a path source, or an in-memory store for stream sources.
    """
    if isinstance(source, (str, Path)):
        path = Path(source)
        if store is None:
            store = BlobStore(path.parent)
        try:
            lines: Iterable[str] = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise IngestError(f"cannot read visit log: {exc}") from exc
    else:
        if store is None:
            store = MemoryBlobStore()
        lines = source

    records: list[VisitRecord] = []
    rejections: list[RejectedLine] = []
    seen: set[str] = set()

    def reject(lineno: int, reason: str):
        if strict:
            raise IngestError(f"line {lineno}: {reason}")
        rejections.append(RejectedLine(line=lineno, reason=reason))

    for lineno, raw in enumerate(lines, start=1):
        raw = raw.rstrip("\n")
        if not raw.strip():
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError:
            reject(lineno, "invalid json")
            continue
        if not isinstance(obj, dict):
            reject(lineno, "not an object")
            continue
        reason = _line_error(obj)
        if reason is not None:
            reject(lineno, reason)
            continue
        if obj["visit_id"] in seen:
            reject(lineno, f"duplicate visit_id: {obj['visit_id']}")
            continue
        seen.add(obj["visit_id"])
        if "html" in obj:
            ref = store.put(obj["html"].encode("utf-8"))
        else:
            ref = obj["html_path"]
        records.append(
            VisitRecord(
                visit_id=obj["visit_id"],
                participant_id=obj["participant_id"],
                url=obj["url"],
                html_ref=ref,
                visit_start=obj["visit_start_ms"],
                visit_end=obj["visit_end_ms"],
            )
        )
    if rejections:
        log.info("ingest: %d records, %d rejected lines", len(records), len(rejections))
    return records, rejections


def serialize_visit_log(records: Iterable[VisitRecord], sink: str | Path | IO[str]):
    """Write records back out in the canonical line format."""
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for rec in records:
            obj = {
                "visit_id": rec.visit_id,
                "participant_id": rec.participant_id,
                "url": rec.url,
                "html_path": rec.html_ref,
                "visit_start_ms": rec.visit_start,
                "visit_end_ms": rec.visit_end,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    finally:
        if own:
            fh.close()


def write_rejections(rejections: Iterable[RejectedLine], sink: str | Path | IO[str]):
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8") if own else sink
    try:
        for rej in rejections:
            fh.write(json.dumps({"line": rej.line, "reason": rej.reason}) + "\n")
    finally:
        if own:
            fh.close()


def dedup_refreshes(visits: list[VisitRecord], window: float) -> list[VisitRecord]:
    """Collapse refresh bursts, keeping the last visit of each chain.

    Within one (participant_id, url) group, visits whose consecutive start
    gaps are <= window seconds form a chain and only the chain's latest
    visit survives.
    """
    window_ms = window * 1000.0
    groups: dict[tuple[str, str], list[VisitRecord]] = {}
    for visit in visits:
        groups.setdefault((visit.participant_id, visit.url), []).append(visit)
    survivors: list[VisitRecord] = []
    for group in groups.values():
        group.sort(key=lambda v: v.visit_start)
        for prev, nxt in zip(group, group[1:]):
            if nxt.visit_start - prev.visit_start > window_ms:
                survivors.append(prev)  # chain ends at prev
        if group:
            survivors.append(group[-1])
    survivors.sort(key=lambda v: (v.visit_start, v.visit_id))
    return survivors


def tune_refresh_threshold(
    visits: list[VisitRecord],
    distances_by_visit: dict[str, float],
    candidates: list[float],
) -> tuple[float, dict[float, float]]:
    """Sweep candidate dedup windows and pick the one minimizing mean distance.

    Ties go to the smaller threshold. The full candidate -> mean table is
    returned for reporting.
    """
    if not candidates:
        raise ValueError("candidate list must not be empty")
    table: dict[float, float] = {}
    for window in candidates:
        survivors = dedup_refreshes(visits, window)
        missing = [v.visit_id for v in survivors if v.visit_id not in distances_by_visit]
        if missing:
            raise ValueError(f"no distance recorded for visits: {missing[:5]}")
        if survivors:
            mean = sum(distances_by_visit[v.visit_id] for v in survivors) / len(survivors)
        else:
            mean = 0.0
        table[window] = mean
    chosen = min(table, key=lambda w: (table[w], w))
    return chosen, table


def filter_scrape_gap(pairs: list[tuple], max_gap: float = 12.0) -> list[tuple]:
    """Drop 0-delay pairs whose fetch time strayed too far from the visit.

    ``pairs`` holds (VisitRecord, ScrapeResult) tuples; the scrape side must
    carry fetch_time (epoch ms) and delay_days. Only the 0-day cohort is
    subject to the gap rule; a gap of exactly max_gap hours is retained.
    """
    max_gap_ms = max_gap * 3600.0 * 1000.0
    kept = []
    removed = 0
    for visit, scrape in pairs:
        if scrape.delay_days == 0 and abs(scrape.fetch_time - visit.visit_end) > max_gap_ms:
            removed += 1
            continue
        kept.append((visit, scrape))
    if removed:
        log.info("gap filter removed %d of %d pairs", removed, len(pairs))
    return kept
