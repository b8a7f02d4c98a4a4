"""Pluggable content-category classifier adapters.

The category assignment itself is external to the audit: any classifier can
be plugged in as long as it speaks a line protocol of one JSON object per
line, request ``{"id", "text"}``, response ``{"id", "category", "score"}``,
responses matched by id and allowed to arrive out of order. Three adapters
ship: a deterministic keyword-frequency baseline (also runnable as a child
process via ``python -m scrape_audit.classify``), a subprocess adapter for
arbitrary commands, and an HTTP POST adapter.
"""

from __future__ import annotations

import json
import logging
import queue
import re
import shlex
import subprocess
import sys
import threading
import time
import urllib.error
import urllib.request
from collections import Counter
from importlib import resources
from pathlib import Path

log = logging.getLogger(__name__)

CLASSIFIER_ENV = "SCRAPE_AUDIT_CLASSIFIER"
ERROR_CATEGORY = "classifier_error"

_TOKEN_RE = re.compile(r"[a-z0-9äöüß]+")


def load_vocab(source: str | Path | dict) -> dict:
    obj = source if isinstance(source, dict) else json.loads(
        Path(source).read_text(encoding="utf-8")
    )
    categories = {
        name: tuple(words) for name, words in sorted(obj["categories"].items())
    }
    for name, words in categories.items():
        for word in words:
            if word != word.lower() or not word:
                raise ValueError(f"keyword {word!r} in {name} must be lowercase and non-empty")
    return {
        "fallback_category": obj["fallback_category"],
        "score_prior": float(obj["score_prior"]),
        "categories": categories,
    }


def default_vocab() -> dict:
    text = resources.files("scrape_audit.data").joinpath("classifier_vocab.json").read_text("utf-8")
    return load_vocab(json.loads(text))


class BaselineKeywordAdapter:
    """Keyword-frequency voting over whole tokens; fully deterministic.

    The winning category is the one with the most keyword occurrences
    (alphabetical tie-break); score = hits / (hits + prior), so texts with
    no keyword hits fall back with score 0.
    """

    def __init__(self, vocab: dict | None = None):
        self.vocab = vocab or default_vocab()
        self._keyword_to_cat: dict[str, str] = {}
        for cat, words in self.vocab["categories"].items():
            for word in words:
                self._keyword_to_cat[word] = cat

    @property
    def categories(self) -> tuple[str, ...]:
        return tuple(sorted(self.vocab["categories"])) + (self.vocab["fallback_category"],)

    def classify_text(self, text: str) -> tuple[str, float]:
        tokens = Counter(_TOKEN_RE.findall(text.lower()))
        hits: Counter[str] = Counter()
        for token, count in tokens.items():
            cat = self._keyword_to_cat.get(token)
            if cat is not None:
                hits[cat] += count
        if not hits:
            return self.vocab["fallback_category"], 0.0
        best = min(hits, key=lambda c: (-hits[c], c))
        n = hits[best]
        return best, n / (n + self.vocab["score_prior"])

    def classify(self, items) -> dict[str, tuple[str, float]]:
        return {item_id: self.classify_text(text) for item_id, text in items}


def serve_stdio(stdin=None, stdout=None):
    """Run the baseline adapter as a line-protocol child process."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    adapter = BaselineKeywordAdapter()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            request = json.loads(line)
            category, score = adapter.classify_text(request["text"])
            response = {"id": request["id"], "category": category, "score": score}
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            log.debug("bad request line: %r (%s)", line[:100], exc)
            continue
        stdout.write(json.dumps(response, ensure_ascii=False) + "\n")
        stdout.flush()


def _parse_response_line(line: str):
    try:
        obj = json.loads(line)
        item_id = obj["id"]
        category = str(obj["category"])
        score = float(obj["score"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
        return None
    return item_id, (category, min(1.0, max(0.0, score)))


class SubprocessLineAdapter:
    """Drives a child process speaking the line protocol over its stdio."""

    def __init__(self, command: str | list, timeout: float = 10.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()

    def _ensure_started(self):
        if self._proc is not None and self._proc.poll() is None:
            return
        self._proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
        )
        self._lines = queue.Queue()

        def pump(proc, sink):
            for line in proc.stdout:
                sink.put(line)
            sink.put(None)  # EOF sentinel

        threading.Thread(target=pump, args=(self._proc, self._lines), daemon=True).start()

    def classify(self, items) -> dict[str, tuple[str, float]]:
        items = list(items)
        out = {item_id: (ERROR_CATEGORY, 0.0) for item_id, _ in items}
        if not items:
            return out
        pending = set(out)
        try:
            self._ensure_started()
            for item_id, text in items:
                self._proc.stdin.write(json.dumps({"id": item_id, "text": text}) + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError, BrokenPipeError) as exc:
            log.warning("classifier subprocess unavailable: %s", exc)
            return out
        deadline = time.monotonic() + self.timeout
        while pending:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                log.warning("classifier timed out with %d items pending", len(pending))
                break
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                continue
            if line is None:
                log.warning("classifier exited with %d items pending", len(pending))
                break
            parsed = _parse_response_line(line)
            if parsed is None or parsed[0] not in pending:
                continue
            out[parsed[0]] = parsed[1]
            pending.discard(parsed[0])
        return out

    def close(self):
        if self._proc is not None and self._proc.poll() is None:
            self._proc.terminate()
            try:
                self._proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class HttpAdapter:
    """POSTs the whole batch as ND-JSON and reads ND-JSON back."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def classify(self, items) -> dict[str, tuple[str, float]]:
        items = list(items)
        out = {item_id: (ERROR_CATEGORY, 0.0) for item_id, _ in items}
        if not items:
            return out
        body = "".join(
            json.dumps({"id": item_id, "text": text}) + "\n" for item_id, text in items
        ).encode("utf-8")
        request = urllib.request.Request(
            self.url, data=body, headers={"Content-Type": "application/x-ndjson"}
        )
        try:
            with urllib.request.urlopen(request, timeout=self.timeout) as response:
                payload = response.read().decode("utf-8", errors="replace")
        except (urllib.error.URLError, OSError, ValueError) as exc:
            log.warning("classifier endpoint unavailable: %s", exc)
            return out
        for line in payload.splitlines():
            parsed = _parse_response_line(line)
            if parsed is not None and parsed[0] in out:
                out[parsed[0]] = parsed[1]
        return out


def get_adapter(spec: str | None, timeout: float = 10.0):
    """Resolve an adapter from a spec string (CLI flag or env var)."""
    if not spec or spec == "baseline":
        return BaselineKeywordAdapter()
    if spec.startswith(("http://", "https://")):
        return HttpAdapter(spec, timeout=timeout)
    return SubprocessLineAdapter(spec, timeout=timeout)


if __name__ == "__main__":
    serve_stdio()
