"""Delayed re-fetch harness.

Turns a visit log into a schedule of HTTP GETs at configured day delays,
optionally compressing the timeline, and executes it politely: one queue
per host, a minimum wall-clock gap between requests to the same host, and
a global parallelism cap. Failures are recorded as transport error classes
or HTTP status codes, never raised.
"""

from __future__ import annotations

import hashlib
import http.client
import json
import logging
import random
import socket
import ssl
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from urllib.parse import urljoin, urlsplit

log = logging.getLogger(__name__)

DAY_MS = 86_400_000

ERROR_CLASSES = ("dns", "connect", "timeout", "tls", "too_many_redirects")

_REDIRECT_STATUSES = {301, 302, 303, 307, 308}

DEFAULT_FIXED_UA = "newsfetch/1.6 (+article-archiver)"


@dataclass(frozen=True)
class ScrapeProfile:
    """One of two client configurations: A fixed UA, B randomized pool.

    Cookies are never stored for either profile; redirects are followed up
    to ``max_redirects``; ``timeout`` is the wall-clock socket budget.
    """

    profile_id: str
    fixed_ua: str | None = None
    ua_pool: tuple[str, ...] = ()
    max_redirects: int = 10
    timeout: float = 30.0

    def __post_init__(self):
        if (self.fixed_ua is None) == (not self.ua_pool):
            raise ValueError("profile needs exactly one of fixed_ua or ua_pool")
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")
        if self.max_redirects < 0:
            raise ValueError("max_redirects must be >= 0")


def default_ua_pool() -> tuple[str, ...]:
    text = resources.files("scrape_audit.data").joinpath("user_agents.txt").read_text("utf-8")
    pool = tuple(
        line.strip() for line in text.splitlines() if line.strip() and not line.startswith("#")
    )
    if not pool:
        raise ValueError("user agent pool is empty")
    return pool


def default_profiles(timeout: float = 30.0) -> dict[str, ScrapeProfile]:
    return {
        "A": ScrapeProfile(profile_id="A", fixed_ua=DEFAULT_FIXED_UA, timeout=timeout),
        "B": ScrapeProfile(profile_id="B", ua_pool=default_ua_pool(), timeout=timeout),
    }


@dataclass(frozen=True)
class HarnessConfig:
    seed: int = 0
    compression: float = 1.0
    per_host_min_gap: float = 1000.0  # wall ms between requests to one host
    max_parallel: int = 8
    delay_cohorts: tuple[int, ...] = (0, 30, 60, 90)

    def __post_init__(self):
        if self.compression < 1:
            raise ValueError("compression must be >= 1")
        if self.per_host_min_gap < 0:
            raise ValueError("per_host_min_gap must be >= 0")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be >= 1")
        cohorts = tuple(self.delay_cohorts)
        if not cohorts or list(cohorts) != sorted(set(cohorts)) or cohorts[0] < 0:
            raise ValueError("delay_cohorts must be sorted, unique and non-negative")


@dataclass(frozen=True)
class ScrapeTask:
    visit_id: str
    url: str
    delay_days: int
    profile_id: str
    scheduled_time: int  # wall epoch ms on the compressed timeline
    sim_scheduled: int  # visit_end + delay, uncompressed epoch ms

    @property
    def host(self) -> str:
        return urlsplit(self.url).hostname or ""


@dataclass
class ScrapeResult:
    visit_id: str
    profile: str
    delay_days: int
    fetch_time: int  # wall epoch ms at request start
    status: int | str  # HTTP status, or an entry of ERROR_CLASSES
    final_url: str
    html: str = ""
    html_ref: str | None = None

    @property
    def failed(self) -> bool:
        return isinstance(self.status, str) or self.status >= 400


def assign_profile(visit_id: str, seed: int) -> str:
    """Deterministic near-even split of visits into profiles A and B."""
    digest = hashlib.sha256(f"{seed}:{visit_id}".encode("utf-8")).digest()
    return "A" if digest[-1] & 1 == 0 else "B"


def build_schedule(visits, config: HarnessConfig, sim_anchor: int | None = None):
    """One task per visit and delay cohort, compressed and sorted.

    Inter-event times are divided by ``config.compression`` around
    ``sim_anchor`` (default: earliest visit_end). The result depends only on
    the visits, the config and the anchor, so equal inputs give equal
    schedules.
    """
    visits = list(visits)
    if not visits:
        return []
    if sim_anchor is None:
        sim_anchor = min(v.visit_end for v in visits)
    span = max(v.visit_end for v in visits) - min(v.visit_end for v in visits)
    gaps = [
        (b - a) * DAY_MS
        for a, b in zip(config.delay_cohorts, config.delay_cohorts[1:])
    ]
    if gaps and span > min(gaps):
        log.warning(
            "cohort overlap: visit span %d ms exceeds cohort spacing %d ms",
            span,
            min(gaps),
        )
    tasks = []
    for v in visits:
        profile = assign_profile(v.visit_id, config.seed)
        for delay in config.delay_cohorts:
            sim_sched = v.visit_end + delay * DAY_MS
            wall = sim_anchor + round((sim_sched - sim_anchor) / config.compression)
            tasks.append(
                ScrapeTask(
                    visit_id=v.visit_id,
                    url=v.url,
                    delay_days=delay,
                    profile_id=profile,
                    scheduled_time=int(wall),
                    sim_scheduled=sim_sched,
                )
            )
    tasks.sort(key=lambda t: (t.scheduled_time, t.delay_days, t.visit_id))
    return tasks


def _draw_user_agent(profile: ScrapeProfile, task: ScrapeTask, seed: int) -> str:
    if profile.fixed_ua is not None:
        return profile.fixed_ua
    # keyed per request so the draw is independent of execution order
    rng = random.Random(f"{seed}:ua:{task.visit_id}:{task.delay_days}")
    return rng.choice(profile.ua_pool)


def _classify_error(exc: BaseException) -> str:
    if isinstance(exc, socket.gaierror):
        return "dns"
    if isinstance(exc, ssl.SSLError):
        return "tls"
    if isinstance(exc, (socket.timeout, TimeoutError)):
        return "timeout"
    return "connect"


def fetch(
    task: ScrapeTask,
    profile: ScrapeProfile,
    seed: int = 0,
    connect_override=None,
    fetch_time: int | None = None,
) -> ScrapeResult:
    """Single GET with manual redirect following; never raises.

    ``connect_override(host) -> (ip, port) | None`` lets tests and the
    self-hosted audit route logical hostnames to a local server while the
    request still carries the logical Host header.
    """
    ua = _draw_user_agent(profile, task, seed)
    if fetch_time is None:
        fetch_time = int(time.time() * 1000)
    url = task.url

    def result(status, final_url, html=""):
        return ScrapeResult(
            visit_id=task.visit_id,
            profile=profile.profile_id,
            delay_days=task.delay_days,
            fetch_time=fetch_time,
            status=status,
            final_url=final_url,
            html=html,
        )

    for _ in range(profile.max_redirects + 1):
        parts = urlsplit(url)
        host = parts.hostname or ""
        scheme = parts.scheme
        if scheme not in ("http", "https"):
            return result("connect", url)
        port = parts.port or (443 if scheme == "https" else 80)
        override = connect_override(host) if connect_override is not None else None
        if override is not None:
            conn_host, conn_port = override
        else:
            conn_host, conn_port = host, port
        conn = None
        try:
            if scheme == "https":
                conn = http.client.HTTPSConnection(
                    conn_host, conn_port, timeout=profile.timeout,
                    context=ssl.create_default_context(),
                )
            else:
                conn = http.client.HTTPConnection(
                    conn_host, conn_port, timeout=profile.timeout
                )
            path = parts.path or "/"
            if parts.query:
                path += "?" + parts.query
            host_header = host if parts.port is None else f"{host}:{parts.port}"
            conn.request(
                "GET",
                path,
                headers={
                    "Host": host_header,
                    "User-Agent": ua,
                    "Accept": "text/html",
                    "Connection": "close",
                },
            )
            response = conn.getresponse()
            status = response.status
            body = response.read()
        except Exception as exc:  # noqa: BLE001 - every failure becomes a class
            log.debug("fetch %s failed: %r", url, exc)
            return result(_classify_error(exc), url)
        finally:
            if conn is not None:
                conn.close()
        if status in _REDIRECT_STATUSES:
            location = response.getheader("Location")
            if location:
                url = urljoin(url, location)
                continue
        if status >= 400:
            return result(status, url)
        return result(status, url, body.decode("utf-8", errors="replace"))
    return result("too_many_redirects", url)


class _HostWorker(threading.Thread):
    def __init__(self, runner, host: str):
        super().__init__(daemon=True)
        self.runner = runner
        self.host = host
        self.tasks: list[ScrapeTask] = []

    def run(self):
        last_request = None
        r = self.runner
        for task in self.tasks:
            due = r.wall_anchor + (task.scheduled_time - r.virtual_anchor)
            if last_request is not None:
                due = max(due, last_request + r.min_gap)
            now = time.time() * 1000
            if due > now:
                time.sleep((due - now) / 1000.0)
            with r.semaphore:
                # the gap wait happened before taking a parallelism slot; the
                # start stamp below can only move later, never violate the gap
                start = time.time() * 1000
                last_request = start
                with r.lock:
                    r.request_trace.append((self.host, start))
                result = fetch(
                    task,
                    r.profiles[task.profile_id],
                    seed=r.seed,
                    connect_override=r.connect_override,
                    fetch_time=int(start),
                )
            r.emit(result)


class ScheduleRunner:
    """Executes a schedule with per-host FIFO queues and a global cap."""

    def __init__(
        self,
        profiles: dict[str, ScrapeProfile],
        config: HarnessConfig,
        connect_override=None,
        wall_anchor: int | None = None,
    ):
        self.profiles = profiles
        self.seed = config.seed
        self.min_gap = config.per_host_min_gap
        self.semaphore = threading.Semaphore(config.max_parallel)
        self.connect_override = connect_override
        self.wall_anchor = wall_anchor
        self.virtual_anchor = 0
        self.lock = threading.Lock()
        self.request_trace: list[tuple[str, float]] = []
        self.results: list[ScrapeResult] = []
        self._store = None

    def emit(self, result: ScrapeResult):
        with self.lock:
            if self._store is not None and not result.failed and result.html:
                result.html_ref = self._store.put(result.html.encode("utf-8"))
                result.html = ""
            self.results.append(result)

    def run(self, tasks, store=None) -> list[ScrapeResult]:
        tasks = list(tasks)
        if not tasks:
            return []
        self._store = store
        self.virtual_anchor = min(t.scheduled_time for t in tasks)
        if self.wall_anchor is None:
            self.wall_anchor = int(time.time() * 1000)
        workers: dict[str, _HostWorker] = {}
        for task in tasks:  # schedule order, so each host queue is FIFO
            worker = workers.get(task.host)
            if worker is None:
                worker = workers[task.host] = _HostWorker(self, task.host)
            worker.tasks.append(task)
        for worker in workers.values():
            worker.start()
        for worker in workers.values():
            worker.join()
        self.results.sort(key=lambda r: (r.visit_id, r.delay_days, r.profile))
        return self.results


def run_schedule(
    tasks,
    profiles: dict[str, ScrapeProfile],
    config: HarnessConfig,
    store=None,
    connect_override=None,
    wall_anchor: int | None = None,
) -> list[ScrapeResult]:
    runner = ScheduleRunner(
        profiles, config, connect_override=connect_override, wall_anchor=wall_anchor
    )
    return runner.run(tasks, store=store)


def error_ledger(results) -> list[dict]:
    """Per-cohort failure counts split by profile, plus totals."""
    cohorts: dict[int, dict[str, int]] = {}
    for r in results:
        row = cohorts.setdefault(
            r.delay_days, {"failures_A": 0, "failures_B": 0, "total_failures": 0, "n": 0}
        )
        row["n"] += 1
        if r.failed:
            row["total_failures"] += 1
            key = f"failures_{r.profile}"
            if key in row:
                row[key] += 1
    return [
        {"cohort": delay, **cohorts[delay]} for delay in sorted(cohorts)
    ]


def write_results_jsonl(results, path: str | Path):
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for r in results:
            fh.write(
                json.dumps(
                    {
                        "visit_id": r.visit_id,
                        "profile": r.profile,
                        "delay_days": r.delay_days,
                        "fetch_ts_ms": r.fetch_time,
                        "status": r.status,
                        "final_url": r.final_url,
                        "html_path": r.html_ref,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_results_jsonl(path: str | Path) -> list[ScrapeResult]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        out.append(
            ScrapeResult(
                visit_id=obj["visit_id"],
                profile=obj["profile"],
                delay_days=obj["delay_days"],
                fetch_time=obj["fetch_ts_ms"],
                status=obj["status"],
                final_url=obj["final_url"],
                html_ref=obj["html_path"],
            )
        )
    return out
