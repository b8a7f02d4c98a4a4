"""Deterministic local news-site simulator.

One scenario file describes a synthetic multi-domain news site: routes with
article bodies plus distortion behaviors (paywalls, login walls, JS shells,
UA blocking, deletions, edits, ad churn). The same scenario yields both the
privileged in-situ ground truth (synthesize_visit_log) and a live HTTP
server for ex-situ fetching. Rendering is a pure function of (scenario,
route, client context, counters), so identical request orders produce
identical bytes.
"""

from __future__ import annotations

import json
import logging
import random
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import urlsplit

log = logging.getLogger(__name__)

DEFAULT_HOST = "news.test"

PAYWALL_TEXT = (
    "Dieser Artikel ist nur mit Abonnement verfuegbar. Jetzt Abo abschliessen "
    "und weiterlesen. Read more with a subscription. Payment options include "
    "monthly and yearly plans. Subscribe now to continue reading this story. "
    "Unser Angebot: digitales Abonnement mit voller Kostenkontrolle, Zahlung "
    "per Karte oder Rechnung. Your payment unlocks every premium story."
)
LOGIN_TEXT = (
    "Bitte anmelden, um weiterzulesen. Log in with your username and password "
    "to continue. Benutzername und Passwort eingeben und einloggen. Your "
    "account keeps your password, settings and saved stories in sync. Enter "
    "username, enter password, stay signed in on this device."
)
JS_TEXT = (
    "Bitte aktivieren Sie JavaScript in Ihrem Browser. Please activate "
    "javascript to view this content. This page needs js enabled before the "
    "article can load."
)
BLOCK_TEXT = "Access denied. Automated clients are not allowed on this site."

_NAV = '<a href="/">Start</a> <a href="/politik/">Politik</a> <a href="/wirtschaft/">Wirtschaft</a> <a href="/sport/">Sport</a>'
_FOOTER = "Impressum Kontakt Mediadaten Archiv"


@dataclass(frozen=True)
class PaywallSpec:
    teaser_fraction: float

    def __post_init__(self):
        if not 0 < self.teaser_fraction < 1:
            raise ValueError(f"teaser_fraction must be in (0,1), got {self.teaser_fraction}")


@dataclass(frozen=True)
class UaBlockSpec:
    blocked_ua_substring: str
    after_n_requests: int

    def __post_init__(self):
        if self.after_n_requests < 0:
            raise ValueError("after_n_requests must be >= 0")
        if not self.blocked_ua_substring:
            raise ValueError("blocked_ua_substring must be non-empty")


@dataclass(frozen=True)
class EditSpec:
    sim_time: int  # epoch ms
    new_body: str


@dataclass(frozen=True)
class AdChurnSpec:
    n_slots: int
    token_len: int

    def __post_init__(self):
        if self.n_slots < 1 or self.token_len < 1:
            raise ValueError("n_slots and token_len must be >= 1")


@dataclass(frozen=True)
class RouteSpec:
    path: str
    body: str
    category_hint: str = ""
    host: str = DEFAULT_HOST
    title: str = ""
    paywall: PaywallSpec | None = None
    login_wall: bool = False
    ua_block: UaBlockSpec | None = None
    delete_at: int | None = None  # sim epoch ms
    edit: EditSpec | None = None
    ad_churn: AdChurnSpec | None = None
    js_wall: bool = False
    slow_ms: int = 0  # wall-clock response delay, for timeout injection
    redirect_to: str | None = None  # 302 target path, for redirect-loop tests

    def key(self) -> tuple[str, str]:
        return (self.host, self.path)


@dataclass(frozen=True)
class PlanVisit:
    participant: str
    path: str
    time_ms: int  # sim epoch ms of the visit start
    host: str = ""
    dwell_ms: int = 30_000


@dataclass(frozen=True)
class ClientContext:
    user_agent: str
    privileged: bool
    sim_time: int


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int
    sim_epoch: int
    routes: tuple[RouteSpec, ...]
    default_host: str = DEFAULT_HOST
    visit_plan: tuple[PlanVisit, ...] = ()

    def __post_init__(self):
        keys = [r.key() for r in self.routes]
        if len(keys) != len(set(keys)):
            dupes = sorted({k for k in keys if keys.count(k) > 1})
            raise ValueError(f"route paths must be unique per host: {dupes}")

    def route(self, host: str, path: str) -> RouteSpec | None:
        for r in self.routes:
            if r.host == host and r.path == path:
                return r
        return None

    def hosts(self) -> list[str]:
        return sorted({r.host for r in self.routes})


_SCENARIO_KEYS = frozenset({"seed", "sim_epoch", "default_host", "routes", "visit_plan"})
_ROUTE_KEYS = frozenset(
    {"path", "body", "category_hint", "host", "title", "slow_ms", "redirect_to", "behaviors"}
)
_BEHAVIOR_KEYS = frozenset(
    {"paywall", "login_wall", "ua_block", "delete_at", "edit", "js_wall", "ad_churn"}
)
_PLAN_KEYS = frozenset({"participant", "path", "time_ms", "host", "dwell_ms"})


def _check_keys(obj: dict, allowed: frozenset, where: str) -> None:
    # a misspelled or misplaced key must fail loudly: a silently dropped
    # behavior yields a plausible-looking all-zero audit
    unknown = sorted(set(obj) - allowed)
    if unknown:
        hint = ""
        if where == "route" and set(unknown) & _BEHAVIOR_KEYS:
            hint = " (behaviors nest under 'behaviors')"
        raise ValueError(f"unknown {where} keys: {', '.join(unknown)}{hint}")


def _behavior_specs(obj: dict) -> dict:
    out: dict = {}
    behaviors = obj.get("behaviors", {})
    _check_keys(behaviors, _BEHAVIOR_KEYS, "behavior")
    if "paywall" in behaviors:
        pw = behaviors["paywall"]
        _check_keys(pw, frozenset({"teaser_fraction"}), "paywall")
        out["paywall"] = PaywallSpec(teaser_fraction=float(pw["teaser_fraction"]))
    if behaviors.get("login_wall"):
        out["login_wall"] = True
    if "ua_block" in behaviors:
        ub = behaviors["ua_block"]
        _check_keys(ub, frozenset({"blocked_ua_substring", "after_n_requests"}), "ua_block")
        out["ua_block"] = UaBlockSpec(
            blocked_ua_substring=str(ub["blocked_ua_substring"]),
            after_n_requests=int(ub["after_n_requests"]),
        )
    if "delete_at" in behaviors:
        out["delete_at"] = int(behaviors["delete_at"])
    if "edit" in behaviors:
        ed = behaviors["edit"]
        _check_keys(ed, frozenset({"sim_time", "new_body"}), "edit")
        out["edit"] = EditSpec(sim_time=int(ed["sim_time"]), new_body=str(ed["new_body"]))
    if "ad_churn" in behaviors:
        ac = behaviors["ad_churn"]
        _check_keys(ac, frozenset({"n_slots", "token_len"}), "ad_churn")
        out["ad_churn"] = AdChurnSpec(n_slots=int(ac["n_slots"]), token_len=int(ac["token_len"]))
    if behaviors.get("js_wall"):
        out["js_wall"] = True
    return out


def load_scenario(source: str | Path | dict) -> ScenarioConfig:
    obj = source if isinstance(source, dict) else json.loads(
        Path(source).read_text(encoding="utf-8")
    )
    _check_keys(obj, _SCENARIO_KEYS, "scenario")
    default_host = obj.get("default_host", DEFAULT_HOST)
    routes = []
    for r in obj["routes"]:
        _check_keys(r, _ROUTE_KEYS, "route")
        routes.append(
            RouteSpec(
                path=r["path"],
                body=r["body"],
                category_hint=r.get("category_hint", ""),
                host=r.get("host", default_host),
                title=r.get("title", ""),
                slow_ms=int(r.get("slow_ms", 0)),
                redirect_to=r.get("redirect_to"),
                **_behavior_specs(r),
            )
        )
    for v in obj.get("visit_plan", []):
        _check_keys(v, _PLAN_KEYS, "visit_plan")
    plan = tuple(
        PlanVisit(
            participant=v["participant"],
            path=v["path"],
            time_ms=int(v["time_ms"]),
            host=v.get("host", ""),
            dwell_ms=int(v.get("dwell_ms", 30_000)),
        )
        for v in obj.get("visit_plan", [])
    )
    return ScenarioConfig(
        seed=int(obj["seed"]),
        sim_epoch=int(obj["sim_epoch"]),
        routes=tuple(routes),
        default_host=default_host,
        visit_plan=plan,
    )


def _churn_tokens(seed: int, route: RouteSpec, side: str, counter: int, slot: int) -> list[str]:
    # side separates privileged captures from live fetches so the two never
    # draw identical ad tokens for the same ordinal
    rng = random.Random(f"{seed}:{route.host}{route.path}:{side}:{counter}:{slot}")
    spec = route.ad_churn
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    return [
        "".join(rng.choice(alphabet) for _ in range(spec.token_len)) for _ in range(6)
    ]


def _paragraphs(text: str) -> str:
    chunks = [c.strip() for c in text.split("\n\n") if c.strip()]
    if not chunks:
        chunks = [text]
    return "\n".join(f"<p>{c}</p>" for c in chunks)


def _page(title: str, head_extra: str, article_inner: str, aside_inner: str,
          before_article: str = "") -> str:
    return (
        "<!doctype html>\n"
        f"<html><head><title>{title}</title>\n{head_extra}</head>\n"
        "<body>\n"
        f"<nav>{_NAV}</nav>\n"
        "<header><h1>Beispiel Nachrichten</h1></header>\n"
        f"{before_article}"
        f"<article>\n<h1>{title}</h1>\n{article_inner}\n</article>\n"
        f"<aside>\n{aside_inner}\n</aside>\n"
        f"<footer>{_FOOTER}</footer>\n"
        "</body></html>\n"
    )


def render(
    scenario: ScenarioConfig,
    route: RouteSpec,
    context: ClientContext,
    request_counter: int,
    prior_ua_matches: int = 0,
) -> tuple[int | str, str]:
    """Render one route for one client; pure given counters.

    ``request_counter`` keys ad churn; ``prior_ua_matches`` is how many times
    this route's UA block rule already matched before this request.
    """
    title = route.title or route.path.rsplit("/", 1)[-1].replace("-", " ").title()
    body = route.body
    if route.edit is not None and context.sim_time >= route.edit.sim_time:
        body = route.edit.new_body

    side = "priv" if context.privileged else "pub"
    aside_parts = ["<div>Mehr aus der Redaktion</div>"]
    head_extra = ""
    if route.ad_churn is not None:
        slots = []
        for slot in range(route.ad_churn.n_slots):
            tokens = _churn_tokens(scenario.seed, route, side, request_counter, slot)
            slots.append(f'<div class="ad-slot">{" ".join(tokens)}</div>')
        aside_parts.extend(slots)
        script_lines = []
        for slot in range(route.ad_churn.n_slots * 2):
            tokens = _churn_tokens(
                scenario.seed, route, side + ":head", request_counter, slot
            )
            script_lines.append(f'var slot{slot} = "{" ".join(tokens)}";')
        head_extra = "<script>\n" + "\n".join(script_lines) + "\n</script>\n"
    aside_inner = "\n".join(aside_parts)

    if context.privileged:
        return 200, _page(title, head_extra, _paragraphs(body), aside_inner)

    if route.delete_at is not None and context.sim_time >= route.delete_at:
        return 404, ""

    if route.ua_block is not None and route.ua_block.blocked_ua_substring in context.user_agent:
        if prior_ua_matches + 1 > route.ua_block.after_n_requests:
            return 403, _page(title, "", f"<p>{BLOCK_TEXT}</p>", aside_inner)

    if route.js_wall:
        return 200, _page(title, "", f"<p>{JS_TEXT}</p>", aside_inner)

    if route.paywall is not None or route.login_wall:
        if route.paywall is not None:
            teaser_len = int(len(body) * route.paywall.teaser_fraction)
            wall_text = PAYWALL_TEXT
        else:
            teaser_len = int(len(body) * 0.1)
            wall_text = LOGIN_TEXT
        # the teaser sits outside the article element (as a standalone
        # snippet box), the wall prompt replaces the article body; main
        # content extraction therefore sees only the wall
        teaser_html = f'<div class="teaser">\n{_paragraphs(body[:teaser_len])}\n</div>\n'
        return 200, _page(
            title, head_extra, f"<p>{wall_text}</p>", aside_inner, before_article=teaser_html
        )

    return 200, _page(title, head_extra, _paragraphs(body), aside_inner)


def synthesize_visit_log(scenario: ScenarioConfig, plan=None) -> str:
    """Privileged renders of the visit plan as visit-log JSON lines."""
    if plan is None:
        plan = scenario.visit_plan
    counters: dict[tuple[str, str], int] = {}
    lines = []
    for idx, visit in enumerate(plan):
        host = visit.host or scenario.default_host
        route = scenario.route(host, visit.path)
        if route is None:
            raise ValueError(f"visit plan references unknown route {host}{visit.path}")
        counter = counters.get(route.key(), 0)
        counters[route.key()] = counter + 1
        context = ClientContext(user_agent="in-situ", privileged=True, sim_time=visit.time_ms)
        status, html = render(scenario, route, context, counter)
        record = {
            "visit_id": f"v{idx:05d}",
            "participant_id": visit.participant,
            "url": f"http://{host}{visit.path}",
            "html": html,
            "visit_start_ms": visit.time_ms,
            "visit_end_ms": visit.time_ms + visit.dwell_ms,
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")


class SimulatorServer:
    """Threaded HTTP server with virtual hosts, atomic counters, sim time."""

    def __init__(
        self,
        scenario: ScenarioConfig,
        port: int = 0,
        compression: float = 1.0,
        sim_anchor: int | None = None,
        wall_anchor: int | None = None,
    ):
        self.scenario = scenario
        self.compression = float(compression)
        self.sim_anchor = scenario.sim_epoch if sim_anchor is None else int(sim_anchor)
        self._lock = threading.Lock()
        self._request_counters: dict[tuple[str, str], int] = {}
        self._ua_counters: dict[tuple[str, str, str], int] = {}
        self.request_trace: list[dict] = []
        sim = self

        class Handler(BaseHTTPRequestHandler):
            protocol_version = "HTTP/1.1"

            def log_message(self, fmt, *args):  # route through logging, quietly
                log.debug("simulator: " + fmt, *args)

            def do_GET(self):
                sim._handle(self)

        self._httpd = ThreadingHTTPServer(("127.0.0.1", port), Handler)
        self._httpd.daemon_threads = True
        self.port = self._httpd.server_address[1]
        self.wall_anchor = (
            int(time.time() * 1000) if wall_anchor is None else int(wall_anchor)
        )
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def sim_time_of(self, wall_ms: float) -> int:
        return int(self.sim_anchor + (wall_ms - self.wall_anchor) * self.compression)

    def url(self, path: str) -> str:
        return f"http://127.0.0.1:{self.port}{path}"

    def stop(self):
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.stop()

    def _handle(self, handler: BaseHTTPRequestHandler):
        wall_ms = time.time() * 1000
        sim_time = self.sim_time_of(wall_ms)
        host = (handler.headers.get("Host") or self.scenario.default_host).split(":")[0]
        path = urlsplit(handler.path).path
        ua = handler.headers.get("User-Agent", "")
        route = self.scenario.route(host, path)
        if route is None:
            self._respond(handler, 404, b"", host, path, ua, sim_time)
            return
        if route.slow_ms:
            time.sleep(route.slow_ms / 1000.0)
        if route.redirect_to is not None:
            body = b""
            self._trace(host, path, ua, sim_time, 302)
            handler.send_response(302)
            handler.send_header("Location", route.redirect_to)
            handler.send_header("Content-Length", str(len(body)))
            handler.end_headers()
            handler.wfile.write(body)
            return
        with self._lock:
            counter = self._request_counters.get(route.key(), 0)
            self._request_counters[route.key()] = counter + 1
            prior_matches = 0
            if route.ua_block is not None and route.ua_block.blocked_ua_substring in ua:
                ua_key = (host, path, route.ua_block.blocked_ua_substring)
                prior_matches = self._ua_counters.get(ua_key, 0)
                self._ua_counters[ua_key] = prior_matches + 1
        context = ClientContext(user_agent=ua, privileged=False, sim_time=sim_time)
        status, html = render(self.scenario, route, context, counter, prior_matches)
        self._respond(handler, status, html.encode("utf-8"), host, path, ua, sim_time)

    def _respond(self, handler, status: int, body: bytes, host, path, ua, sim_time):
        # trace before writing: once the body is out the client unblocks, and
        # callers may read request_trace while this thread is still here
        self._trace(host, path, ua, sim_time, status)
        try:
            handler.send_response(status)
            handler.send_header("Content-Type", "text/html; charset=utf-8")
            handler.send_header("Content-Length", str(len(body)))
            handler.end_headers()
            handler.wfile.write(body)
        except (BrokenPipeError, ConnectionResetError):
            pass  # client gave up (timeout tests do this on purpose)

    def _trace(self, host, path, ua, sim_time, status):
        with self._lock:
            self.request_trace.append(
                {"host": host, "path": path, "ua": ua, "sim_time": sim_time, "status": status}
            )

    def ua_match_count(self, host: str, path: str, substring: str) -> int:
        with self._lock:
            return self._ua_counters.get((host, path, substring), 0)

    def request_count(self, host: str, path: str) -> int:
        with self._lock:
            return self._request_counters.get((host, path), 0)
