import json
import logging
import socket

import pytest

from scrape_audit.blobs import MemoryBlobStore
from scrape_audit.harness import (
    DAY_MS,
    HarnessConfig,
    ScrapeProfile,
    ScrapeResult,
    ScrapeTask,
    assign_profile,
    build_schedule,
    default_profiles,
    default_ua_pool,
    error_ledger,
    fetch,
    read_results_jsonl,
    run_schedule,
    write_results_jsonl,
)
from scrape_audit.simulator import (
    AdChurnSpec,
    RouteSpec,
    ScenarioConfig,
    SimulatorServer,
    UaBlockSpec,
)
from scrape_audit.visits import VisitRecord

EPOCH = 1_700_000_000_000

BODY = " ".join(f"Absatz {i} mit weiteren Einzelheiten zum Geschehen." for i in range(40))


def visit(visit_id, url="http://news.test/politik/artikel-eins-lang", end=EPOCH):
    return VisitRecord(
        visit_id=visit_id,
        participant_id="p1",
        url=url,
        html_ref="blobs/x.html",
        visit_start=end - 30_000,
        visit_end=end,
    )


def task_for(url, visit_id="v1", delay=0, profile="A"):
    return ScrapeTask(
        visit_id=visit_id,
        url=url,
        delay_days=delay,
        profile_id=profile,
        scheduled_time=0,
        sim_scheduled=0,
    )


@pytest.fixture(scope="module")
def sim():
    scenario = ScenarioConfig(
        seed=9,
        sim_epoch=EPOCH,
        routes=(
            RouteSpec(path="/politik/artikel-eins-lang", body=BODY, ad_churn=AdChurnSpec(2, 8)),
            RouteSpec(path="/sport/spielbericht-heute", body=BODY, host="zwei.test"),
            RouteSpec(path="/blockiert/geschuetzter-text", body=BODY, ua_block=UaBlockSpec("newsfetch", 0)),
            RouteSpec(path="/langsam/traege-seite", body=BODY, slow_ms=1500),
            RouteSpec(path="/schleife", body="", redirect_to="/schleife"),
            RouteSpec(path="/umleitung", body="", redirect_to="/politik/artikel-eins-lang"),
        ),
    )
    with SimulatorServer(scenario) as server:
        yield server


@pytest.fixture(scope="module")
def override(sim):
    return lambda host: ("127.0.0.1", sim.port)


def test_assign_profile_is_deterministic():
    assert assign_profile("v001", 7) == assign_profile("v001", 7)
    assert assign_profile("v001", 7) in ("A", "B")


def test_assign_profile_splits_ten_thousand_ids_evenly():
    # expected value from the keyed-hash construction: 5000 with sampling
    # noise well inside +-200 for a fair coin
    count_a = sum(1 for i in range(10_000) if assign_profile(f"v{i:05d}", 42) == "A")
    assert abs(count_a - 5000) <= 200


def test_assign_profile_depends_on_seed():
    flips = sum(
        1 for i in range(200) if assign_profile(f"v{i}", 1) != assign_profile(f"v{i}", 2)
    )
    assert flips > 0


def test_build_schedule_real_time_preserves_gaps():
    config = HarnessConfig(seed=1, delay_cohorts=(0,))
    visits = [visit("v1", end=EPOCH), visit("v2", end=EPOCH + 600_000)]
    tasks = build_schedule(visits, config)
    assert tasks[1].scheduled_time - tasks[0].scheduled_time == 600_000


def test_build_schedule_compression_divides_inter_event_times():
    # a 30-day delay at compression 86400 lands 30 seconds after the anchor
    config = HarnessConfig(seed=1, compression=86_400, delay_cohorts=(0, 30))
    tasks = build_schedule([visit("v1", end=EPOCH)], config)
    assert tasks[0].scheduled_time == EPOCH
    assert tasks[1].scheduled_time == EPOCH + 30_000
    assert tasks[1].sim_scheduled == EPOCH + 30 * DAY_MS


def test_build_schedule_emits_one_task_per_visit_and_cohort():
    config = HarnessConfig(seed=3, delay_cohorts=(0, 30, 60, 90))
    visits = [visit(f"v{i}", end=EPOCH + i * 1000) for i in range(5)]
    tasks = build_schedule(visits, config)
    assert len(tasks) == 20
    seen = {(t.visit_id, t.delay_days) for t in tasks}
    assert len(seen) == 20


def test_build_schedule_same_visit_same_profile_across_cohorts():
    config = HarnessConfig(seed=3, delay_cohorts=(0, 30, 60, 90))
    visits = [visit(f"v{i}", end=EPOCH + i * 1000) for i in range(40)]
    tasks = build_schedule(visits, config)
    by_visit = {}
    for t in tasks:
        by_visit.setdefault(t.visit_id, set()).add(t.profile_id)
    assert all(len(profiles) == 1 for profiles in by_visit.values())


def test_build_schedule_is_sorted_and_deterministic():
    config = HarnessConfig(seed=5, compression=1000, delay_cohorts=(0, 30, 60))
    visits = [visit(f"v{i}", end=EPOCH + (i * 37) % 11 * 60_000) for i in range(25)]
    tasks = build_schedule(visits, config)
    assert tasks == build_schedule(visits, config)
    times = [t.scheduled_time for t in tasks]
    assert times == sorted(times)


def test_build_schedule_cohorts_stay_monotone_per_visit():
    config = HarnessConfig(seed=5, compression=50, delay_cohorts=(0, 30, 60, 90))
    visits = [visit(f"v{i}", end=EPOCH + i * 9000) for i in range(10)]
    tasks = build_schedule(visits, config)
    by_visit = {}
    for t in tasks:
        by_visit.setdefault(t.visit_id, []).append((t.delay_days, t.sim_scheduled))
    for rows in by_visit.values():
        delays = [d for d, _ in sorted(rows)]
        sims = [s for _, s in sorted(rows)]
        assert delays == sorted(delays)
        assert sims == sorted(sims)
        assert all(s >= EPOCH for s in sims)


def test_build_schedule_warns_on_cohort_overlap(caplog):
    config = HarnessConfig(seed=1, delay_cohorts=(0, 30))
    visits = [visit("v1", end=EPOCH), visit("v2", end=EPOCH + 45 * DAY_MS)]
    with caplog.at_level(logging.WARNING, logger="scrape_audit.harness"):
        build_schedule(visits, config)
    assert any("cohort overlap" in r.message for r in caplog.records)
    caplog.clear()
    with caplog.at_level(logging.WARNING, logger="scrape_audit.harness"):
        build_schedule([visit("v1"), visit("v2", end=EPOCH + 1000)], config)
    assert not caplog.records


def test_harness_config_validation():
    with pytest.raises(ValueError):
        HarnessConfig(compression=0.5)
    with pytest.raises(ValueError):
        HarnessConfig(delay_cohorts=(30, 0))
    with pytest.raises(ValueError):
        HarnessConfig(delay_cohorts=())
    with pytest.raises(ValueError):
        HarnessConfig(max_parallel=0)


def test_profile_validation():
    with pytest.raises(ValueError):
        ScrapeProfile(profile_id="X")
    with pytest.raises(ValueError):
        ScrapeProfile(profile_id="X", fixed_ua="ua", ua_pool=("a",))
    with pytest.raises(ValueError):
        ScrapeProfile(profile_id="X", fixed_ua="ua", timeout=0)


def test_fetch_success_returns_html(sim, override):
    profiles = default_profiles(timeout=5)
    result = fetch(
        task_for("http://news.test/politik/artikel-eins-lang"),
        profiles["A"],
        connect_override=override,
    )
    assert result.status == 200
    assert not result.failed
    assert "Absatz 3" in result.html
    assert result.final_url == "http://news.test/politik/artikel-eins-lang"


def test_fetch_sends_logical_host_header(sim, override):
    profiles = default_profiles(timeout=5)
    result = fetch(
        task_for("http://zwei.test/sport/spielbericht-heute"),
        profiles["A"],
        connect_override=override,
    )
    assert result.status == 200
    result = fetch(
        task_for("http://drei.test/sport/spielbericht-heute"),
        profiles["A"],
        connect_override=override,
    )
    assert result.status == 404
    assert result.html == ""


def test_fetch_profile_a_uses_fixed_ua(sim, override):
    profiles = default_profiles(timeout=5)
    before = len(sim.request_trace)
    fetch(task_for("http://news.test/politik/artikel-eins-lang"), profiles["A"], connect_override=override)
    assert sim.request_trace[before]["ua"].startswith("newsfetch/")


def test_fetch_profile_b_draws_ua_per_request_deterministically(sim, override):
    profiles = default_profiles(timeout=5)
    pool = default_ua_pool()
    seen = []
    for _ in range(2):
        for delay in (0, 30):
            before = len(sim.request_trace)
            fetch(
                task_for("http://news.test/politik/artikel-eins-lang", visit_id="v77", delay=delay),
                profiles["B"],
                seed=12,
                connect_override=override,
            )
            seen.append(sim.request_trace[before]["ua"])
    assert all(ua in pool for ua in seen)
    assert seen[0] == seen[2] and seen[1] == seen[3]
    distinct = {
        sim.request_trace[-1]["ua"]
        for _ in range(12)
        if fetch(
            task_for(
                "http://news.test/politik/artikel-eins-lang",
                visit_id=f"v{_}",
            ),
            profiles["B"],
            seed=12,
            connect_override=override,
        )
    }
    assert len(distinct) > 1


def test_fetch_follows_redirects_to_final_url(sim, override):
    profiles = default_profiles(timeout=5)
    result = fetch(task_for("http://news.test/umleitung"), profiles["A"], connect_override=override)
    assert result.status == 200
    assert result.final_url == "http://news.test/politik/artikel-eins-lang"
    assert "Absatz 3" in result.html


def test_fetch_redirect_loop_reports_error_class(sim, override):
    profiles = default_profiles(timeout=5)
    result = fetch(task_for("http://news.test/schleife"), profiles["A"], connect_override=override)
    assert result.status == "too_many_redirects"
    assert result.failed and result.html == ""


def test_fetch_timeout_class(sim, override):
    profile = ScrapeProfile(profile_id="A", fixed_ua="newsfetch/1.6", timeout=0.3)
    result = fetch(task_for("http://news.test/langsam/traege-seite"), profile, connect_override=override)
    assert result.status == "timeout"
    assert result.html == ""


def test_fetch_dns_class():
    profile = ScrapeProfile(profile_id="A", fixed_ua="ua", timeout=2)
    result = fetch(task_for("http://kein-echter-host-zz.invalid/a"), profile)
    assert result.status == "dns"


def test_fetch_connect_class():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    profile = ScrapeProfile(profile_id="A", fixed_ua="ua", timeout=2)
    result = fetch(task_for(f"http://127.0.0.1:{port}/a"), profile)
    assert result.status == "connect"


def test_fetch_tls_class(sim, override):
    # https against a plain-http listener fails the handshake
    profile = ScrapeProfile(profile_id="A", fixed_ua="ua", timeout=3)
    result = fetch(
        task_for("https://news.test/politik/artikel-eins-lang"),
        profile,
        connect_override=override,
    )
    assert result.status == "tls"


def test_fetch_http_failure_leaves_html_empty(sim, override):
    # the 403 block page has a body; failed fetches must not keep it
    profiles = default_profiles(timeout=5)
    result = fetch(
        task_for("http://news.test/blockiert/geschuetzter-text"),
        profiles["A"],
        connect_override=override,
    )
    assert result.status == 403
    assert result.failed
    assert result.html == ""


def test_run_schedule_fetches_everything_and_respects_host_gap(override):
    config = HarnessConfig(seed=2, per_host_min_gap=40, max_parallel=4, delay_cohorts=(0,))
    visits = [
        visit("v1"),
        visit("v2", end=EPOCH + 1000),
        visit("v3", end=EPOCH + 2000),
        visit("v4", url="http://zwei.test/sport/spielbericht-heute", end=EPOCH + 500),
    ]
    tasks = build_schedule(visits, config)
    store = MemoryBlobStore()
    runner_results = []

    from scrape_audit.harness import ScheduleRunner

    runner = ScheduleRunner(default_profiles(timeout=5), config, connect_override=override)
    results = runner.run(tasks, store=store)
    runner_results.extend(results)

    assert len(results) == 4
    assert all(r.status == 200 for r in results)
    assert all(r.html == "" and r.html_ref for r in results)
    assert all(store.exists(r.html_ref) for r in results)
    assert [r.visit_id for r in results] == sorted(r.visit_id for r in results)
    by_host = {}
    for host, start in runner.request_trace:
        by_host.setdefault(host, []).append(start)
    assert set(by_host) == {"news.test", "zwei.test"}
    for starts in by_host.values():
        for a, b in zip(starts, starts[1:]):
            assert b - a >= 40 - 1.5  # clock resolution slack


def test_run_schedule_empty_is_noop():
    config = HarnessConfig(seed=2, delay_cohorts=(0,))
    assert run_schedule([], default_profiles(), config) == []


def test_error_ledger_counts_by_cohort_and_profile():
    def result(visit_id, profile, delay, status):
        return ScrapeResult(
            visit_id=visit_id,
            profile=profile,
            delay_days=delay,
            fetch_time=0,
            status=status,
            final_url="http://news.test/x",
        )

    results = [
        result("v1", "A", 0, 200),
        result("v2", "B", 0, 404),
        result("v3", "A", 0, "timeout"),
        result("v1", "A", 30, 200),
        result("v2", "B", 30, 200),
        result("v3", "A", 30, 500),
        result("v4", "B", 30, "dns"),
    ]
    ledger = error_ledger(results)
    assert ledger == [
        {"cohort": 0, "failures_A": 1, "failures_B": 1, "total_failures": 2, "n": 3},
        {"cohort": 30, "failures_A": 1, "failures_B": 1, "total_failures": 2, "n": 4},
    ]
    for row in ledger:
        assert row["failures_A"] + row["failures_B"] == row["total_failures"]


def test_results_jsonl_round_trip(tmp_path):
    results = [
        ScrapeResult("v1", "A", 0, 123, 200, "http://news.test/a", html_ref="blobs/a.html"),
        ScrapeResult("v2", "B", 30, 456, "timeout", "http://news.test/b"),
    ]
    path = tmp_path / "results.jsonl"
    write_results_jsonl(results, path)
    lines = [json.loads(line) for line in path.read_text().splitlines()]
    assert set(lines[0]) == {
        "visit_id", "profile", "delay_days", "fetch_ts_ms", "status", "final_url", "html_path",
    }
    assert lines[1]["html_path"] is None
    loaded = read_results_jsonl(path)
    assert [(r.visit_id, r.status, r.html_ref) for r in loaded] == [
        ("v1", 200, "blobs/a.html"),
        ("v2", "timeout", None),
    ]
