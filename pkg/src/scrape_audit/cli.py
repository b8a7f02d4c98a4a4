"""Command-line entry point: end-to-end audits, reports, and utilities.

Subcommands:
  audit          run the full pipeline (ingest .. debias) against a live
                 target or a self-hosted scenario, writing every artifact
  report         render SVG figures and the failure table for a finished run
  evaluate-urls  score the URL-based article identifier on a labeled corpus
  simulate       serve a scenario over HTTP, or emit its synthetic visit log
  tune-refresh   sweep refresh-dedup windows against known distances

Exit codes: 0 success, 1 pipeline failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from collections import Counter
from pathlib import Path

from .bias import (
    DebiasPlan,
    classify_side,
    compare_distributions,
    distribution,
    domain_distance_table,
    migration_matrix,
    run_debias_search,
    write_debias_json,
    write_distributions_csv,
    write_domain_table_csv,
    write_migration_csv,
)
from .blobs import BlobStore
from .classify import CLASSIFIER_ENV, get_adapter
from .extraction import REPRESENTATIONS, ExtractionCache, detect_restricted, extract
from .harness import (
    DAY_MS,
    HarnessConfig,
    build_schedule,
    default_profiles,
    error_ledger,
    read_results_jsonl,
    run_schedule,
    write_results_jsonl,
)
from .metrics import (
    SeriesPoint,
    group_stats,
    pair_distance,
    read_distances_csv,
    rolling_mean,
    stats_report,
    write_distances_csv,
    write_series_csv,
)
from .report import (
    plot_category_shares,
    plot_cohort_means,
    plot_histograms,
    plot_rolling_series,
    write_error_ledger_csv,
)
from .simulator import SimulatorServer, load_scenario, synthesize_visit_log
from .taxonomy import (
    default_domain_list,
    default_labeled_corpus,
    default_rules,
    evaluate_identifier,
    host_of,
    identify_article,
    load_domain_list,
    load_labeled_corpus,
    registrable_domain,
)
from .taxonomy import UrlRules
from .visits import (
    dedup_refreshes,
    filter_scrape_gap,
    ingest_visit_log,
    serialize_visit_log,
    tune_refresh_threshold,
    write_rejections,
)

log = logging.getLogger(__name__)


def _usage_error(field: str, message: str) -> int:
    print(f"error: {field}: {message}", file=sys.stderr)
    return 2


def _parse_int_list(text: str, field: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError:
        raise argparse.ArgumentTypeError(f"{field} must be comma-separated integers")


class _UnionStore:
    """Read-through view over several blob stores (first hit wins)."""

    def __init__(self, *stores):
        self.stores = stores

    def exists(self, ref: str) -> bool:
        return any(store.exists(ref) for store in self.stores)

    def text(self, ref: str) -> str:
        for store in self.stores:
            if store.exists(ref):
                return store.text(ref)
        raise FileNotFoundError(ref)


def _load_strategies(path: Path) -> list[DebiasPlan]:
    raw = json.loads(path.read_text(encoding="utf-8"))
    plans = []
    for obj in raw:
        plans.append(
            DebiasPlan(
                name=obj["name"],
                score_threshold=float(obj.get("score_threshold", 0.0)),
                excluded_domains=frozenset(obj.get("excluded_domains", ())),
                excluded_categories=frozenset(obj.get("excluded_categories", ())),
                alpha=float(obj.get("alpha", 0.05)),
            )
        )
    return plans


def _default_strategies(labels_in, labels_ex, domain_rows, domain_by_visit) -> list[DebiasPlan]:
    """The three strategy families: threshold sweep, domains, categories."""
    base = compare_distributions(
        distribution(labels_in), distribution(labels_ex)
    )
    flagged = sorted(
        row["category"]
        for row in base["categories"]
        if row["infinite"]
        or (row["relative_diff_pct"] is not None and abs(row["relative_diff_pct"]) >= 50.0)
    )
    worst_domains = [
        row["domain"]
        for row in sorted(domain_rows, key=lambda r: -r["mean_distance"])[:2]
        if row["mean_distance"] > 0
    ]
    plans = [
        DebiasPlan(name="baseline"),
        DebiasPlan(name="tau-0.5", score_threshold=0.5),
        DebiasPlan(name="tau-0.75", score_threshold=0.75),
    ]
    if worst_domains:
        plans.append(
            DebiasPlan(name="exclude-worst-domains", excluded_domains=frozenset(worst_domains))
        )
    if flagged:
        plans.append(
            DebiasPlan(
                name="exclude-flagged-categories", excluded_categories=frozenset(flagged)
            )
        )
    return plans


def cmd_audit(args) -> int:
    if not args.scenario and not args.visit_log:
        return _usage_error("visit_log", "either --scenario or --visit-log is required")
    for field in ("scenario", "visit_log", "domain_list", "strategies", "url_rules"):
        value = getattr(args, field)
        if value and not Path(value).is_file():
            return _usage_error(field, f"file not found: {value}")
    try:
        config = HarnessConfig(
            seed=args.seed,
            compression=args.compression,
            per_host_min_gap=args.per_host_gap_ms,
            max_parallel=args.max_parallel,
            delay_cohorts=args.delays,
        )
    except ValueError as exc:
        return _usage_error("delays/compression", str(exc))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    level = args.confidence / 100.0
    files: dict[str, str] = {}
    stage = "load"
    server = None
    try:
        scenario = None
        if args.scenario:
            scenario = load_scenario(args.scenario)
        # ingest
        stage = "ingest"
        store = BlobStore(out)
        if scenario is not None and not args.visit_log:
            log_text = synthesize_visit_log(scenario)
            records, rejections = ingest_visit_log(log_text.splitlines(), store=store)
            read_store = store
        else:
            records, rejections = ingest_visit_log(args.visit_log)
            read_store = _UnionStore(BlobStore(Path(args.visit_log).parent), store)
        serialize_visit_log(records, out / "visits.jsonl")
        write_rejections(rejections, out / "rejected.jsonl")
        files["visits"] = "visits.jsonl"
        files["rejections"] = "rejected.jsonl"

        # refresh dedup
        stage = "dedup"
        visits = dedup_refreshes(records, window=args.refresh_window)

        # article identification
        stage = "identify"
        rules = UrlRules.load(args.url_rules) if args.url_rules else default_rules()
        if args.domain_list:
            domain_list = load_domain_list(args.domain_list)
        elif scenario is not None:
            domain_list = {host: "digital_born" for host in scenario.hosts()}
        else:
            domain_list = default_domain_list()
        decisions = {v.visit_id: identify_article(v.url, domain_list, rules) for v in visits}
        with (out / "url_decisions.csv").open("w", encoding="utf-8", newline="") as fh:
            fh.write("visit_id,url,is_article,reasons\n")
            for v in visits:
                d = decisions[v.visit_id]
                fh.write(f"{v.visit_id},{v.url},{int(d.is_article)},{';'.join(d.reasons)}\n")
        files["url_decisions"] = "url_decisions.csv"
        article_visits = [v for v in visits if decisions[v.visit_id].is_article]
        if not article_visits:
            raise RuntimeError("no article visits survive the URL gates")

        # schedule
        stage = "schedule"
        sim_anchor = min(v.visit_end for v in article_visits)
        tasks = build_schedule(article_visits, config, sim_anchor=sim_anchor)
        with (out / "schedule.csv").open("w", encoding="utf-8", newline="") as fh:
            fh.write("visit_id,url,delay_days,profile,scheduled_time,sim_scheduled\n")
            for t in tasks:
                fh.write(
                    f"{t.visit_id},{t.url},{t.delay_days},{t.profile_id},"
                    f"{t.scheduled_time},{t.sim_scheduled}\n"
                )
        files["schedule"] = "schedule.csv"

        # fetch
        stage = "fetch"
        wall_anchor = int(time.time() * 1000)
        connect_override = None
        if scenario is not None:
            server = SimulatorServer(
                scenario,
                compression=config.compression,
                sim_anchor=sim_anchor,
                wall_anchor=wall_anchor,
            )
            port = server.port
            connect_override = lambda host: ("127.0.0.1", port)  # noqa: E731
        profiles = default_profiles(timeout=args.timeout)
        results = run_schedule(
            tasks,
            profiles,
            config,
            store=store,
            connect_override=connect_override,
            wall_anchor=wall_anchor,
        )
        if server is not None:
            server.stop()
            server = None
        write_results_jsonl(results, out / "results.jsonl")
        files["results"] = "results.jsonl"
        ledger_rows = error_ledger(results)
        write_error_ledger_csv(ledger_rows, out / "error_ledger.csv")
        files["error_ledger"] = "error_ledger.csv"

        # distances
        stage = "distances"
        visit_by_id = {v.visit_id: v for v in article_visits}
        # gap checks run on scheduled target times: execution jitter scaled by
        # the compression factor would otherwise decide which pairs survive
        sim_sched_by_key = {(t.visit_id, t.delay_days): t.sim_scheduled for t in tasks}
        sim_results = [
            dataclasses.replace(r, fetch_time=sim_sched_by_key[(r.visit_id, r.delay_days)])
            for r in results
        ]
        pairs_in = [(visit_by_id[r.visit_id], r) for r in sim_results]
        kept = filter_scrape_gap(pairs_in, max_gap=args.max_scrape_gap)
        cache = ExtractionCache()
        pairs = [
            pair_distance(v, r, rep, read_store, cache)
            for (v, r) in kept
            for rep in REPRESENTATIONS
        ]
        write_distances_csv(pairs, out / "distances.csv")
        files["distances"] = "distances.csv"

        # rolling series
        stage = "series"
        end_by_visit = {v.visit_id: v.visit_end for v in article_visits}
        for rep in REPRESENTATIONS:
            items = [
                (end_by_visit[p.visit_id] + p.delay_days * DAY_MS, p.distance)
                for p in pairs
                if p.representation == rep
            ]
            points = rolling_mean(items, window_days=7.0, level=level)
            write_series_csv(points, out / f"series_{rep}.csv")
            files[f"series_{rep}"] = f"series_{rep}.csv"

        # stats
        stage = "stats"
        stats = {"confidence_level": level}
        for rep in REPRESENTATIONS:
            rep_pairs = [p for p in pairs if p.representation == rep]
            stats[rep] = {
                "by_cohort": stats_report(
                    group_stats(rep_pairs, key=lambda p: f"{p.delay_days:03d}d", level=level),
                    level,
                ),
                "by_cohort_profile": stats_report(
                    group_stats(
                        rep_pairs,
                        key=lambda p: f"{p.delay_days:03d}d/{p.profile_id}",
                        level=level,
                    ),
                    level,
                ),
            }
        (out / "stats.json").write_text(
            json.dumps(stats, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        files["stats"] = "stats.json"

        # classification + bias
        stage = "bias"
        adapter = get_adapter(args.classifier or os.environ.get(CLASSIFIER_ENV))
        zero_by_visit = {}
        for v, r in kept:
            if r.delay_days == 0 and v.visit_id not in zero_by_visit:
                zero_by_visit[v.visit_id] = r

        def blob_text(ref, rep):
            if not ref or not read_store.exists(ref):
                return ""
            return cache.text(read_store.text(ref), rep)

        joined = sorted(zero_by_visit)
        in_items = [(vid, blob_text(visit_by_id[vid].html_ref, "cleaned_text")) for vid in joined]
        ex_items = [
            (vid, blob_text(zero_by_visit[vid].html_ref, "cleaned_text")) for vid in joined
        ]
        labels_in = classify_side(adapter, "in_situ", in_items)
        labels_ex = classify_side(adapter, "ex_situ", ex_items)
        with (out / "labels.csv").open("w", encoding="utf-8", newline="") as fh:
            fh.write("visit_id,side,category,score\n")
            for label in labels_in + labels_ex:
                fh.write(f"{label.visit_id},{label.side},{label.category},{label.score!r}\n")
        files["labels"] = "labels.csv"

        domain_by_visit = {
            v.visit_id: registrable_domain(host_of(v.url) or "") for v in article_visits
        }
        cleaned_pairs = [p for p in pairs if p.representation == "cleaned_text"]
        domain_rows = domain_distance_table(cleaned_pairs, domain_by_visit)
        write_domain_table_csv(domain_rows, out / "domain_distances.csv")
        files["domain_distances"] = "domain_distances.csv"

        if args.strategies:
            strategies = _load_strategies(Path(args.strategies))
        else:
            strategies = _default_strategies(labels_in, labels_ex, domain_rows, domain_by_visit)
        debias = run_debias_search(labels_in, labels_ex, strategies, domain_by_visit)
        write_debias_json(debias, out / "debias.json")
        files["debias"] = "debias.json"

        matrix = migration_matrix(labels_in, labels_ex)
        write_migration_csv(matrix, out / "migration.csv")
        files["migration"] = "migration.csv"

        dists = []
        for plan in strategies:
            dists.append(distribution(labels_in, plan, domain_by_visit))
            dists.append(distribution(labels_ex, plan, domain_by_visit))
        write_distributions_csv(dists, out / "distributions.csv")
        files["distributions"] = "distributions.csv"

        # restricted-content flags on the 0-day ex-situ side
        stage = "restricted"
        restricted: Counter[str] = Counter()
        for vid in joined:
            r = zero_by_visit[vid]
            if r.failed or not r.html_ref:
                restricted["fetch_failed"] += 1
                continue
            html = read_store.text(r.html_ref)
            flag = detect_restricted(
                cache.text(html, "cleaned_text"), cache.text(html, "raw_text")
            )
            if flag.kind != "none":
                restricted[flag.kind] += 1

        # summary
        stage = "summary"
        per_cohort = {}
        for rep in REPRESENTATIONS:
            rows = []
            for delay in config.delay_cohorts:
                values = [
                    p.distance
                    for p in pairs
                    if p.representation == rep and p.delay_days == delay
                ]
                if values:
                    rows.append(
                        {"cohort": delay, "mean": sum(values) / len(values), "n": len(values)}
                    )
            per_cohort[rep] = rows
        summary = {
            "seed": config.seed,
            "confidence_level": level,
            "compression": config.compression,
            "delay_cohorts": list(config.delay_cohorts),
            "counts": {
                "visits_ingested": len(records),
                "visits_rejected": len(rejections),
                "visits_after_dedup": len(visits),
                "article_visits": len(article_visits),
                "tasks": len(tasks),
                "results": len(results),
                "pairs": len(pairs),
                "pairs_after_gap_filter": len(kept) * len(REPRESENTATIONS),
            },
            "per_cohort_mean_distance": per_cohort,
            "restricted_counts": dict(sorted(restricted.items())),
            "error_ledger": ledger_rows,
            "debias_chosen": debias["chosen"],
            "files": dict(sorted(files.items())),
        }
        (out / "summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"audit complete: {out / 'summary.json'}")
        return 0
    except Exception as exc:  # noqa: BLE001 - stage marker then nonzero exit
        (out / "FAILED_STAGE").write_text(f"{stage}: {exc}\n", encoding="utf-8")
        log.error("audit failed during %s: %s", stage, exc)
        print(f"error: audit failed during stage {stage}: {exc}", file=sys.stderr)
        return 1
    finally:
        if server is not None:
            server.stop()


def _read_series_csv(path: Path) -> list[SeriesPoint]:
    import csv as _csv

    with path.open(encoding="utf-8", newline="") as fh:
        reader = _csv.DictReader(fh)
        return [
            SeriesPoint(
                window_end=int(row["window_end_ms"]),
                mean=float(row["mean"]),
                ci_low=float(row["ci_low"]),
                ci_high=float(row["ci_high"]),
                n=int(row["n"]),
            )
            for row in reader
        ]


def cmd_report(args) -> int:
    run = Path(args.run)
    distances_path = run / "distances.csv"
    if not distances_path.is_file():
        return _usage_error("run", f"no distances.csv under {run}")
    pairs = read_distances_csv(distances_path)
    if not pairs:
        return _usage_error("run", "distances.csv is empty")
    out = Path(args.out) if args.out else run
    out.mkdir(parents=True, exist_ok=True)
    level = args.confidence / 100.0
    emitted = []

    series_by_rep = {}
    for rep in REPRESENTATIONS:
        path = run / f"series_{rep}.csv"
        if path.is_file():
            series_by_rep[rep] = _read_series_csv(path)
    if series_by_rep:
        emitted += plot_rolling_series(series_by_rep, out / "fig_series.svg")

    dist_by_rep = {}
    for pair in pairs:
        dist_by_rep.setdefault(pair.representation, []).append(pair.distance)
    emitted += plot_histograms(dist_by_rep, out / "fig_histograms.svg")

    cleaned = [p for p in pairs if p.representation == "cleaned_text"] or pairs
    rows = []
    for summary in group_stats(
        cleaned, key=lambda p: f"{p.delay_days:05d}|{p.profile_id}", level=level
    ):
        if summary.diff is not None or "|" not in summary.group:
            continue
        cohort_text, profile = summary.group.split("|", 1)
        rows.append(
            {
                "cohort": int(cohort_text),
                "profile": profile,
                "mean": summary.mean,
                "ci_low": summary.ci_low,
                "ci_high": summary.ci_high,
                "n": summary.n,
            }
        )
    emitted += plot_cohort_means(rows, out / "fig_cohorts.svg")

    debias_path = run / "debias.json"
    if debias_path.is_file():
        debias = json.loads(debias_path.read_text(encoding="utf-8"))
        if debias.get("plans"):
            emitted += plot_category_shares(debias, out / "fig_categories.svg")

    results_path = run / "results.jsonl"
    if results_path.is_file():
        rows = error_ledger(read_results_jsonl(results_path))
        emitted.append(write_error_ledger_csv(rows, out / "table1.csv"))

    for path in emitted:
        print(path)
    return 0


def cmd_evaluate_urls(args) -> int:
    for field in ("corpus", "url_rules", "domain_list", "weights"):
        value = getattr(args, field)
        if value and not Path(value).is_file():
            return _usage_error(field, f"file not found: {value}")
    corpus = load_labeled_corpus(args.corpus) if args.corpus else default_labeled_corpus()
    if not corpus:
        return _usage_error("corpus", "no labeled URLs")
    rules = UrlRules.load(args.url_rules) if args.url_rules else default_rules()
    domain_list = load_domain_list(args.domain_list) if args.domain_list else default_domain_list()
    domain_freq = None
    if args.weights:
        import csv as _csv

        with open(args.weights, encoding="utf-8", newline="") as fh:
            domain_freq = {row["domain"]: int(row["count"]) for row in _csv.DictReader(fh)}
    report = evaluate_identifier(corpus, domain_list, rules, domain_freq)
    confusion = report.confusion
    no_predicted = confusion["tp"] + confusion["fp"] == 0
    no_gold = confusion["tp"] + confusion["fn"] == 0

    def fmt(value: float, undefined: bool) -> str:
        return "undefined" if undefined else f"{value:.4f}"

    print(f"urls: {len(corpus)}")
    print(
        "confusion: tp={tp} fp={fp} fn={fn} tn={tn}".format(**confusion)
    )
    print(
        f"precision: {fmt(report.precision, no_predicted)}  "
        f"recall: {fmt(report.recall, no_gold)}  "
        f"f1: {fmt(report.f1, no_predicted or no_gold)}"
    )
    print(
        f"weighted:  precision={fmt(report.weighted_precision, no_predicted)} "
        f"recall={fmt(report.weighted_recall, no_gold)} "
        f"f1={fmt(report.weighted_f1, no_predicted or no_gold)}"
    )
    fn_reasons: Counter[str] = Counter()
    fp_urls = []
    for url, label in corpus:
        decision = identify_article(url, domain_list, rules)
        if label and not decision.is_article:
            fn_reasons.update(decision.reasons)
        elif not label and decision.is_article:
            fp_urls.append(url)
    print("false-negative rule hits:")
    for reason, count in sorted(fn_reasons.items(), key=lambda kv: (-kv[1], kv[0])):
        print(f"  {reason}: {count}")
    print(f"false positives: {len(fp_urls)}")
    for url in fp_urls[:10]:
        print(f"  {url}")
    return 0


def cmd_simulate(args) -> int:
    if not Path(args.scenario).is_file():
        return _usage_error("scenario", f"file not found: {args.scenario}")
    scenario = load_scenario(args.scenario)
    if args.emit_visit_log:
        Path(args.emit_visit_log).write_text(synthesize_visit_log(scenario), encoding="utf-8")
        print(args.emit_visit_log)
        return 0
    server = SimulatorServer(scenario, port=args.port, compression=args.compression)
    print(f"serving {len(scenario.routes)} routes on 127.0.0.1:{server.port}", flush=True)
    try:
        if args.duration is not None:
            time.sleep(args.duration)
        else:  # pragma: no cover - interactive mode
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:  # pragma: no cover
        pass
    finally:
        server.stop()
    return 0


def cmd_tune_refresh(args) -> int:
    if not Path(args.visit_log).is_file():
        return _usage_error("visit_log", f"file not found: {args.visit_log}")
    if not Path(args.distances).is_file():
        return _usage_error("distances", f"file not found: {args.distances}")
    candidates = [float(c) for c in args.candidates.split(",") if c.strip()]
    if not candidates:
        return _usage_error("candidates", "no candidate windows given")
    records, _ = ingest_visit_log(args.visit_log)
    pairs = read_distances_csv(args.distances)
    distances_by_visit = {}
    for pair in pairs:
        if pair.representation == "cleaned_text" and pair.delay_days == 0:
            distances_by_visit.setdefault(pair.visit_id, pair.distance)
    # visits gated out of the audit (non-articles) carry no distance
    records = [v for v in records if v.visit_id in distances_by_visit]
    if not records:
        return _usage_error("distances", "no visits with recorded distances")
    try:
        chosen, table = tune_refresh_threshold(records, distances_by_visit, candidates)
    except ValueError as exc:
        return _usage_error("distances", str(exc))
    print("window_s,mean_distance")
    for window in sorted(table):
        print(f"{window:g},{table[window]:.6f}")
    print(f"chosen: {chosen:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scrape-audit",
        description="Quantify and repair distortion in re-scraped web content.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="run seed")
    common.add_argument(
        "--confidence", type=int, choices=(95, 99), default=95, help="CI level in percent"
    )

    p_audit = sub.add_parser("audit", parents=[common], help="run the full pipeline")
    p_audit.add_argument("--scenario", help="scenario JSON to self-host and audit")
    p_audit.add_argument("--visit-log", dest="visit_log", help="existing visit log JSONL")
    p_audit.add_argument("--out", required=True, help="output directory")
    p_audit.add_argument(
        "--delays",
        type=lambda s: _parse_int_list(s, "delays"),
        default=(0, 30, 60, 90),
        help="delay cohorts in days, comma-separated",
    )
    p_audit.add_argument("--compression", type=float, default=1.0, help="time compression factor")
    p_audit.add_argument("--max-parallel", dest="max_parallel", type=int, default=8)
    p_audit.add_argument("--per-host-gap-ms", dest="per_host_gap_ms", type=float, default=1000.0)
    p_audit.add_argument("--timeout", type=float, default=30.0, help="fetch timeout seconds")
    p_audit.add_argument("--refresh-window", dest="refresh_window", type=float, default=20.0)
    p_audit.add_argument("--max-scrape-gap", dest="max_scrape_gap", type=float, default=12.0)
    p_audit.add_argument("--domain-list", dest="domain_list", help="domain,outlet_type CSV")
    p_audit.add_argument("--url-rules", dest="url_rules", help="URL rules JSON")
    p_audit.add_argument("--classifier", help="adapter spec (default: env or baseline)")
    p_audit.add_argument("--strategies", help="debias strategies JSON")
    p_audit.set_defaults(func=cmd_audit)

    p_report = sub.add_parser("report", parents=[common], help="render figures for a run")
    p_report.add_argument("--run", required=True, help="audit output directory")
    p_report.add_argument("--out", help="figure output directory (default: run dir)")
    p_report.set_defaults(func=cmd_report)

    p_eval = sub.add_parser(
        "evaluate-urls", parents=[common], help="score the article identifier"
    )
    p_eval.add_argument("--corpus", help="url,is_article CSV (default: bundled corpus)")
    p_eval.add_argument("--url-rules", dest="url_rules", help="URL rules JSON")
    p_eval.add_argument("--domain-list", dest="domain_list", help="domain,outlet_type CSV")
    p_eval.add_argument("--weights", help="domain,count CSV for weighted metrics")
    p_eval.set_defaults(func=cmd_evaluate_urls)

    p_sim = sub.add_parser("simulate", parents=[common], help="serve a scenario")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON")
    p_sim.add_argument("--port", type=int, default=0)
    p_sim.add_argument("--compression", type=float, default=1.0)
    p_sim.add_argument("--duration", type=float, help="stop after N seconds")
    p_sim.add_argument(
        "--emit-visit-log", dest="emit_visit_log", help="write the synthetic visit log and exit"
    )
    p_sim.set_defaults(func=cmd_simulate)

    p_tune = sub.add_parser("tune-refresh", parents=[common], help="sweep dedup windows")
    p_tune.add_argument("--visit-log", dest="visit_log", required=True)
    p_tune.add_argument("--distances", required=True, help="distances CSV from an audit run")
    p_tune.add_argument("--candidates", default="5,10,20,40")
    p_tune.set_defaults(func=cmd_tune_refresh)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
