"""SVG figures and summary tables for audit runs.

Every plot ships with a ``.data.csv`` sidecar carrying exactly the plotted
values, so figures stay auditable without an SVG parser.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402 - backend must be set first

log = logging.getLogger(__name__)

plt.rcParams["svg.hashsalt"] = "scrape-audit"

_REP_ORDER = ("cleaned_text", "raw_text", "html_full")
_DAY_MS = 86_400_000


def _sidecar(path: Path) -> Path:
    return path.with_name(path.stem + ".data.csv")


def _finish(fig, path: Path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def plot_rolling_series(series_by_rep: dict, path: str | Path) -> list[Path]:
    """Rolling mean distance per representation with CI bands."""
    path = Path(path)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    t0 = min(
        (pt.window_end for pts in series_by_rep.values() for pt in pts), default=0
    )
    for rep in sorted(series_by_rep, key=lambda r: _REP_ORDER.index(r) if r in _REP_ORDER else 99):
        points = series_by_rep[rep]
        if not points:
            continue
        xs = [(pt.window_end - t0) / _DAY_MS for pt in points]
        ax.plot(xs, [pt.mean for pt in points], label=rep, linewidth=1.5)
        ax.fill_between(
            xs, [pt.ci_low for pt in points], [pt.ci_high for pt in points], alpha=0.2
        )
    ax.set_xlabel("days since first window")
    ax.set_ylabel("rolling mean normalized distance")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    _finish(fig, path)
    with _sidecar(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["representation", "window_end_ms", "mean", "ci_low", "ci_high", "n"])
        for rep in sorted(series_by_rep):
            for pt in series_by_rep[rep]:
                writer.writerow([rep, pt.window_end, repr(pt.mean), repr(pt.ci_low), repr(pt.ci_high), pt.n])
    return [path, _sidecar(path)]


def plot_histograms(distances_by_rep: dict, path: str | Path, bins: int = 20) -> list[Path]:
    """Distance histograms, one panel per representation."""
    path = Path(path)
    reps = [r for r in _REP_ORDER if r in distances_by_rep] or sorted(distances_by_rep)
    fig, axes = plt.subplots(1, len(reps), figsize=(4 * len(reps), 3.5), squeeze=False)
    edges = [i / bins for i in range(bins + 1)]
    rows = []
    for ax, rep in zip(axes[0], reps):
        values = distances_by_rep[rep]
        counts, _, _ = ax.hist(values, bins=edges, edgecolor="black", linewidth=0.4)
        ax.set_title(rep)
        ax.set_xlabel("normalized distance")
        ax.set_ylabel("pairs")
        for lo, hi, count in zip(edges, edges[1:], counts):
            rows.append([rep, repr(lo), repr(hi), int(count)])
    _finish(fig, path)
    with _sidecar(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["representation", "bin_low", "bin_high", "count"])
        writer.writerows(rows)
    return [path, _sidecar(path)]


def plot_cohort_means(rows: list[dict], path: str | Path) -> list[Path]:
    """Grouped bars: mean distance per delay cohort, one bar per profile.

    ``rows``: dicts with cohort, profile, mean, ci_low, ci_high, n.
    """
    path = Path(path)
    cohorts = sorted({row["cohort"] for row in rows})
    profiles = sorted({row["profile"] for row in rows})
    width = 0.8 / max(1, len(profiles))
    fig, ax = plt.subplots(figsize=(7, 4))
    for j, profile in enumerate(profiles):
        xs, ys, errs = [], [], []
        for i, cohort in enumerate(cohorts):
            row = next(
                (r for r in rows if r["cohort"] == cohort and r["profile"] == profile), None
            )
            if row is None:
                continue
            xs.append(i + (j - (len(profiles) - 1) / 2) * width)
            ys.append(row["mean"])
            lo = row.get("ci_low")
            hi = row.get("ci_high")
            if lo is None or hi is None:
                errs.append((0.0, 0.0))
            else:
                errs.append((row["mean"] - lo, hi - row["mean"]))
        yerr = [[e[0] for e in errs], [e[1] for e in errs]]
        ax.bar(xs, ys, width=width, yerr=yerr, capsize=3, label=f"profile {profile}")
    ax.set_xticks(range(len(cohorts)))
    ax.set_xticklabels([f"{c}d" for c in cohorts])
    ax.set_xlabel("delay cohort")
    ax.set_ylabel("mean normalized distance")
    ax.legend()
    _finish(fig, path)
    with _sidecar(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cohort", "profile", "mean", "ci_low", "ci_high", "n"])
        for row in sorted(rows, key=lambda r: (r["cohort"], r["profile"])):
            writer.writerow(
                [
                    row["cohort"],
                    row["profile"],
                    repr(row["mean"]),
                    "" if row.get("ci_low") is None else repr(row["ci_low"]),
                    "" if row.get("ci_high") is None else repr(row["ci_high"]),
                    row.get("n", ""),
                ]
            )
    return [path, _sidecar(path)]


def plot_category_shares(debias_result: dict, path: str | Path) -> list[Path]:
    """Horizontal in-situ vs ex-situ share bars, one panel per debias plan."""
    path = Path(path)
    plans = debias_result["plans"]
    fig, axes = plt.subplots(
        1, len(plans), figsize=(3.2 * len(plans), 4.5), squeeze=False, sharey=False
    )
    rows = []
    for ax, plan in zip(axes[0], plans):
        comparison = plan["comparison"]
        categories = [row["category"] for row in comparison["categories"]]
        n_in = sum(row["n_in"] for row in comparison["categories"]) or 1
        n_ex = sum(row["n_ex"] for row in comparison["categories"]) or 1
        in_shares = [100.0 * row["n_in"] / n_in for row in comparison["categories"]]
        ex_shares = [100.0 * row["n_ex"] / n_ex for row in comparison["categories"]]
        ys = range(len(categories))
        ax.barh([y + 0.2 for y in ys], in_shares, height=0.4, label="in-situ")
        ax.barh([y - 0.2 for y in ys], ex_shares, height=0.4, label="ex-situ")
        ax.set_yticks(list(ys))
        ax.set_yticklabels(categories, fontsize=7)
        ax.invert_yaxis()
        p = plan["p"]
        title = plan["plan"] + ("" if p is None else f"\np={p:.3g}")
        ax.set_title(title, fontsize=8)
        ax.set_xlabel("share %")
        for cat, share_in, share_ex in zip(categories, in_shares, ex_shares):
            rows.append([plan["plan"], cat, repr(share_in), repr(share_ex)])
    axes[0][0].legend(fontsize=7)
    _finish(fig, path)
    with _sidecar(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["plan", "category", "in_share_pct", "ex_share_pct"])
        writer.writerows(rows)
    return [path, _sidecar(path)]


def write_error_ledger_csv(rows: list[dict], path: str | Path) -> Path:
    """Per-cohort failure table in the summary-table column order."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cohort", "failures_A", "failures_B", "total_failures", "n"])
        for row in rows:
            writer.writerow(
                [row["cohort"], row["failures_A"], row["failures_B"], row["total_failures"], row["n"]]
            )
    return path
