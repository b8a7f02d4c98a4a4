"""Category-level bias detection and repair.

Joins per-visit category labels from the two collection sides, compares
their distributions (relative differences plus a chi-square independence
test of side x category), cross-tabulates label migrations, and evaluates
debiasing plans (score thresholds, domain exclusions, category exclusions)
until one aligns the two sides. Every exclusion a plan applies is itemized
in its report; nothing is dropped silently.
"""

from __future__ import annotations

import csv
import json
import logging
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path

from .classify import ERROR_CATEGORY
from .metrics import chi_square_independence

log = logging.getLogger(__name__)

SIDES = ("in_situ", "ex_situ")


@dataclass(frozen=True)
class ContentLabel:
    visit_id: str
    side: str
    category: str
    score: float

    def __post_init__(self):
        if self.side not in SIDES:
            raise ValueError(f"side must be one of {SIDES}, got {self.side!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0,1], got {self.score}")


@dataclass(frozen=True)
class DebiasPlan:
    name: str
    score_threshold: float = 0.0
    excluded_domains: frozenset = frozenset()
    excluded_categories: frozenset = frozenset()
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "excluded_domains", frozenset(self.excluded_domains))
        object.__setattr__(self, "excluded_categories", frozenset(self.excluded_categories))
        if not 0.0 <= self.score_threshold <= 1.0:
            raise ValueError("score_threshold must be in [0,1]")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0,1)")

    def describe(self) -> str:
        parts = [f"tau={self.score_threshold:g}"]
        if self.excluded_domains:
            parts.append("drop domains " + ",".join(sorted(self.excluded_domains)))
        if self.excluded_categories:
            parts.append("drop categories " + ",".join(sorted(self.excluded_categories)))
        return "; ".join(parts)


EMPTY_PLAN = DebiasPlan(name="none")


@dataclass(frozen=True)
class CategoryDistribution:
    side: str
    filter_desc: str
    counts: dict
    shares: dict
    flagged_empty: bool
    dropped: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def classify_content(visit_id: str, side: str, cleaned_text: str, adapter) -> ContentLabel:
    """Label one text; adapter failures become a countable error category."""
    try:
        category, score = adapter.classify([(visit_id, cleaned_text)])[visit_id]
    except Exception as exc:  # noqa: BLE001 - the pipeline must continue
        log.warning("classifier failed for %s: %s", visit_id, exc)
        category, score = ERROR_CATEGORY, 0.0
    return ContentLabel(visit_id=visit_id, side=side, category=category, score=score)


def classify_side(adapter, side: str, items) -> list[ContentLabel]:
    """Batch-label (visit_id, text) pairs for one side."""
    items = list(items)
    try:
        results = adapter.classify(items)
    except Exception as exc:  # noqa: BLE001
        log.warning("classifier batch failed: %s", exc)
        results = {}
    labels = []
    for visit_id, _ in items:
        category, score = results.get(visit_id, (ERROR_CATEGORY, 0.0))
        labels.append(ContentLabel(visit_id=visit_id, side=side, category=category, score=score))
    return labels


def _one_side(labels) -> str:
    sides = {label.side for label in labels}
    if len(sides) > 1:
        raise ValueError(f"labels span multiple sides: {sorted(sides)}")
    return sides.pop() if sides else ""


def distribution(labels, plan: DebiasPlan = EMPTY_PLAN, domain_by_visit=None) -> CategoryDistribution:
    """Counts and shares over the labels a plan keeps."""
    labels = list(labels)
    side = _one_side(labels)
    domain_by_visit = domain_by_visit or {}
    dropped = {"by_score": 0, "by_domain": 0, "by_category": 0}
    counts: Counter[str] = Counter()
    for label in labels:
        if label.score < plan.score_threshold:
            dropped["by_score"] += 1
            continue
        if domain_by_visit.get(label.visit_id) in plan.excluded_domains:
            dropped["by_domain"] += 1
            continue
        if label.category in plan.excluded_categories:
            dropped["by_category"] += 1
            continue
        counts[label.category] += 1
    total = sum(counts.values())
    flagged_empty = total == 0
    if flagged_empty and labels:
        log.warning("plan %r filtered out all %d %s labels", plan.name, len(labels), side)
    shares = {cat: counts[cat] / total for cat in counts} if total else {}
    return CategoryDistribution(
        side=side,
        filter_desc=plan.describe(),
        counts=dict(sorted(counts.items())),
        shares=dict(sorted(shares.items())),
        flagged_empty=flagged_empty,
        dropped=dropped,
    )


def compare_distributions(in_dist: CategoryDistribution, ex_dist: CategoryDistribution) -> dict:
    """Per-category relative differences plus a 2xK chi-square test.

    Categories absent on one side are padded with zero (they are the
    signal); categories absent on both sides do not appear at all.
    """
    categories = sorted(set(in_dist.counts) | set(ex_dist.counts))
    rows = []
    for cat in categories:
        n_in = in_dist.counts.get(cat, 0)
        n_ex = ex_dist.counts.get(cat, 0)
        if n_ex > 0:
            rel = 100.0 * (n_in - n_ex) / n_ex
            infinite = False
        else:
            rel = None
            infinite = True
        rows.append(
            {
                "category": cat,
                "n_in": n_in,
                "n_ex": n_ex,
                "relative_diff_pct": rel,
                "infinite": infinite,
            }
        )
    report = {
        "categories": rows,
        "n_in": in_dist.total,
        "n_ex": ex_dist.total,
        "chi2": None,
        "df": None,
        "p": None,
        "empty_side": in_dist.total == 0 or ex_dist.total == 0,
    }
    if not report["empty_side"] and len(categories) >= 2:
        table = [
            [in_dist.counts.get(cat, 0) for cat in categories],
            [ex_dist.counts.get(cat, 0) for cat in categories],
        ]
        stat, df, p = chi_square_independence(table)
        report.update(chi2=stat, df=df, p=p)
    return report


def migration_matrix(in_labels, ex_labels, tau: float = 0.0) -> dict:
    """Cross-tab of in-situ category (rows) vs ex-situ category (columns).

    Joined on visit_id; only in-situ labels with score >= tau form rows, so
    row totals equal the in-situ category counts at the same threshold.
    Each cell carries the count, the row percentage, and mean/sd of the
    ex-situ scores of its members.
    """
    in_labels = list(in_labels)
    ex_labels = list(ex_labels)
    if in_labels and _one_side(in_labels) != "in_situ":
        raise ValueError("in_labels must all be in_situ")
    if ex_labels and _one_side(ex_labels) != "ex_situ":
        raise ValueError("ex_labels must all be ex_situ")
    ex_by_visit = {label.visit_id: label for label in ex_labels}
    flows: dict[str, list] = defaultdict(list)
    for label in in_labels:
        if label.score < tau:
            continue
        ex = ex_by_visit.get(label.visit_id)
        if ex is None:
            continue
        flows[label.category].append(ex)
    categories = sorted(set(flows) | {ex.category for members in flows.values() for ex in members})
    rows = {}
    for in_cat in sorted(flows):
        members = flows[in_cat]
        total = len(members)
        cells = {}
        by_ex: dict[str, list] = defaultdict(list)
        for ex in members:
            by_ex[ex.category].append(ex.score)
        for ex_cat, scores in sorted(by_ex.items()):
            cells[ex_cat] = {
                "count": len(scores),
                "row_pct": 100.0 * len(scores) / total,
                "ex_score_mean": statistics.mean(scores),
                "ex_score_sd": statistics.stdev(scores) if len(scores) >= 2 else 0.0,
            }
        rows[in_cat] = {"total": total, "cells": cells}
    return {"categories": categories, "rows": rows}


def run_debias_search(in_labels, ex_labels, strategies, domain_by_visit=None) -> dict:
    """Evaluate plans in order; the first with p > alpha is the verdict."""
    strategies = list(strategies)
    if not strategies:
        raise ValueError("at least one debias plan is required")
    in_labels = list(in_labels)
    ex_labels = list(ex_labels)
    plans = []
    chosen = None
    for plan in strategies:
        in_dist = distribution(in_labels, plan, domain_by_visit)
        ex_dist = distribution(ex_labels, plan, domain_by_visit)
        report = compare_distributions(in_dist, ex_dist)
        aligned = report["p"] is not None and report["p"] > plan.alpha
        plans.append(
            {
                "plan": plan.name,
                "score_threshold": plan.score_threshold,
                "excluded_domains": sorted(plan.excluded_domains),
                "excluded_categories": sorted(plan.excluded_categories),
                "alpha": plan.alpha,
                "chi2": report["chi2"],
                "df": report["df"],
                "p": report["p"],
                "aligned": aligned,
                "dropped_in": in_dist.dropped,
                "dropped_ex": ex_dist.dropped,
                "n_in": in_dist.total,
                "n_ex": ex_dist.total,
                "comparison": report,
            }
        )
        if aligned and chosen is None:
            chosen = plan.name
    return {"plans": plans, "chosen": chosen}


def domain_distance_table(pairs, domain_by_visit) -> list[dict]:
    """Per-domain mean distances, split by profile, for domain diagnosis."""
    groups: dict[str, list] = defaultdict(list)
    for pair in pairs:
        domain = domain_by_visit.get(pair.visit_id, "unknown")
        groups[domain].append(pair)
    total = sum(len(members) for members in groups.values())
    rows = []
    for domain in sorted(groups):
        members = groups[domain]
        by_profile: dict[str, list] = defaultdict(list)
        for pair in members:
            by_profile[pair.profile_id].append(pair.distance)
        row = {
            "domain": domain,
            "n": len(members),
            "share": len(members) / total,
            "mean_distance": statistics.mean(p.distance for p in members),
        }
        for profile in ("A", "B"):
            values = by_profile.get(profile)
            row[f"n_{profile}"] = len(values) if values else 0
            row[f"mean_{profile}"] = statistics.mean(values) if values else None
        rows.append(row)
    return rows


def write_distributions_csv(distributions, path: str | Path):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["side", "filter", "category", "count", "share"])
        for dist in distributions:
            for cat in dist.counts:
                writer.writerow(
                    [dist.side, dist.filter_desc, cat, dist.counts[cat], repr(dist.shares[cat])]
                )


def write_migration_csv(matrix: dict, path: str | Path):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["in_category", "ex_category", "count", "row_pct", "ex_score_mean", "ex_score_sd"]
        )
        for in_cat, row in matrix["rows"].items():
            for ex_cat, cell in row["cells"].items():
                writer.writerow(
                    [
                        in_cat,
                        ex_cat,
                        cell["count"],
                        repr(cell["row_pct"]),
                        repr(cell["ex_score_mean"]),
                        repr(cell["ex_score_sd"]),
                    ]
                )


def write_debias_json(result: dict, path: str | Path):
    Path(path).write_text(
        json.dumps(result, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def write_domain_table_csv(rows, path: str | Path):
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["domain", "n", "share", "mean_distance", "n_A", "mean_A", "n_B", "mean_B"]
        )
        for row in rows:
            writer.writerow(
                [
                    row["domain"],
                    row["n"],
                    repr(row["share"]),
                    repr(row["mean_distance"]),
                    row["n_A"],
                    "" if row["mean_A"] is None else repr(row["mean_A"]),
                    row["n_B"],
                    "" if row["mean_B"] is None else repr(row["mean_B"]),
                ]
            )
