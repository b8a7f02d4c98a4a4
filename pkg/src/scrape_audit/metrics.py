"""Distance pairs and the statistics behind the audit's figures and tables.

Distances are normalized Levenshtein values per representation. The rolling
series, group contrasts, correlation, and chi-square tests all use normal or
classic small-sample approximations implemented in _special; pairwise group
comparisons substitute Welch t-tests with Holm adjustment for Tukey HSD and
say so in every report.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Callable, Iterable, Sequence

from scrape_audit._special import chi2_sf, t_sf_two_sided, z_value
from scrape_audit.editdist import levenshtein, normalized_distance
from scrape_audit.extraction import ExtractionCache, extract

log = logging.getLogger(__name__)

DAY_MS = 86_400_000

PAIRWISE_METHOD_NOTE = (
    "pairwise comparisons use Welch two-sample t-tests with Holm adjustment "
    "in place of Tukey HSD"
)


@dataclass(frozen=True)
class DistancePair:
    visit_id: str
    representation: str
    delay_days: int
    profile_id: str
    distance: float
    in_len: int
    ex_len: int
    truncated: bool = False


@dataclass(frozen=True)
class SeriesPoint:
    window_end: int  # epoch ms, a UTC day boundary
    mean: float
    ci_low: float
    ci_high: float
    n: int


@dataclass(frozen=True)
class StatsSummary:
    group: str
    mean: float
    ci_low: float | None
    ci_high: float | None
    n: int
    level: float
    diff: float | None = None
    adjusted_p: float | None = None


def pair_distance(
    visit,
    scrape,
    representation: str,
    store,
    cache: ExtractionCache | None = None,
    max_chars: int | None = None,
) -> DistancePair:
    """Normalized distance between the two sides of one visit.

    The in-situ side comes from the visit's blob; the ex-situ side from the
    scrape's blob, or empty text when the scrape failed or the blob is gone.
    ``max_chars`` optionally truncates both texts (off by default); affected
    pairs are marked.
    """
    if visit.visit_id != scrape.visit_id:
        raise ValueError(
            f"visit ids differ: {visit.visit_id!r} vs {scrape.visit_id!r}"
        )

    def side(ref) -> str:
        if not ref:
            return ""
        if not store.exists(ref):
            log.warning("missing blob %s for visit %s", ref, visit.visit_id)
            return ""
        html = store.text(ref)
        if cache is not None:
            return cache.text(html, representation)
        return extract(html, representation)

    in_text = side(visit.html_ref)
    ex_text = side(scrape.html_ref)
    truncated = False
    if max_chars is not None and (len(in_text) > max_chars or len(ex_text) > max_chars):
        truncated = True
        in_text = in_text[:max_chars]
        ex_text = ex_text[:max_chars]
    return DistancePair(
        visit_id=visit.visit_id,
        representation=representation,
        delay_days=scrape.delay_days,
        profile_id=scrape.profile,
        distance=normalized_distance(in_text, ex_text),
        in_len=len(in_text),
        ex_len=len(ex_text),
        truncated=truncated,
    )


def _mean_ci(values: Sequence[float], level: float) -> tuple[float, float, float]:
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, mean, mean
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    half = z_value(level) * math.sqrt(var / n)
    return mean, mean - half, mean + half


def rolling_mean(
    items: Iterable[tuple[int, float]],
    window_days: float = 7.0,
    level: float = 0.99,
    exclude_first_days: float | None = None,
) -> list[SeriesPoint]:
    """Trailing-window means at UTC day boundaries.

    ``items`` are (visit time epoch ms, distance). Each boundary covers the
    half-open window (end - window, end]; boundaries with no items are
    omitted. ``exclude_first_days`` drops items within that many days of the
    earliest item (launch masking for trend reads).
    """
    data = sorted(items)
    if not data:
        return []
    if exclude_first_days is not None:
        cutoff = data[0][0] + exclude_first_days * DAY_MS
        data = [(t, v) for t, v in data if t >= cutoff]
        if not data:
            return []
    window_ms = window_days * DAY_MS
    first_end = (data[0][0] // DAY_MS + 1) * DAY_MS
    last_end = (data[-1][0] // DAY_MS + 1) * DAY_MS
    points: list[SeriesPoint] = []
    end = first_end
    while end <= last_end:
        inside = [v for t, v in data if end - window_ms < t <= end]
        if inside:
            mean, lo, hi = _mean_ci(inside, level)
            points.append(
                SeriesPoint(window_end=end, mean=mean, ci_low=lo, ci_high=hi, n=len(inside))
            )
        end += DAY_MS
    return points


def holm_adjust(pvalues: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, input order preserved."""
    k = len(pvalues)
    order = sorted(range(k), key=lambda i: pvalues[i])
    out = [0.0] * k
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, min(1.0, (k - rank) * pvalues[idx]))
        out[idx] = running
    return out


def welch_p(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Two-sided Welch t-test p-value; degenerate variances handled explicitly."""
    nx, ny = len(xs), len(ys)
    mx, my = sum(xs) / nx, sum(ys) / ny
    vx = sum((v - mx) ** 2 for v in xs) / (nx - 1) if nx > 1 else 0.0
    vy = sum((v - my) ** 2 for v in ys) / (ny - 1) if ny > 1 else 0.0
    se2 = vx / nx + vy / ny
    diff = mx - my
    if se2 == 0.0:
        return 1.0 if diff == 0.0 else 0.0
    t = diff / math.sqrt(se2)
    # Welch-Satterthwaite df from variance shares: the textbook form squares
    # se2 and underflows to df=0/0 when variances sit near 1e-180
    rx = (vx / nx) / se2
    ry = (vy / ny) / se2
    den = 0.0
    if nx > 1:
        den += rx * rx / (nx - 1)
    if ny > 1:
        den += ry * ry / (ny - 1)
    if den == 0.0:
        return 1.0 if diff == 0.0 else 0.0
    return t_sf_two_sided(t, 1.0 / den)


def group_stats(
    items: Iterable,
    key: Callable,
    value: Callable | None = None,
    level: float = 0.95,
) -> list[StatsSummary]:
    """Per-group mean/CI rows followed by all Holm-adjusted pairwise rows.

    Groups with fewer than two values get no CI (None bounds). Pairwise rows
    are labeled "a vs b" over sorted group labels; their p-values need both
    sides to carry at least two values, otherwise adjusted_p stays None.
    """
    if value is None:
        value = lambda item: item.distance
    groups: dict[str, list[float]] = {}
    for item in items:
        groups.setdefault(str(key(item)), []).append(float(value(item)))
    labels = sorted(groups)
    rows: list[StatsSummary] = []
    for label in labels:
        values = groups[label]
        mean, lo, hi = _mean_ci(values, level)
        if len(values) < 2:
            rows.append(
                StatsSummary(group=label, mean=mean, ci_low=None, ci_high=None,
                             n=len(values), level=level)
            )
        else:
            rows.append(
                StatsSummary(group=label, mean=mean, ci_low=lo, ci_high=hi,
                             n=len(values), level=level)
            )
    pairs = [(a, b) for i, a in enumerate(labels) for b in labels[i + 1 :]]
    raw_ps: list[float | None] = []
    for a, b in pairs:
        if len(groups[a]) >= 2 and len(groups[b]) >= 2:
            raw_ps.append(welch_p(groups[a], groups[b]))
        else:
            raw_ps.append(None)
    testable = [p for p in raw_ps if p is not None]
    adjusted = iter(holm_adjust(testable))
    for (a, b), raw in zip(pairs, raw_ps):
        xs, ys = groups[a], groups[b]
        diff = sum(xs) / len(xs) - sum(ys) / len(ys)
        adj = next(adjusted) if raw is not None else None
        if len(xs) > 1 and len(ys) > 1:
            mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
            vx = sum((v - mx) ** 2 for v in xs) / (len(xs) - 1)
            vy = sum((v - my) ** 2 for v in ys) / (len(ys) - 1)
            se = math.sqrt(vx / len(xs) + vy / len(ys))
            lo, hi = diff - z_value(level) * se, diff + z_value(level) * se
        else:
            lo = hi = None
        rows.append(
            StatsSummary(group=f"{a} vs {b}", mean=diff, ci_low=lo, ci_high=hi,
                         n=len(xs) + len(ys), level=level, diff=diff, adjusted_p=adj)
        )
    return rows


def pearson(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Sample correlation with a t-transform p-value on n-2 degrees of freedom."""
    n = len(x)
    if n != len(y):
        raise ValueError(f"length mismatch: {n} vs {len(y)}")
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    # exact-constancy check: a constant series still yields nonzero squared
    # deviations through mean rounding, which would turn into a noise r
    if all(v == x[0] for v in x) or all(v == y[0] for v in y):
        raise ValueError("correlation undefined: zero variance")
    mx = sum(x) / n
    my = sum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    # normalize by the largest deviation so squaring can neither underflow
    # into subnormals nor overflow; r is scale-invariant either way
    span_x = max(abs(v) for v in dx)
    span_y = max(abs(v) for v in dy)
    if span_x == 0.0 or span_y == 0.0:
        raise ValueError("correlation undefined: zero variance")
    dx = [v / span_x for v in dx]
    dy = [v / span_y for v in dy]
    sxx = sum(v * v for v in dx)
    syy = sum(v * v for v in dy)
    sxy = sum(a * b for a, b in zip(dx, dy))
    r = max(-1.0, min(1.0, sxy / math.sqrt(sxx * syy)))
    if abs(r) == 1.0:
        return r, 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return r, t_sf_two_sided(t, n - 2)


def chi_square_independence(table: Sequence[Sequence[float]]) -> tuple[float, int, float]:
    """Pearson chi-square test of independence on a 2D count table."""
    rows = [list(map(float, row)) for row in table]
    if len(rows) < 2 or any(len(r) != len(rows[0]) for r in rows) or len(rows[0]) < 2:
        raise ValueError("table must be rectangular with at least 2 rows and 2 columns")
    if any(v < 0 for r in rows for v in r):
        raise ValueError("counts must be non-negative")
    total = sum(sum(r) for r in rows)
    row_sums = [sum(r) for r in rows]
    col_sums = [sum(r[j] for r in rows) for j in range(len(rows[0]))]
    zero_rows = [i for i, s in enumerate(row_sums) if s == 0]
    zero_cols = [j for j, s in enumerate(col_sums) if s == 0]
    if zero_rows or zero_cols:
        raise ValueError(
            f"zero marginal: rows {zero_rows} cols {zero_cols} have no observations"
        )
    stat = 0.0
    for i, row in enumerate(rows):
        for j, observed in enumerate(row):
            expected = row_sums[i] * col_sums[j] / total
            stat += (observed - expected) ** 2 / expected
    df = (len(rows) - 1) * (len(rows[0]) - 1)
    return stat, df, chi2_sf(stat, df)


def write_distances_csv(pairs: Iterable[DistancePair], sink: str | Path | IO[str]):
    """Distances CSV, deterministically sorted."""
    ordered = sorted(
        pairs, key=lambda p: (p.visit_id, p.representation, p.delay_days, p.profile_id)
    )
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8", newline="") if own else sink
    try:
        writer = csv.writer(fh)
        writer.writerow(
            ["visit_id", "representation", "delay_days", "profile", "distance", "in_len", "ex_len"]
        )
        for p in ordered:
            writer.writerow(
                [p.visit_id, p.representation, p.delay_days, p.profile_id,
                 repr(p.distance), p.in_len, p.ex_len]
            )
    finally:
        if own:
            fh.close()


def read_distances_csv(source: str | Path | IO[str]) -> list[DistancePair]:
    own = isinstance(source, (str, Path))
    fh = open(source, encoding="utf-8", newline="") if own else source
    try:
        reader = csv.DictReader(fh)
        expected = ["visit_id", "representation", "delay_days", "profile", "distance", "in_len", "ex_len"]
        if reader.fieldnames != expected:
            raise ValueError(f"distances CSV must have header {','.join(expected)}")
        return [
            DistancePair(
                visit_id=row["visit_id"],
                representation=row["representation"],
                delay_days=int(row["delay_days"]),
                profile_id=row["profile"],
                distance=float(row["distance"]),
                in_len=int(row["in_len"]),
                ex_len=int(row["ex_len"]),
            )
            for row in reader
        ]
    finally:
        if own:
            fh.close()


def write_series_csv(points: Iterable[SeriesPoint], sink: str | Path | IO[str]):
    own = isinstance(sink, (str, Path))
    fh = open(sink, "w", encoding="utf-8", newline="") if own else sink
    try:
        writer = csv.writer(fh)
        writer.writerow(["window_end_ms", "mean", "ci_low", "ci_high", "n"])
        for p in points:
            writer.writerow([p.window_end, repr(p.mean), repr(p.ci_low), repr(p.ci_high), p.n])
    finally:
        if own:
            fh.close()


def stats_report(rows: list[StatsSummary], level: float) -> dict:
    """JSON-ready stats report with the comparison method recorded up front."""
    return {
        "confidence_level": level,
        "method": PAIRWISE_METHOD_NOTE,
        "groups": [
            {
                "group": r.group, "mean": r.mean, "ci_low": r.ci_low,
                "ci_high": r.ci_high, "n": r.n,
            }
            for r in rows
            if r.diff is None
        ],
        "pairwise": [
            {
                "comparison": r.group, "diff": r.diff, "ci_low": r.ci_low,
                "ci_high": r.ci_high, "n": r.n, "adjusted_p": r.adjusted_p,
            }
            for r in rows
            if r.diff is not None
        ],
    }


def write_stats_json(rows: list[StatsSummary], level: float, sink: str | Path):
    Path(sink).write_text(
        json.dumps(stats_report(rows, level), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
