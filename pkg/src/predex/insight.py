"""Analyst-facing artifacts: score histograms, pivot views, correlation
recommendations with natural-language sentences, subspace scores, and reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from . import dataset as ds_mod
from .dataset import BinningSpec, CategoricalBins, Dataset, discretize, format_epoch
from .errors import ConfigError, DataError, UsageError
from .predicate import (
    Clause,
    MemberOf,
    Predicate,
    Range,
    Selection,
    evaluate,
    to_text,
)
from .scoring import ScoreVector, fit_gaussian, score_points
from .search import Explanation

RECOMMENDATION_MIN_CORRELATION = 0.3


@dataclass(frozen=True)
class Histogram:
    edges: tuple[float, ...]
    series: tuple[tuple[str, tuple[int, ...]], ...]  # (label, counts per bin)

    def to_chart_spec(self) -> dict:
        return {
            "type": "histogram",
            "edges": list(self.edges),
            "series": [{"label": label, "counts": list(counts)} for label, counts in self.series],
        }


@dataclass(frozen=True)
class PivotBar:
    label: str
    mean_score: float
    count: int


@dataclass(frozen=True)
class PivotView:
    pivot: str
    bars: tuple[PivotBar, ...]
    highlighted: tuple[str, ...]

    def to_chart_spec(self) -> dict:
        return {
            "type": "bar",
            "categories": [b.label for b in self.bars],
            "series": [
                {
                    "label": "mean anomaly score",
                    "values": [b.mean_score for b in self.bars],
                    "counts": [b.count for b in self.bars],
                }
            ],
            "highlighted": list(self.highlighted),
        }


@dataclass(frozen=True)
class Recommendation:
    attribute: str
    correlation: float
    direction: str  # "high" | "low"
    sentence: str
    chart: dict

    def to_dict(self) -> dict:
        return {
            "attribute": self.attribute,
            "correlation": self.correlation,
            "direction": self.direction,
            "sentence": self.sentence,
            "chart": self.chart,
        }


@dataclass(frozen=True)
class SubspaceRow:
    features: tuple[str, ...]
    scores: tuple[float, ...]
    anomalous_count: int

    def to_dict(self) -> dict:
        return {
            "features": list(self.features),
            "scores": list(self.scores),
            "anomalous_count": self.anomalous_count,
        }


# -- histograms ----------------------------------------------------------------


def score_histogram(
    sv: ScoreVector, selections: Sequence[tuple[str, Selection]], bins: int = 40
) -> Histogram:
    """Per-selection score counts over shared equal-width edges spanning the
    global score range, so series superimpose exactly."""
    if not selections:
        raise ConfigError("need at least one selection")
    if bins < 1:
        raise ConfigError("bins must be >= 1")
    scores = sv.scores
    lo, hi = float(scores.min()), float(scores.max())
    if lo == hi:
        hi = lo + 1.0  # single-valued scores still get a well-formed bin
    edges = np.linspace(lo, hi, bins + 1)
    series = []
    for label, sel in selections:
        counts, _ = np.histogram(scores[sel.mask], bins=edges)
        series.append((label, tuple(int(c) for c in counts)))
    return Histogram(tuple(float(e) for e in edges), tuple(series))


# -- pivot ----------------------------------------------------------------------


def _single_conjunction(pred: Predicate):
    if pred.negated or len(pred.terms) != 1:
        raise UsageError("pivot requires a non-negated single-conjunction predicate")
    return pred.terms[0]


def _pivot_groups(ds: Dataset, pivot: str, binning: BinningSpec):
    """(label, mask) per pivot value or bin, in deterministic order."""
    feat = ds.feature(pivot)
    col = ds.column(pivot)
    table = discretize(ds, binning, [pivot])[pivot]
    groups = []
    if isinstance(table, CategoricalBins):
        for value in table.values:
            groups.append((value, col == value))
        return groups, table
    is_dt = feat.kind == ds_mod.DATETIME
    if table.degenerate:
        v = table.edges[0]
        label = format_epoch(v) if is_dt else _fmt_num(v)
        return [(label, col == v)], table
    for lo, hi, last in table.intervals():
        mask = (col >= lo) & ((col <= hi) if last else (col < hi))
        if is_dt:
            label = f"[{format_epoch(lo)}, {format_epoch(hi)}{']' if last else ')'}"
        else:
            label = f"[{_fmt_num(lo)}, {_fmt_num(hi)}{']' if last else ')'}"
        groups.append((label, mask))
    return groups, table


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.6g}"


def _highlighted_labels(clause: Clause, groups, table) -> tuple[str, ...]:
    if isinstance(clause.body, MemberOf):
        present = {label for label, _ in groups}
        return tuple(v for v in sorted(clause.body.values) if v in present)
    body = clause.body
    out = []
    if isinstance(table, CategoricalBins):
        return ()
    if table.degenerate:
        lo = table.edges[0]
        inside = (body.lo < lo or (body.lo == lo and body.lo_incl)) and (
            body.hi > lo or (body.hi == lo and body.hi_incl)
        )
        return tuple(label for label, _ in groups) if inside else ()
    for (label, _), (lo, hi, last) in zip(groups, table.intervals()):
        if body.lo < hi and body.hi > lo:  # interval overlap
            out.append(label)
        elif body.hi == lo and body.hi_incl:
            out.append(label)
    return tuple(out)


def pivot_view(
    ds: Dataset,
    sv: ScoreVector,
    pred: Predicate,
    pivot: str,
    binning: BinningSpec | None = None,
) -> PivotView:
    """Bars of mean anomaly score per pivot value/bin over the rows matching
    the predicate minus its pivot clause; the predicate's own pivot values are
    highlighted."""
    conj = _single_conjunction(pred)
    pivot_clause = conj.clause_for(pivot)
    if pivot_clause is None:
        raise UsageError(f"pivot feature {pivot!r} is not in the predicate")
    binning = binning or BinningSpec()
    rest = conj.without(pivot)
    if rest is None:
        filter_mask = np.ones(ds.n_rows, dtype=bool)
    else:
        filter_mask = evaluate(Predicate([rest]), ds).mask
    groups, table = _pivot_groups(ds, pivot, binning)
    scores = sv.scores
    bars = []
    kept_groups = []
    for label, mask in groups:
        m = mask & filter_mask
        count = int(m.sum())
        if count == 0:
            continue
        bars.append(PivotBar(label, float(scores[m].mean()), count))
        kept_groups.append((label, mask))
    highlighted = _highlighted_labels(pivot_clause, kept_groups, table)
    return PivotView(pivot, tuple(bars), highlighted)


# -- recommendations -------------------------------------------------------------


def _prose_value(v: float, as_datetime: bool) -> str:
    return format_epoch(v) if as_datetime else _fmt_num(v)


def _clause_prose(clause: Clause) -> str:
    body = clause.body
    if isinstance(body, MemberOf):
        values = sorted(body.values)
        if len(values) == 1:
            return f"{clause.feature} is {values[0]}"
        if len(values) == 2:
            return f"{clause.feature} is {values[0]} and {values[1]}"
        return f"{clause.feature} is {', '.join(values[:-1])}, and {values[-1]}"
    lo_b = not math.isinf(body.lo)
    hi_b = not math.isinf(body.hi)
    if lo_b and hi_b and body.lo == body.hi:
        return f"{clause.feature} is {_prose_value(body.lo, body.as_datetime)}"
    if lo_b and hi_b:
        return (
            f"{clause.feature} is between {_prose_value(body.lo, body.as_datetime)} "
            f"and {_prose_value(body.hi, body.as_datetime)}"
        )
    if lo_b:
        qual = "at least" if body.lo_incl else "greater than"
        return f"{clause.feature} is {qual} {_prose_value(body.lo, body.as_datetime)}"
    qual = "at most" if body.hi_incl else "less than"
    return f"{clause.feature} is {qual} {_prose_value(body.hi, body.as_datetime)}"


def _pivot_values_prose(clause: Clause) -> str:
    body = clause.body
    if isinstance(body, MemberOf):
        values = sorted(body.values)
        if len(values) == 1:
            return values[0]
        if len(values) == 2:
            return f"{values[0]} and {values[1]}"
        return f"{', '.join(values[:-1])}, and {values[-1]}"
    if body.lo == body.hi:
        return _prose_value(body.lo, body.as_datetime)
    prose = _clause_prose(clause)
    return prose[len(clause.feature) + len(" is ") :]


def render_sentence(rec_attribute: str, direction: str, pred: Predicate, pivot: str) -> str:
    """Sentence form: "Average {attr} is {high|low} when {pivot} is {values}
    compared to other {pivot}'s when {remaining clauses}"."""
    conj = _single_conjunction(pred)
    pivot_clause = conj.clause_for(pivot)
    if pivot_clause is None:
        raise UsageError(f"pivot feature {pivot!r} is not in the predicate")
    head = (
        f"Average {rec_attribute} is {direction} when {pivot} is "
        f"{_pivot_values_prose(pivot_clause)} compared to other {pivot}'s"
    )
    rest = conj.without(pivot)
    if rest is None:
        return head
    clauses = " and ".join(_clause_prose(c) for c in rest.clauses)
    return f"{head} when {clauses}"


def recommend(
    ds: Dataset,
    sv: ScoreVector,
    pred: Predicate,
    pivot: str,
    binning: BinningSpec | None = None,
) -> list[Recommendation]:
    """Numeric attributes outside the predicate whose |Pearson r| with the
    anomaly score over the filtered subset exceeds 0.3, strongest first."""
    conj = _single_conjunction(pred)
    if conj.clause_for(pivot) is None:
        raise UsageError(f"pivot feature {pivot!r} is not in the predicate")
    rest = conj.without(pivot)
    if rest is None:
        filter_mask = np.ones(ds.n_rows, dtype=bool)
    else:
        filter_mask = evaluate(Predicate([rest]), ds).mask
    if int(filter_mask.sum()) < 3:
        raise DataError("need at least 3 filtered rows for recommendations")
    pred_mask = evaluate(pred, ds).mask
    scores = sv.scores
    in_pred = conj.features
    recs = []
    for feat in ds.schema:
        if feat.kind == ds_mod.CATEGORICAL or feat.name in in_pred:
            continue
        col = ds.column(feat.name)
        valid = filter_mask & ~np.isnan(col)
        if int(valid.sum()) < 3:
            continue
        x = col[valid]
        y = scores[valid]
        if x.std() == 0 or y.std() == 0:
            continue  # degenerate attribute
        r = float(np.corrcoef(x, y)[0, 1])
        if not math.isfinite(r) or abs(r) <= RECOMMENDATION_MIN_CORRELATION:
            continue
        inside = col[pred_mask & ~np.isnan(col)]
        direction = "high" if inside.size and float(inside.mean()) > float(x.mean()) else "low"
        sentence = render_sentence(feat.name, direction, pred, pivot)
        chart = _attribute_chart(ds, feat.name, pivot, filter_mask, binning or BinningSpec())
        recs.append(Recommendation(feat.name, r, direction, sentence, chart))
    recs.sort(key=lambda rec: (-abs(rec.correlation), rec.attribute))
    return recs


def _attribute_chart(
    ds: Dataset, attribute: str, pivot: str, filter_mask: np.ndarray, binning: BinningSpec
) -> dict:
    """Pivot-style bar spec with the attribute's mean as bar height."""
    groups, _ = _pivot_groups(ds, pivot, binning)
    col = ds.column(attribute)
    categories, values, counts = [], [], []
    for label, mask in groups:
        m = mask & filter_mask & ~np.isnan(col)
        n = int(m.sum())
        if n == 0:
            continue
        categories.append(label)
        values.append(float(col[m].mean()))
        counts.append(n)
    return {
        "type": "bar",
        "categories": categories,
        "series": [{"label": f"mean {attribute}", "values": values, "counts": counts}],
        "highlighted": [],
    }


# -- subspaces -------------------------------------------------------------------


def subspace_scores(
    ds: Dataset,
    max_dim: int = 3,
    threshold: float | None = None,
    allow_large: bool = False,
) -> list[SubspaceRow]:
    """Per-row Gaussian scores for every numeric-feature subset of size
    <= max_dim, ranked by the count of scores above the threshold (default:
    the pooled 95th percentile)."""
    if not (1 <= max_dim <= 3):
        raise ConfigError("max_dim must be between 1 and 3")
    numeric = [f.name for f in ds.schema if f.kind == ds_mod.NUMERIC]
    if not numeric:
        raise ConfigError("no numeric features for subspace scoring")
    if len(numeric) > 12 and not allow_large:
        raise ConfigError(
            f"{len(numeric)} numeric features would enumerate "
            f"{sum(math.comb(len(numeric), k) for k in range(1, max_dim + 1))} subspaces; "
            "pass allow_large to proceed"
        )
    subsets = []
    for k in range(1, max_dim + 1):
        subsets.extend(combinations(numeric, k))
    scored = []
    for subset in subsets:
        model = fit_gaussian(ds, features=list(subset))
        sv = score_points(model, ds)
        scored.append((subset, sv.scores))
    if threshold is None:
        pooled = np.concatenate([s for _, s in scored])
        threshold = float(np.quantile(pooled, 0.95))
    rows = [
        SubspaceRow(
            tuple(subset),
            tuple(float(x) for x in scores),
            int((scores > threshold).sum()),
        )
        for subset, scores in scored
    ]
    rows.sort(key=lambda r: (-r.anomalous_count, len(r.features), r.features))
    return rows


# -- report ----------------------------------------------------------------------


@dataclass(frozen=True)
class Bookmark:
    chart: dict
    sentence: str = ""


def _md_escape(text: str) -> str:
    return text.replace("|", "\\|")


def _as_dict(exp) -> dict:
    return exp.to_dict() if hasattr(exp, "to_dict") else exp


def build_report(
    explanations: Sequence,
    bookmarks: Sequence[Bookmark] = (),
    charts: Sequence[tuple[str, dict]] = (),
) -> tuple[str, dict]:
    """Deterministic report: markdown text plus a JSON-able data sidecar.

    ``explanations`` may be Explanation objects or their wire dicts; ``charts``
    are (title, chart spec) pairs; bookmarks contribute evidence sections in
    order.
    """
    if not explanations:
        raise ConfigError("report needs at least one explanation")
    lines = ["# Anomaly explanation report", ""]
    lines.append("## Explanations")
    lines.append("")
    lines.append("| # | predicate | influence | bf10 | evidence | coverage |")
    lines.append("|---|-----------|-----------|------|----------|----------|")
    for i, exp in enumerate(explanations, start=1):
        d = _as_dict(exp)
        if d["bf10"] is not None:
            bf = _fmt_num(d["bf10"])
        elif d["category"] is not None:
            bf = "inf"  # overflow sentinel: category still meaningful
        else:
            bf = "n/a"
        cat = d["category"] or "n/a"
        lines.append(
            f"| {i} | `{_md_escape(d['predicate'])}` | {_fmt_num(d['influence'])} "
            f"| {bf} | {cat} | {d['coverage']['count']} "
            f"({100 * d['coverage']['fraction']:.1f}%) |"
        )
    lines.append("")
    if charts:
        lines.append("## Charts")
        lines.append("")
        for title, _ in charts:
            lines.append(f"- {title}")
        lines.append("")
    if bookmarks:
        lines.append("## Evidence")
        lines.append("")
        for i, bm in enumerate(bookmarks, start=1):
            lines.append(f"### Evidence {i}")
            lines.append("")
            if bm.sentence:
                lines.append(bm.sentence)
                lines.append("")
    md = "\n".join(lines) + "\n"
    sidecar = {
        "explanations": [_as_dict(exp) for exp in explanations],
        "charts": [{"title": title, "chart": chart} for title, chart in charts],
        "bookmarks": [{"sentence": bm.sentence, "chart": bm.chart} for bm in bookmarks],
    }
    return md, sidecar


def sidecar_to_json(sidecar: dict) -> str:
    return json.dumps(sidecar, indent=2, sort_keys=True) + "\n"


def explanations_csv(explanations: Sequence) -> str:
    """Delimited table accompanying the report."""
    header = "index,predicate,influence,strictness,bf10,category,coverage_count,coverage_fraction"
    rows = [header]
    for i, exp in enumerate(explanations, start=1):
        d = _as_dict(exp)
        bf = "" if d["bf10"] is None else repr(d["bf10"])
        cat = d["category"] or ""
        pred = d["predicate"].replace('"', '""')
        rows.append(
            f'{i},"{pred}",{repr(d["influence"])},{repr(d["strictness"])},'
            f"{bf},{cat},{d['coverage']['count']},{repr(d['coverage']['fraction'])}"
        )
    return "\n".join(rows) + "\n"
