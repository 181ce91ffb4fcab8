"""Predicate induction: bottom-up likelihood-influence search and the
recursive Bayes-factor expansion strategy.

The influence search keeps a pool of candidate conjunctions (deduplicated by
canonical key, each cached with its selection and influence) and repeats
merge -> intersect -> prune until the best influence stops improving. Ties
are broken everywhere by (influence desc, fewer clauses, smaller selection,
canonical key) so results are deterministic under any worker count.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import dataset as ds_mod
from .bayes import (
    DEFAULT_PRIOR_SCALE,
    BayesResult,
    bayes_for_groups,
)
from .dataset import (
    BinningSpec,
    CategoricalBins,
    Dataset,
    MAX_CATEGORICAL_CARDINALITY,
    NumericBins,
    discretize,
)
from .errors import ConfigError, InsufficientDataError, NoExplanationError
from .predicate import (
    Clause,
    Conjunction,
    MemberOf,
    Predicate,
    Range,
    Selection,
    canonical_key,
    disjoin,
    evaluate,
    intersect,
    merge,
    to_text,
)
from .scoring import ScoreVector, Strictness, likelihood_influence

logger = logging.getLogger(__name__)

INFLUENCE = "influence"
BAYES = "bayes"


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = INFLUENCE
    strictness: float = 1.0
    binning: BinningSpec = field(default_factory=BinningSpec)
    max_iterations: int = 50
    max_explanations: int = 5
    user_points: frozenset[int] | None = None
    workers: int = 1
    prior_scale: float = DEFAULT_PRIOR_SCALE

    def __post_init__(self):
        if self.strategy not in (INFLUENCE, BAYES):
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        Strictness(self.strictness)  # validates (0, 1]
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if self.max_explanations < 1:
            raise ConfigError("max_explanations must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


@dataclass(frozen=True)
class Explanation:
    predicate: Predicate
    influence: float
    strictness: float
    bayes: BayesResult | None
    coverage_count: int
    coverage_fraction: float
    mean_score_inside: float
    mean_score_outside: float | None
    trace: tuple[float, ...]
    strategy: str

    def to_dict(self) -> dict:
        """Wire form. Non-finite Bayes sentinels become null (category kept)."""

        def _num(v):
            if v is None or not math.isfinite(v):
                return None
            return float(v)

        return {
            "predicate": to_text(self.predicate),
            "influence": float(self.influence),
            "strictness": float(self.strictness),
            "bf10": _num(self.bayes.bf10) if self.bayes else None,
            "log_bf10": _num(self.bayes.log_bf10) if self.bayes else None,
            "category": self.bayes.category if self.bayes else None,
            "coverage": {
                "count": self.coverage_count,
                "fraction": self.coverage_fraction,
            },
            "mean_score_inside": _num(self.mean_score_inside),
            "mean_score_outside": _num(self.mean_score_outside),
            "trace": [float(x) for x in self.trace],
            "strategy": self.strategy,
        }


def explanations_to_json(explanations: Iterable[Explanation]) -> str:
    import json

    return json.dumps([e.to_dict() for e in explanations], indent=2, sort_keys=True) + "\n"


# -- candidate pool -----------------------------------------------------------


class Candidate:
    __slots__ = ("conj", "key", "mask", "count", "influence")

    def __init__(self, conj: Conjunction, mask: np.ndarray, influence: float | None = None):
        self.conj = conj
        self.key = to_text(Predicate([conj]))
        self.mask = mask
        self.count = int(mask.sum())
        self.influence = influence

    def sort_key(self):
        return (-self.influence, len(self.conj.clauses), self.count, self.key)


class CandidatePool:
    """Deduplicated candidates plus the dataset/bin context they evaluate in."""

    def __init__(
        self, ds: Dataset, bins: dict, candidates: Iterable[Candidate] = (), workers: int = 1
    ):
        self.ds = ds
        self.bins = bins
        self.workers = workers
        self._influence_key: tuple[int, float] | None = None
        self._by_key: dict[str, Candidate] = {}
        for cand in candidates:
            self.add(cand)

    def add(self, cand: Candidate):
        self._by_key.setdefault(cand.key, cand)

    def remove(self, key: str):
        self._by_key.pop(key, None)

    def get(self, key: str):
        return self._by_key.get(key)

    def __len__(self):
        return len(self._by_key)

    def __iter__(self):
        return iter(self._by_key.values())

    def candidates(self) -> list[Candidate]:
        return list(self._by_key.values())

    def replace_candidates(self, candidates: Iterable[Candidate]) -> "CandidatePool":
        pool = CandidatePool(self.ds, self.bins, candidates, self.workers)
        pool._influence_key = self._influence_key
        return pool

    def ensure_influence(self, sv: ScoreVector, c: float):
        key = (id(sv), c)
        if self._influence_key is not None and self._influence_key != key:
            for cand in self._by_key.values():
                cand.influence = None  # cached under different scores/strictness
        self._influence_key = key
        pending = [cand for cand in self._by_key.values() if cand.influence is None]
        scores = sv.scores

        def fill(cand: Candidate):
            cand.influence = float(scores @ cand.mask) / cand.count**c

        _map_chunked(fill, pending, self.workers)

    def ordered(self) -> list[Candidate]:
        return sorted(self._by_key.values(), key=Candidate.sort_key)

    def best(self) -> Candidate:
        if not self._by_key:
            raise NoExplanationError("candidate pool is empty")
        return min(self._by_key.values(), key=Candidate.sort_key)


def _map_chunked(fn, items, workers: int):
    """Apply fn to every item; parallel across chunks, deterministic order."""
    if workers <= 1 or len(items) < 64:
        for item in items:
            fn(item)
        return
    chunks = np.array_split(np.arange(len(items)), workers * 4)

    def run(idx):
        for i in idx:
            fn(items[i])

    with ThreadPoolExecutor(max_workers=workers) as ex:
        list(ex.map(run, [c for c in chunks if len(c)]))


# -- initialization -----------------------------------------------------------


def init_base_predicates(ds: Dataset, spec: BinningSpec | None = None) -> CandidatePool:
    """One single-clause candidate per categorical value and per numeric or
    datetime bin, over context features only; empty selections are dropped."""
    spec = spec or BinningSpec()
    context = ds.context_features()
    if not context:
        raise ConfigError("no context features to search over")
    bins = discretize(ds, spec, [f.name for f in context])
    candidates = []
    for feat in context:
        table = bins.get(feat.name)
        if table is None:
            continue  # all-missing column
        col = ds.column(feat.name)
        if isinstance(table, CategoricalBins):
            if len(table.values) > MAX_CATEGORICAL_CARDINALITY:
                logger.warning(
                    "feature %r has %d distinct values (> %d); excluded from base predicates",
                    feat.name,
                    len(table.values),
                    MAX_CATEGORICAL_CARDINALITY,
                )
                continue
            for value in table.values:
                mask = col == value
                if mask.any():
                    clause = Clause(feat.name, MemberOf(frozenset([value])))
                    candidates.append(Candidate(Conjunction([clause]), mask))
        else:
            is_dt = feat.kind == ds_mod.DATETIME
            if table.degenerate:
                v = table.edges[0]
                mask = col == v
                if mask.any():
                    clause = Clause(feat.name, Range(v, v, True, True, as_datetime=is_dt))
                    candidates.append(Candidate(Conjunction([clause]), mask))
                continue
            for lo, hi, last in table.intervals():
                mask = (col >= lo) & ((col <= hi) if last else (col < hi))
                if mask.any():
                    clause = Clause(feat.name, Range(lo, hi, True, last, as_datetime=is_dt))
                    candidates.append(Candidate(Conjunction([clause]), mask))
    return CandidatePool(ds, bins, candidates)


# -- passes -------------------------------------------------------------------


def _bin_width(pool: CandidatePool, feature: str) -> float:
    table = pool.bins.get(feature)
    if isinstance(table, NumericBins) and not table.degenerate:
        return table.width
    return 0.0


def _ranges_adjacent(a: Range, b: Range, bin_width: float) -> bool:
    # overlap or touch, or a gap of at most one bin
    if a.lo <= b.hi and b.lo <= a.hi:
        return True
    gap = b.lo - a.hi if b.lo > a.hi else a.lo - b.hi
    return gap <= bin_width * (1.0 + 1e-9)


def _merge_partnerable(a: Candidate, b: Candidate, pool: CandidatePool):
    """Same feature set, identical on all but one feature, mergeable there."""
    if a.conj.features != b.conj.features:
        return None
    differing = None
    for ca, cb in zip(a.conj.clauses, b.conj.clauses):
        if ca == cb:
            continue
        if differing is not None:
            return None
        differing = (ca, cb)
    if differing is None:
        return None
    ca, cb = differing
    if isinstance(ca.body, MemberOf) and isinstance(cb.body, MemberOf):
        return differing
    if isinstance(ca.body, Range) and isinstance(cb.body, Range):
        if _ranges_adjacent(ca.body, cb.body, _bin_width(pool, ca.feature)):
            return differing
    return None


def _conj_mask(conj: Conjunction, ds: Dataset) -> np.ndarray:
    return evaluate(Predicate([conj]), ds).mask


def merge_pass(pool: CandidatePool, sv: ScoreVector, c: float) -> CandidatePool:
    """Union same-feature adjacent candidates whenever the merged influence
    strictly exceeds both parents'; the merged candidate replaces them."""
    pool.ensure_influence(sv, c)
    alive = {cand.key: cand for cand in pool}
    queue = pool.ordered()
    scores = sv.scores
    qi = 0
    while qi < len(queue):
        current = queue[qi]
        qi += 1
        if current.key not in alive:
            continue
        merged_any = True
        while merged_any:
            merged_any = False
            partners = sorted(
                (
                    cand
                    for cand in alive.values()
                    if cand.key != current.key and cand.conj.features == current.conj.features
                ),
                key=Candidate.sort_key,
            )
            for partner in partners:
                pair = _merge_partnerable(current, partner, pool)
                if pair is None:
                    continue
                ca, cb = pair
                merged_clause = merge(ca, cb)
                conj = Conjunction(
                    [cl for cl in current.conj.clauses if cl.feature != ca.feature]
                    + [merged_clause]
                )
                cand = Candidate(conj, _conj_mask(conj, pool.ds))
                if cand.count == 0:
                    continue
                cand.influence = float(scores @ cand.mask) / cand.count**c
                if cand.influence > max(current.influence, partner.influence):
                    del alive[current.key]
                    del alive[partner.key]
                    existing = alive.get(cand.key)
                    if existing is None:
                        alive[cand.key] = cand
                        current = cand
                    else:
                        current = existing
                    merged_any = True
                    break
    return pool.replace_candidates(alive.values())


def intersect_pass(pool: CandidatePool, sv: ScoreVector, c: float) -> CandidatePool:
    """Conjoin feature-disjoint pairs; keep a conjunction only if its influence
    strictly exceeds both parents'. Parents are retained."""
    pool.ensure_influence(sv, c)
    ordered = pool.ordered()
    scores = sv.scores
    pairs = [
        (a, b)
        for i, a in enumerate(ordered)
        for b in ordered[i + 1 :]
        if not (a.conj.features & b.conj.features)
    ]
    results: list[Candidate | None] = [None] * len(pairs)

    def evaluate_pair(idx: int):
        a, b = pairs[idx]
        mask = a.mask & b.mask
        count = int(mask.sum())
        if count == 0:
            return
        influence = float(scores @ mask) / count**c
        if influence > max(a.influence, b.influence):
            cand = Candidate(intersect(a.conj, b.conj), mask, influence)
            results[idx] = cand

    _map_chunked(evaluate_pair, list(range(len(pairs))), pool.workers)
    out = pool.replace_candidates(pool.candidates())
    for cand in results:
        if cand is not None:
            out.add(cand)
    return out


def prune_pass(
    pool: CandidatePool, sv: ScoreVector, user_points: frozenset[int] | None = None
) -> CandidatePool:
    """Drop candidates that exclude the top-scoring point of the current best
    predicate (and, when given, candidates disjoint from the user's anomalies
    x'). The best candidate itself always survives."""
    best = pool.best()
    rows = np.flatnonzero(best.mask)
    x_hat = int(rows[np.argmax(sv.scores[rows])])
    user_idx = np.fromiter(user_points, dtype=int) if user_points else None
    kept = []
    for cand in pool:
        if cand.key == best.key:
            kept.append(cand)
            continue
        if not cand.mask[x_hat]:
            continue
        if user_idx is not None and not cand.mask[user_idx].any():
            continue
        kept.append(cand)
    return pool.replace_candidates(kept)


# -- inner loop ---------------------------------------------------------------


def _validate_user_points(cfg: SearchConfig, ds: Dataset):
    if cfg.user_points:
        bad = [i for i in cfg.user_points if not (0 <= i < ds.n_rows)]
        if bad:
            raise ConfigError(f"user points {sorted(bad)} outside row-id range")


def _best_for_return(pool: CandidatePool, user_points) -> Candidate:
    if not user_points:
        return pool.best()
    idx = np.fromiter(user_points, dtype=int)
    eligible = [cand for cand in pool if cand.mask[idx].any()]
    if not eligible:
        raise NoExplanationError("no candidate intersects the user-provided anomalies")
    return min(eligible, key=Candidate.sort_key)


def _run_inner(
    pool: CandidatePool, sv: ScoreVector, cfg: SearchConfig
) -> tuple[Candidate, list[float], CandidatePool]:
    if len(pool) == 0:
        raise NoExplanationError("candidate pool is empty")
    pool.workers = cfg.workers
    pool.ensure_influence(sv, cfg.strictness)
    trace = [pool.best().influence]
    prev = trace[0]
    for _ in range(cfg.max_iterations):
        pool = merge_pass(pool, sv, cfg.strictness)
        pool = intersect_pass(pool, sv, cfg.strictness)
        pool = prune_pass(pool, sv, cfg.user_points)
        best = pool.best()
        trace.append(best.influence)
        if not best.influence > prev:
            break
        prev = best.influence
    return _best_for_return(pool, cfg.user_points), trace, pool


def _body_contains(outer, inner) -> bool:
    if isinstance(outer, MemberOf) and isinstance(inner, MemberOf):
        return inner.values <= outer.values
    if isinstance(outer, Range) and isinstance(inner, Range):
        lo_ok = outer.lo < inner.lo or (
            outer.lo == inner.lo and (outer.lo_incl or not inner.lo_incl)
        )
        hi_ok = outer.hi > inner.hi or (
            outer.hi == inner.hi and (outer.hi_incl or not inner.hi_incl)
        )
        return lo_ok and hi_ok
    return False


def _leftover_pool(base: CandidatePool, best: Conjunction) -> CandidatePool:
    """Base predicates not absorbed by the returned best predicate; these seed
    the outer loop's next inner search."""
    remaining = []
    for cand in base:
        clause = cand.conj.clauses[0]
        best_clause = best.clause_for(clause.feature)
        if best_clause is not None and _body_contains(best_clause.body, clause.body):
            continue
        remaining.append(cand)
    return base.replace_candidates(remaining)


def _selection(cand: Candidate) -> Selection:
    return Selection(cand.mask)


def _make_explanation(
    ds: Dataset,
    sv: ScoreVector,
    cfg: SearchConfig,
    predicate: Predicate,
    sel: Selection,
    trace: Iterable[float],
    strategy: str,
    bayes: BayesResult | None = None,
) -> Explanation:
    influence = likelihood_influence(sv, sel, cfg.strictness)
    inside = sv.scores[sel.mask]
    outside = sv.scores[~sel.mask]
    if bayes is None and len(inside) >= 2 and len(outside) >= 2:
        bayes = bayes_for_groups(inside, outside, cfg.prior_scale)
    return Explanation(
        predicate=predicate,
        influence=influence,
        strictness=cfg.strictness,
        bayes=bayes,
        coverage_count=sel.count,
        coverage_fraction=sel.count / ds.n_rows,
        mean_score_inside=float(inside.mean()),
        mean_score_outside=float(outside.mean()) if outside.size else None,
        trace=tuple(trace),
        strategy=strategy,
    )


# -- public search entry points -------------------------------------------------


def search_best_predicate(
    ds: Dataset, sv: ScoreVector, cfg: SearchConfig, pool: CandidatePool | None = None
) -> tuple[Explanation, CandidatePool]:
    """One run of the bottom-up influence search: the best explanation plus the
    pool of unused base predicates for the multiple-explanations outer loop."""
    _validate_user_points(cfg, ds)
    base = pool if pool is not None else init_base_predicates(ds, cfg.binning)
    if len(base) == 0:
        raise NoExplanationError("no base predicates (empty selections everywhere)")
    best, trace, _ = _run_inner(base, sv, cfg)
    exp = _make_explanation(
        ds, sv, cfg, Predicate([best.conj]), _selection(best), trace, INFLUENCE
    )
    return exp, _leftover_pool(base, best.conj)


def search_multiple(
    ds: Dataset, sv: ScoreVector, cfg: SearchConfig
) -> tuple[list[Explanation], Explanation]:
    """Outer loop: accumulate a disjunction while adding the next best predicate
    strictly improves the disjunction's influence."""
    _validate_user_points(cfg, ds)
    pool = init_base_predicates(ds, cfg.binning)
    explanations: list[Explanation] = []
    combined_pred: Predicate | None = None
    combined_sel: Selection | None = None
    combined_trace: list[float] = []
    while len(explanations) < cfg.max_explanations and len(pool):
        try:
            exp, leftover = search_best_predicate(ds, sv, cfg, pool=pool)
        except NoExplanationError:
            break
        term = exp.predicate
        if combined_pred is None:
            combined_pred = term
            combined_sel = evaluate(term, ds)
            explanations.append(exp)
        else:
            candidate_pred = disjoin(combined_pred, term)
            candidate_sel = evaluate(candidate_pred, ds)
            new_inf = likelihood_influence(sv, candidate_sel, cfg.strictness)
            cur_inf = likelihood_influence(sv, combined_sel, cfg.strictness)
            if not new_inf > cur_inf:
                break
            combined_pred, combined_sel = candidate_pred, candidate_sel
            explanations.append(exp)
        combined_trace.append(likelihood_influence(sv, combined_sel, cfg.strictness))
        pool = leftover
    if combined_pred is None:
        raise NoExplanationError("search produced no explanation")
    combined = _make_explanation(
        ds, sv, cfg, combined_pred, combined_sel, combined_trace, INFLUENCE
    )
    return explanations, combined


def rpi_search(ds: Dataset, sv: ScoreVector, cfg: SearchConfig) -> list[Explanation]:
    """Recursive predicate induction: expand every base predicate with further
    base predicates while the JZS Bayes factor strictly improves; deduplicate
    order-invariant results and sort by bf10 descending."""
    if cfg.strategy != BAYES:
        raise ConfigError("rpi_search requires strategy='bayes'")
    _validate_user_points(cfg, ds)
    base = init_base_predicates(ds, cfg.binning)
    if len(base) == 0:
        raise NoExplanationError("no base predicates")
    scores = sv.scores
    n = ds.n_rows
    bf_cache: dict[str, float] = {}

    def bf_for(cand: Candidate) -> float | None:
        if cand.count < 2 or n - cand.count < 2:
            return None
        cached = bf_cache.get(cand.key)
        if cached is not None:
            return cached
        try:
            result = bayes_for_groups(
                scores[cand.mask], scores[~cand.mask], cfg.prior_scale
            ).bf10
        except InsufficientDataError:
            return None
        bf_cache[cand.key] = result
        return result

    seeds = sorted(base.candidates(), key=lambda cand: (len(cand.conj.clauses), cand.key))
    seed_bfs = [bf_for(cand) for cand in seeds]
    expansion_order = sorted(
        (s for s, bf in zip(seeds, seed_bfs) if bf is not None),
        key=lambda cand: (-bf_cache[cand.key], cand.key),
    )

    def expand(args):
        seed, seed_bf = args
        if seed_bf is None:
            return None
        current, current_bf = seed, seed_bf
        path = [seed_bf]
        while True:
            improved = False
            for other in expansion_order:
                if other.conj.features & current.conj.features:
                    continue
                mask = current.mask & other.mask
                count = int(mask.sum())
                if count < 2 or n - count < 2:
                    continue
                cand = Candidate(intersect(current.conj, other.conj), mask)
                bf = bf_for(cand)
                if bf is not None and bf > current_bf:
                    current, current_bf = cand, bf
                    path.append(bf)
                    improved = True
                    break
            if not improved:
                return current, current_bf, path

    results: list = [None] * len(seeds)
    items = list(enumerate(zip(seeds, seed_bfs)))

    def run(item):
        i, args = item
        results[i] = expand(args)

    _map_chunked(run, items, cfg.workers)

    final: dict[str, tuple[Candidate, float, list[float]]] = {}
    for res in results:
        if res is None:
            continue
        cand, bf, path = res
        final.setdefault(cand.key, (cand, bf, path))
    ranked = sorted(
        final.values(),
        key=lambda item: (-item[1], len(item[0].conj.clauses), item[0].count, item[0].key),
    )
    explanations = []
    for cand, _, path in ranked:
        sel = _selection(cand)
        bayes = bayes_for_groups(scores[sel.mask], scores[~sel.mask], cfg.prior_scale)
        explanations.append(
            _make_explanation(
                ds, sv, cfg, Predicate([cand.conj]), sel, path, BAYES, bayes=bayes
            )
        )
    return explanations
