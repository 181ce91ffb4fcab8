"""predex: predicate-induction engine for explaining anomaly scores.

Given a tabular dataset and per-row anomaly scores from any detector, predex
induces first-order predicates that isolate anomalous regions, scores them by
likelihood influence and JZS Bayes factors, and serves the analyst loop
(editing, distribution comparison, pivoting, recommendations) through a
library API, a CLI, and a JSON HTTP service.
"""

from .dataset import BinningSpec, Dataset, FeatureSchema, discretize, load_csv, set_roles
from .predicate import (
    Clause,
    Conjunction,
    MemberOf,
    Predicate,
    Range,
    Selection,
    canonical_key,
    complement,
    disjoin,
    evaluate,
    intersect,
    merge,
    parse,
    to_text,
)
from .scoring import (
    GaussianModel,
    ScoreVector,
    Strictness,
    aggregate_influence,
    fit_gaussian,
    import_scores,
    likelihood_influence,
    score_points,
)
from .bayes import BayesResult, TwoSampleStat, classify_evidence, jzs_bayes_factor, two_sample_stat
from .search import (
    CandidatePool,
    Explanation,
    SearchConfig,
    init_base_predicates,
    intersect_pass,
    merge_pass,
    prune_pass,
    rpi_search,
    search_best_predicate,
    search_multiple,
)
from .insight import (
    Bookmark,
    Histogram,
    PivotView,
    Recommendation,
    SubspaceRow,
    build_report,
    pivot_view,
    recommend,
    render_sentence,
    score_histogram,
    subspace_scores,
)

__version__ = "0.1.0"

__all__ = [
    "BinningSpec",
    "Dataset",
    "FeatureSchema",
    "discretize",
    "load_csv",
    "set_roles",
    "Clause",
    "Conjunction",
    "MemberOf",
    "Predicate",
    "Range",
    "Selection",
    "canonical_key",
    "complement",
    "disjoin",
    "evaluate",
    "intersect",
    "merge",
    "parse",
    "to_text",
    "GaussianModel",
    "ScoreVector",
    "Strictness",
    "aggregate_influence",
    "fit_gaussian",
    "import_scores",
    "likelihood_influence",
    "score_points",
    "BayesResult",
    "TwoSampleStat",
    "classify_evidence",
    "jzs_bayes_factor",
    "two_sample_stat",
    "CandidatePool",
    "Explanation",
    "SearchConfig",
    "init_base_predicates",
    "intersect_pass",
    "merge_pass",
    "prune_pass",
    "rpi_search",
    "search_best_predicate",
    "search_multiple",
    "Bookmark",
    "Histogram",
    "PivotView",
    "Recommendation",
    "SubspaceRow",
    "build_report",
    "pivot_view",
    "recommend",
    "render_sentence",
    "score_histogram",
    "subspace_scores",
    "__version__",
]
