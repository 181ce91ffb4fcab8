"""Anomaly scores (imported or Gaussian NLL) and influence measures."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import dataset as ds_mod
from .dataset import Dataset
from .errors import ConfigError, DataError, InfluenceError, ScoreImportError
from .predicate import Selection

logger = logging.getLogger(__name__)

IMPORTED = "imported"
GAUSSIAN_NLL = "gaussian-nll"


@dataclass(frozen=True)
class Strictness:
    """Coverage/anomalousness trade-off exponent; 1.0 is the plain per-point mean."""

    c: float = 1.0

    def __post_init__(self):
        if not (0.0 < self.c <= 1.0):
            raise ConfigError(f"strictness must be in (0, 1], got {self.c}")


def _as_strictness(c) -> Strictness:
    return c if isinstance(c, Strictness) else Strictness(float(c))


class ScoreVector:
    """One finite real anomaly score per row, aligned to row ids."""

    __slots__ = ("scores", "provenance", "imputed_rows")

    def __init__(self, scores, provenance: str = IMPORTED, imputed_rows=()):
        arr = np.asarray(scores, dtype=np.float64)
        if arr.ndim != 1:
            raise ScoreImportError("scores must be one-dimensional")
        bad = np.flatnonzero(~np.isfinite(arr))
        if bad.size:
            raise ScoreImportError(f"non-finite score at row {int(bad[0])}", row=int(bad[0]))
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)
        object.__setattr__(self, "provenance", provenance)
        object.__setattr__(self, "imputed_rows", tuple(imputed_rows))

    def __setattr__(self, *a):
        raise AttributeError("ScoreVector is immutable")

    def __len__(self):
        return len(self.scores)


@dataclass(frozen=True)
class GaussianModel:
    """Mean/covariance over the fitted features, diagonal-regularized to PD."""

    features: tuple[str, ...]
    mean: np.ndarray
    covariance: np.ndarray
    epsilon: float


def _numeric_target_names(ds: Dataset, features=None) -> list[str]:
    if features is not None:
        names = list(features)
        for n in names:
            if ds.feature(n).kind == ds_mod.CATEGORICAL:
                raise ConfigError(f"cannot fit a Gaussian on categorical feature {n!r}")
        return names
    names = [f.name for f in ds.target_features() if f.kind != ds_mod.CATEGORICAL]
    if not names:
        raise ConfigError("no numeric target features to fit on")
    return names


def _target_matrix(ds: Dataset, names: list[str]) -> tuple[np.ndarray, np.ndarray]:
    cols = [ds.column(n) for n in names]
    X = np.column_stack(cols)
    complete = ~np.isnan(X).any(axis=1)
    return X, complete


def fit_gaussian(ds: Dataset, features=None) -> GaussianModel:
    """Sample mean/covariance over the (numeric/datetime) target features.

    epsilon = 1e-6 * trace/dim is added to the diagonal (with a tiny floor for
    all-constant data), escalating tenfold until Cholesky succeeds.
    """
    names = _numeric_target_names(ds, features)
    X, complete = _target_matrix(ds, names)
    rows = X[complete]
    if rows.shape[0] < 2:
        raise DataError("need at least 2 rows with complete target values")
    mean = rows.mean(axis=0)
    cov = np.cov(rows, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    dim = cov.shape[0]
    trace = float(np.trace(cov))
    eps = 1e-6 * trace / dim if trace > 0 else 1e-12
    for _ in range(40):
        try:
            cho_factor(cov + eps * np.eye(dim), lower=True)
            break
        except np.linalg.LinAlgError:
            eps *= 10.0
    else:
        raise DataError("covariance could not be regularized to positive definite")
    return GaussianModel(tuple(names), mean, cov + eps * np.eye(dim), eps)


def score_points(model: GaussianModel, ds: Dataset) -> ScoreVector:
    """Gaussian negative log likelihood per row.

    Rows missing any fitted feature get the maximum observed score and are
    flagged in ``imputed_rows``.
    """
    X, complete = _target_matrix(ds, list(model.features))
    factor = cho_factor(model.covariance, lower=True)
    sign, logdet = np.linalg.slogdet(model.covariance)
    if sign <= 0:
        raise DataError("regularized covariance is not positive definite")
    d = len(model.features)
    const = 0.5 * logdet + 0.5 * d * math.log(2 * math.pi)
    scores = np.full(ds.n_rows, np.nan)
    dev = X[complete] - model.mean
    if dev.shape[0]:
        solved = cho_solve(factor, dev.T).T
        scores[complete] = 0.5 * np.einsum("ij,ij->i", dev, solved) + const
    imputed = np.flatnonzero(~complete)
    if imputed.size:
        if not complete.any():
            raise DataError("no rows with complete target values to score")
        worst = float(np.nanmax(scores))
        scores[imputed] = worst
        logger.warning(
            "%d row(s) missing target values scored at the maximum (%.6g)",
            imputed.size,
            worst,
        )
    return ScoreVector(scores, GAUSSIAN_NLL, imputed_rows=[int(i) for i in imputed])


# -- imported scores ----------------------------------------------------------


def _parse_score(text: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ScoreImportError(f"score {text!r} at row {row} is not a number", row=row) from None
    if not math.isfinite(value):
        raise ScoreImportError(f"non-finite score at row {row}", row=row)
    return value


def _scores_from_text(text: str, n_rows: int) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ScoreImportError("score file is empty")
    header = [h.strip().lower() for h in lines[0].split(",")]
    if header == ["row_id", "score"]:
        out = np.full(n_rows, np.nan)
        for i, line in enumerate(csv.reader(io.StringIO("\n".join(lines[1:])))):
            if len(line) != 2:
                raise ScoreImportError(f"expected row_id,score at row {i}", row=i)
            rid = int(line[0])
            if not (0 <= rid < n_rows):
                raise ScoreImportError(f"row_id {rid} out of range", row=i)
            out[rid] = _parse_score(line[1], i)
        if np.isnan(out).any():
            missing = int(np.flatnonzero(np.isnan(out))[0])
            raise ScoreImportError(f"no score for row {missing}", row=missing)
        return out
    values = [_parse_score(ln.strip(), i) for i, ln in enumerate(lines)]
    return np.asarray(values)


def import_scores(
    ds: Dataset,
    source,
    higher_is_anomalous: bool = True,
    min_shift: bool = False,
) -> tuple[ScoreVector, Dataset]:
    """Attach detector scores from a side file or a named score column.

    Returns the vector and the dataset (with the score column dropped when the
    source was a column, so it never appears as a context feature).
    """
    out_ds = ds
    if isinstance(source, (str, Path)) and ds.has_feature(str(source)):
        name = str(source)
        if ds.feature(name).kind == ds_mod.CATEGORICAL:
            raise ScoreImportError(f"score column {name!r} is categorical")
        values = ds.column(name).copy()
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            raise ScoreImportError(f"non-finite score at row {int(bad[0])}", row=int(bad[0]))
        out_ds = ds.drop_feature(name)
    else:
        text = Path(source).read_text()
        values = _scores_from_text(text, ds.n_rows)
    if len(values) != ds.n_rows:
        raise ScoreImportError(
            f"{len(values)} scores for {ds.n_rows} rows (length mismatch)"
        )
    if not higher_is_anomalous:
        values = -values
    if min_shift:
        values = values - values.min()
    elif (values < 0).any():
        logger.warning(
            "imported scores contain negative values; per-point interpretation "
            "assumes higher = more anomalous (use min_shift to rebase)"
        )
    return ScoreVector(values, IMPORTED), out_ds


def write_scores_csv(sv: ScoreVector, path) -> None:
    lines = ["row_id,score"]
    lines += [f"{i},{repr(float(s))}" for i, s in enumerate(sv.scores)]
    Path(path).write_text("\n".join(lines) + "\n")


# -- influence ----------------------------------------------------------------


def likelihood_influence(sv, sel: Selection, c=Strictness()) -> float:
    """Total anomaly score of the selection divided by |selection|^c."""
    strict = _as_strictness(c)
    scores = sv.scores if isinstance(sv, ScoreVector) else np.asarray(sv, dtype=np.float64)
    if sel.count == 0:
        raise InfluenceError("influence is undefined for an empty selection")
    total = float(scores @ sel.mask)
    return total / sel.count**strict.c


def aggregate_influence(values, sel: Selection, agg: str = "mean") -> float:
    """Change in the aggregate caused by removing the selection, per removed row."""
    if agg != "mean":
        raise ConfigError(f"unsupported aggregate {agg!r}")
    arr = values.scores if isinstance(values, ScoreVector) else np.asarray(values, dtype=np.float64)
    if sel.count == 0:
        raise InfluenceError("influence is undefined for an empty selection")
    if sel.count >= len(arr):
        raise InfluenceError("influence is undefined when the selection is the whole dataset")
    full = float(arr.mean())
    rest = float(arr[~sel.mask].mean())
    return (full - rest) / sel.count
