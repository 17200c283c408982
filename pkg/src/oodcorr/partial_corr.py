"""Partial OOD correlations.

For each OOD dataset a regressor predicting OOD accuracy from in-domain
accuracy is fitted on the points pooled over every run of a
:class:`~oodcorr.trace_model.RunSet`.  What the regressor cannot explain
(the residual) is what a checkpoint does better or worse than its
in-domain accuracy suggests.  The partial correlation of two OOD datasets
is the Pearson correlation of their residuals.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import LengthMismatch, OodCorrError, TooFewPoints, tag_dataset
from .regressors import Linear, RegressorKind, RegressorModel, fit, predict
from .trace_model import Corr, PartialCorrMatrix, ResidualSeries, RunSet

MIN_CORR_POINTS = 3

# A residual series whose spread is below this fraction of the data scale is
# treated as identically zero (the regressor explained everything).
FLAT_RESIDUAL_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class PartialCorrResult:
    matrix: PartialCorrMatrix
    regressor_kind: RegressorKind
    n_points: int
    per_dataset_models: Mapping[str, RegressorModel]
    residuals: Mapping[str, ResidualSeries]
    per_run: bool = False
    # only in per-run mode: run_id -> dataset -> model
    per_run_models: Optional[Mapping[str, Mapping[str, RegressorModel]]] = field(default=None)

    @property
    def datasets(self):
        return self.matrix.datasets


def _has_variance(v: np.ndarray) -> bool:
    if v.size == 0 or np.ptp(v) == 0:
        return False
    ss = float(np.sum((v - v.mean()) ** 2))
    # anything at rounding level of the values themselves is no variance
    return math.sqrt(ss) > 64 * np.finfo(float).eps * math.sqrt(v.size) * float(np.max(np.abs(v)))


def pearson(a, b) -> Corr:
    """Sample Pearson correlation, or ``None`` if either input has no variance.

    >>> pearson([1, 2, 3, 4], [1, 3, 2, 4])
    0.8
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size != b.size:
        raise LengthMismatch(f"vectors have lengths {a.size} and {b.size}")
    if a.size < MIN_CORR_POINTS:
        raise TooFewPoints(f"correlation needs at least {MIN_CORR_POINTS} points, got {a.size}")
    if not (_has_variance(a) and _has_variance(b)):
        return None
    ac = a - a.mean()
    bc = b - b.mean()
    r = float(ac @ bc) / math.sqrt(float(ac @ ac) * float(bc @ bc))
    return min(1.0, max(-1.0, r))


def compute_residuals(runset: RunSet, kind: RegressorKind = Linear()):
    """Fit one regressor per OOD dataset on pooled points and return residuals.

    Returns
    -------
    residuals : dict
        dataset -> :class:`ResidualSeries`, points ordered by (run_id, step).
    models : dict
        dataset -> fitted :class:`RegressorModel`.
    """
    residuals, models = {}, {}
    for d in runset.ood_datasets:
        run_ids, steps, x, y = runset.pooled(d)
        try:
            model = fit(kind, x, y)
        except OodCorrError as e:
            raise tag_dataset(e, d) from e
        e = y - np.asarray(predict(model, x))
        if not _spread_above(e, y):
            e = np.zeros_like(e)
        e.flags.writeable = False
        residuals[d] = ResidualSeries(d, run_ids, steps, e)
        models[d] = model
    return residuals, models


def _spread_above(e, y) -> bool:
    scale = max(1.0, float(np.max(np.abs(y))))
    return float(np.std(e)) > FLAT_RESIDUAL_RTOL * scale


def corr_matrix(vectors: Mapping[str, np.ndarray]) -> PartialCorrMatrix:
    """Pearson matrix over named vectors; zero-variance vectors get undefined rows."""
    names = sorted(vectors)
    if names:
        n = len(vectors[names[0]])
        if n < MIN_CORR_POINTS:
            raise TooFewPoints(f"correlation needs at least {MIN_CORR_POINTS} pooled points, got {n}")
    ok = [_has_variance(vectors[d]) for d in names]
    return PartialCorrMatrix.from_pairs(
        names,
        lambda i, j: pearson(vectors[names[i]], vectors[names[j]]) if ok[i] and ok[j] else None,
        lambda i: 1.0 if ok[i] else None)


def partial_corr_matrix(runset: RunSet, kind: RegressorKind = Linear(),
                        per_run: bool = False) -> PartialCorrResult:
    """Partial correlations between every pair of OOD datasets.

    Parameters
    ----------
    runset : RunSet
        Aligned traces with at least two OOD datasets.
    kind : RegressorKind
        Regressor used to remove in-domain performance.
    per_run : bool
        If true, fit and correlate each run separately and combine the
        per-run correlations by averaging their Fisher z-transforms.  The
        default pools all runs into one fit per dataset.
    """
    if len(runset.ood_datasets) < 2:
        raise TooFewPoints("partial correlations need at least two OOD datasets")
    if per_run:
        return _per_run_matrix(runset, kind)
    residuals, models = compute_residuals(runset, kind)
    matrix = corr_matrix({d: r.residuals for d, r in residuals.items()})
    return PartialCorrResult(matrix, kind, runset.n_points, models, residuals)


def _fisher_mean(values) -> Corr:
    values = [v for v in values if v is not None]
    if not values:
        return None
    z = np.arctanh(np.clip(values, -1 + 1e-12, 1 - 1e-12))
    return float(np.tanh(np.mean(z)))


def _per_run_matrix(runset: RunSet, kind) -> PartialCorrResult:
    per_run_models, per_run_matrices = {}, []
    pooled = {d: ([], [], []) for d in runset.ood_datasets}
    for trace in runset.traces:
        single = RunSet(runset.label, runset.in_domain, (trace,))
        residuals, models = compute_residuals(single, kind)
        per_run_models[trace.run_id] = models
        per_run_matrices.append(corr_matrix({d: r.residuals for d, r in residuals.items()}))
        for d, r in residuals.items():
            pooled[d][0].extend(r.run_ids)
            pooled[d][1].extend(r.steps.tolist())
            pooled[d][2].extend(r.residuals.tolist())

    names = per_run_matrices[0].datasets
    matrix = PartialCorrMatrix.from_pairs(
        names,
        lambda i, j: _fisher_mean(m.entries[i][j] for m in per_run_matrices),
        lambda i: 1.0 if any(m.entries[i][i] is not None for m in per_run_matrices) else None)
    residuals = {d: ResidualSeries(d, tuple(r), np.array(s, dtype=np.int64), np.array(e))
                 for d, (r, s, e) in pooled.items()}
    return PartialCorrResult(matrix, kind, runset.n_points, {}, residuals,
                             per_run=True, per_run_models=per_run_models)


def raw_corr_matrix(runset: RunSet) -> PartialCorrMatrix:
    """Plain Pearson correlations of the pooled OOD accuracies (no regression)."""
    return corr_matrix({d: runset.pooled(d)[3] for d in runset.ood_datasets})


def average_partial_corr(result) -> Corr:
    """Mean of the defined entries above the diagonal, ``None`` if there are none.

    Accepts a :class:`PartialCorrResult` or a bare :class:`PartialCorrMatrix`.
    """
    matrix = result.matrix if isinstance(result, PartialCorrResult) else result
    values = [v for _, _, v in matrix.upper_pairs() if v is not None]
    return math.fsum(values) / len(values) if values else None
