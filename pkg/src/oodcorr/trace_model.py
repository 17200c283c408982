"""Domain types for evaluation traces and analysis results.

A finetuning run is observed at a sequence of checkpoints (training steps).
At each checkpoint we have the in-domain accuracy and one accuracy per
out-of-distribution (OOD) testset.  Accuracies are percentages in [0, 100].

All types are immutable once built.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidRunSet

DatasetId = str

#: Correlation value: a float in [-1, 1], or ``None`` when undefined.
Corr = Optional[float]

ACCURACY_MIN = 0.0
ACCURACY_MAX = 100.0
MIN_SERIES_LENGTH = 2

# Slack tolerated on a correlation outside [-1, 1] before clamping.
_CORR_SLACK = 1e-12


class Violation(NamedTuple):
    field: str
    rule: str
    detail: str = ""


@dataclass(frozen=True)
class ScoreSeries:
    """Accuracies of one testset across checkpoints.

    ``steps`` are non-negative, strictly increasing training steps and
    ``values`` the matching accuracies.  The constructor only normalises
    containers; use :func:`series_violations` to check the invariants.
    """

    steps: tuple
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(int(s) for s in self.steps))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self):
        return len(self.steps)

    def value_at(self, step: int) -> float:
        try:
            return self.values[self.steps.index(step)]
        except ValueError:
            raise KeyError(step) from None

    def restrict(self, steps) -> "ScoreSeries":
        keep = set(steps)
        pairs = [(s, v) for s, v in zip(self.steps, self.values) if s in keep]
        return ScoreSeries([s for s, _ in pairs], [v for _, v in pairs])

    def scaled(self, factor: float) -> "ScoreSeries":
        return ScoreSeries(self.steps, [v * factor for v in self.values])


@dataclass(frozen=True)
class EvalTrace:
    """One finetuning run: in-domain series plus one series per OOD testset."""

    run_id: str
    in_domain: DatasetId
    in_domain_series: ScoreSeries
    ood_series: Mapping[DatasetId, ScoreSeries]

    def __post_init__(self):
        # sorted, read-only copy so iteration order never depends on input order
        items = sorted(dict(self.ood_series).items())
        object.__setattr__(self, "ood_series", _FrozenDict(items))

    @property
    def ood_datasets(self) -> tuple:
        return tuple(self.ood_series)

    @property
    def steps(self) -> tuple:
        return self.in_domain_series.steps

    def all_series(self) -> Iterator[tuple]:
        yield self.in_domain, self.in_domain_series
        yield from self.ood_series.items()


class _FrozenDict(dict):
    """dict that refuses mutation; keeps hashing out of the picture."""

    def _readonly(self, *args, **kwargs):
        raise TypeError("mapping is read-only")

    __setitem__ = __delitem__ = clear = pop = popitem = setdefault = update = _readonly


@dataclass(frozen=True)
class RunSet:
    """Traces sharing model, size, in-domain dataset and shot count.

    Raises :class:`~oodcorr.errors.InvalidRunSet` if the traces disagree on
    the in-domain dataset or on the OOD dataset set, or if run ids repeat.
    Traces are stored sorted by ``run_id``.
    """

    label: str
    in_domain: DatasetId
    traces: tuple

    def __post_init__(self):
        traces = tuple(sorted(self.traces, key=lambda t: t.run_id))
        object.__setattr__(self, "traces", traces)
        problems = runset_violations(self)
        if problems:
            raise InvalidRunSet("; ".join(f"{v.field}: {v.rule} ({v.detail})" for v in problems))

    @classmethod
    def from_arrays(cls, in_domain_acc, ood_acc: Mapping, steps=None,
                    in_domain: DatasetId = "IND", label: str = "", run_ids=None) -> "RunSet":
        """Build from arrays shaped ``(n_runs, n_steps)`` (1-D means a single run).

        ``ood_acc`` maps dataset id to an array of the same shape.  Run ids
        default to ``r000``, ``r001``, ...; steps to ``0 .. n_steps - 1``.
        """
        ind = np.atleast_2d(np.asarray(in_domain_acc, dtype=float))
        n_runs, n_steps = ind.shape
        steps = list(range(n_steps)) if steps is None else list(steps)
        run_ids = [f"r{r:03d}" for r in range(n_runs)] if run_ids is None else list(run_ids)
        ood = {d: np.broadcast_to(np.atleast_2d(np.asarray(v, dtype=float)), ind.shape)
               for d, v in ood_acc.items()}
        traces = tuple(
            EvalTrace(run_ids[r], in_domain, ScoreSeries(steps, ind[r]),
                      {d: ScoreSeries(steps, v[r]) for d, v in ood.items()})
            for r in range(n_runs))
        return cls(label or in_domain, in_domain, traces)

    @property
    def ood_datasets(self) -> tuple:
        return self.traces[0].ood_datasets

    @property
    def run_ids(self) -> tuple:
        return tuple(t.run_id for t in self.traces)

    def trace(self, run_id: str) -> EvalTrace:
        for t in self.traces:
            if t.run_id == run_id:
                return t
        raise KeyError(run_id)

    def pooled(self, dataset: DatasetId):
        """Pooled ``(run_ids, steps, x_in_domain, y_ood)`` over all runs.

        Points are ordered by ``(run_id, step)``.  Each trace must already be
        aligned (every series sharing the in-domain steps).
        """
        run_ids, steps, xs, ys = [], [], [], []
        for t in self.traces:
            ood = t.ood_series[dataset]
            if ood.steps != t.in_domain_series.steps:
                raise InvalidRunSet(f"run {t.run_id!r}: {dataset} not aligned with in-domain steps")
            run_ids.extend([t.run_id] * len(ood))
            steps.extend(ood.steps)
            xs.extend(t.in_domain_series.values)
            ys.extend(ood.values)
        return tuple(run_ids), np.array(steps, dtype=np.int64), np.array(xs), np.array(ys)

    @property
    def n_points(self) -> int:
        return sum(len(t.in_domain_series) for t in self.traces)


@dataclass(frozen=True)
class ResidualSeries:
    """Residuals of one OOD dataset, one per pooled ``(run_id, step)``."""

    dataset: DatasetId
    run_ids: tuple
    steps: np.ndarray
    residuals: np.ndarray

    def __len__(self):
        return len(self.residuals)

    @property
    def points(self) -> list:
        return [(r, int(s), float(e)) for r, s, e in zip(self.run_ids, self.steps, self.residuals)]


@dataclass(frozen=True)
class PartialCorrMatrix:
    """Symmetric matrix of correlations between OOD datasets.

    ``entries[i][j]`` is a float in [-1, 1] or ``None`` (undefined, e.g. a
    residual series with zero variance).  Values within 1e-12 outside
    [-1, 1] are clamped on construction; anything further out is an error.
    """

    datasets: tuple
    entries: tuple = field(repr=False)

    def __post_init__(self):
        datasets = tuple(self.datasets)
        n = len(datasets)
        if len(set(datasets)) != n:
            raise ValueError("dataset ids must be unique")
        rows = [list(r) for r in self.entries]
        if len(rows) != n or any(len(r) != n for r in rows):
            raise ValueError(f"entries must be {n}x{n}")
        for i in range(n):
            for j in range(n):
                rows[i][j] = _check_corr(rows[i][j])
        for i in range(n):
            for j in range(i + 1, n):
                if rows[i][j] != rows[j][i]:
                    raise ValueError(f"matrix not symmetric at ({datasets[i]}, {datasets[j]})")
        object.__setattr__(self, "datasets", datasets)
        object.__setattr__(self, "entries", tuple(tuple(r) for r in rows))

    @classmethod
    def from_pairs(cls, datasets: Sequence[DatasetId],
                   pair: Callable[[int, int], Corr],
                   diagonal: Callable[[int], Corr]) -> "PartialCorrMatrix":
        """Build from callables; each off-diagonal pair is computed once and mirrored."""
        n = len(datasets)
        rows = [[None] * n for _ in range(n)]
        for i in range(n):
            rows[i][i] = diagonal(i)
            for j in range(i + 1, n):
                rows[i][j] = rows[j][i] = _check_corr(pair(i, j))
        return cls(tuple(datasets), rows)

    def __len__(self):
        return len(self.datasets)

    def get(self, d1: DatasetId, d2: DatasetId) -> Corr:
        return self.entries[self.datasets.index(d1)][self.datasets.index(d2)]

    def upper_pairs(self) -> list:
        """``(d1, d2, value)`` for every pair above the diagonal, row-major."""
        n = len(self.datasets)
        return [(self.datasets[i], self.datasets[j], self.entries[i][j])
                for i in range(n) for j in range(i + 1, n)]

    def to_array(self, fill: float = np.nan) -> np.ndarray:
        return np.array([[fill if v is None else v for v in row] for row in self.entries], dtype=float)

    def defined_mask(self) -> np.ndarray:
        return np.array([[v is not None for v in row] for row in self.entries], dtype=bool)


def _check_corr(value) -> Corr:
    if value is None:
        return None
    value = float(value)
    if math.isnan(value):
        raise ValueError("NaN is not a valid correlation; use None for undefined")
    if abs(value) > 1.0 + _CORR_SLACK:
        raise ValueError(f"correlation {value!r} outside [-1, 1]")
    return min(1.0, max(-1.0, value))


def series_violations(series: ScoreSeries, name: str = "") -> list:
    where = f" in {name}" if name else ""
    out = []
    if len(series.steps) != len(series.values):
        out.append(Violation("values", "length", f"steps/values length differ{where}"))
    if len(series.steps) < MIN_SERIES_LENGTH:
        out.append(Violation("steps", "length", f"fewer than {MIN_SERIES_LENGTH} checkpoints{where}"))
    if any(s < 0 for s in series.steps):
        out.append(Violation("steps", "non_negative", f"negative step{where}"))
    if any(b <= a for a, b in zip(series.steps, series.steps[1:])):
        out.append(Violation("steps", "increasing", f"steps not strictly increasing{where}"))
    bad = [v for v in series.values
           if not (math.isfinite(v) and ACCURACY_MIN <= v <= ACCURACY_MAX)]
    if bad:
        out.append(Violation("values", "range", f"{len(bad)} value(s) outside [0, 100]{where}"))
    return out


def validate_trace(trace: EvalTrace) -> list:
    """Check the invariants of a single trace.

    Returns
    -------
    list of Violation
        Empty iff the trace is valid: named datasets, in-domain dataset not
        among the OOD keys, at least one OOD series, every series well
        formed, and every OOD series sharing the in-domain steps.
    """
    out = []
    if not trace.in_domain:
        out.append(Violation("in_domain", "non_empty", "in-domain dataset id is empty"))
    if not trace.ood_series:
        out.append(Violation("ood_series", "non_empty", "no OOD series"))
    if trace.in_domain in trace.ood_series:
        out.append(Violation("ood_series", "excludes_in_domain",
                             f"{trace.in_domain} appears as an OOD dataset"))
    for name, series in trace.all_series():
        if not name:
            out.append(Violation("ood_series", "non_empty", "empty dataset id"))
        out.extend(series_violations(series, name))
    for name, series in trace.ood_series.items():
        if series.steps != trace.in_domain_series.steps:
            out.append(Violation("steps", "alignment",
                                 f"{name} steps differ from in-domain steps"))
    return out


def runset_violations(runset: RunSet) -> list:
    """Set-level invariants: non-empty, shared in-domain id and OOD keys, unique run ids."""
    traces = runset.traces
    if not traces:
        return [Violation("traces", "non_empty", "run set has no traces")]
    out = []
    for t in traces:
        if t.in_domain != runset.in_domain:
            out.append(Violation("in_domain", "shared",
                                 f"run {t.run_id!r} in-domain {t.in_domain!r} != {runset.in_domain!r}"))
    keys = set(traces[0].ood_series)
    for t in traces[1:]:
        if set(t.ood_series) != keys:
            out.append(Violation("ood_series", "shared_keys",
                                 f"run {t.run_id!r} has OOD datasets {sorted(t.ood_series)}"))
    ids = [t.run_id for t in traces]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        out.append(Violation("run_id", "unique", f"duplicate run ids {dupes}"))
    return out
