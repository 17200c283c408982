"""Reading and writing trace files, and checkpoint alignment.

The interchange format is a long-form CSV with one measurement per row::

    run,step,dataset,accuracy
    seed1,0,MNLI,51.2
    seed1,0,HANS,49.8
    ...

An optional sidecar ``<name>.meta.json`` holds ``{"label": ..., "in_domain": ...}``.
"""
from __future__ import annotations

import csv
import enum
import io
import json
import logging
import math
from pathlib import Path
from typing import NamedTuple, Optional

from .errors import (DuplicateRow, EmptyIntersection, InvalidRunSet, MalformedRow,
                     MissingHeader, NonNumeric, OutOfRangeAccuracy, StepMismatch,
                     UnknownInDomain)
from .trace_model import (ACCURACY_MAX, ACCURACY_MIN, MIN_SERIES_LENGTH, EvalTrace,
                          RunSet, ScoreSeries)

log = logging.getLogger(__name__)

HEADER = ("run", "step", "dataset", "accuracy")


class AlignPolicy(enum.Enum):
    STRICT = "strict"
    INTERSECT = "intersect"


class TraceFileRow(NamedTuple):
    run: str
    step: int
    dataset: str
    accuracy: float


class DroppedStep(NamedTuple):
    run: str
    step: int
    dataset: str


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def read_sidecar(path) -> dict:
    """Metadata next to a trace CSV, or ``{}`` when there is none."""
    meta = sidecar_path(path)
    if not meta.exists():
        return {}
    try:
        data = json.loads(meta.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise MalformedRow(f"{meta}: invalid JSON ({e})") from None
    if not isinstance(data, dict):
        raise MalformedRow(f"{meta}: expected a JSON object")
    return data


def parse_rows(text: str, source: str = "<string>") -> list:
    """Parse CSV text into validated :class:`TraceFileRow` objects."""
    reader = csv.reader(io.StringIO(text, newline=""))
    try:
        header = next(reader)
    except StopIteration:
        raise MissingHeader(f"{source}: empty file, expected header {','.join(HEADER)}") from None
    if tuple(h.strip() for h in header) != HEADER:
        raise MissingHeader(f"{source}: header must be exactly {','.join(HEADER)}, got {','.join(header)}")

    rows, seen = [], {}
    for lineno, fields in enumerate(reader, start=2):
        if not fields or all(not f.strip() for f in fields):
            continue
        if len(fields) != 4:
            raise MalformedRow(f"{source}:{lineno}: expected 4 fields, got {len(fields)}")
        run, step_s, dataset, acc_s = (f.strip() for f in fields)
        if not run or not dataset:
            raise MalformedRow(f"{source}:{lineno}: empty run or dataset")
        try:
            step = int(step_s)
        except ValueError:
            raise NonNumeric(f"{source}:{lineno}: step {step_s!r} is not an integer") from None
        if step < 0:
            raise NonNumeric(f"{source}:{lineno}: step {step} is negative")
        try:
            acc = float(acc_s)
        except ValueError:
            raise NonNumeric(f"{source}:{lineno}: accuracy {acc_s!r} is not a number") from None
        if not math.isfinite(acc):
            raise NonNumeric(f"{source}:{lineno}: accuracy {acc_s!r} is not finite")
        if not ACCURACY_MIN <= acc <= ACCURACY_MAX:
            raise OutOfRangeAccuracy(f"{source}:{lineno}: accuracy {acc} outside [0, 100]")
        key = (run, step, dataset)
        if key in seen:
            raise DuplicateRow(f"{source}:{lineno}: ({run}, {step}, {dataset}) already on line {seen[key]}")
        seen[key] = lineno
        rows.append(TraceFileRow(run, step, dataset, acc))
    return rows


def build_runset(rows, in_domain: str, label: str = "") -> RunSet:
    """Group rows into one :class:`EvalTrace` per run (series sorted by step)."""
    by_run = {}
    for r in rows:
        by_run.setdefault(r.run, {}).setdefault(r.dataset, []).append((r.step, r.accuracy))
    if not any(in_domain in series for series in by_run.values()):
        raise UnknownInDomain(f"no rows for in-domain dataset {in_domain!r}")

    traces = []
    for run, series in sorted(by_run.items()):
        if in_domain not in series:
            raise UnknownInDomain(f"run {run!r} has no rows for in-domain dataset {in_domain!r}")
        built = {}
        for name, points in series.items():
            points.sort()
            built[name] = ScoreSeries([s for s, _ in points], [v for _, v in points])
        ind = built.pop(in_domain)
        if not built:
            raise InvalidRunSet(f"run {run!r} has no OOD datasets")
        traces.append(EvalTrace(run, in_domain, ind, built))
    return RunSet(label or in_domain, in_domain, tuple(traces))


def parse_trace_csv(path, in_domain: Optional[str] = None, label: Optional[str] = None) -> RunSet:
    """Read a trace CSV into an (unaligned) :class:`RunSet`.

    ``in_domain`` and ``label`` default to the sidecar metadata when given
    as ``None``.
    """
    path = Path(path)
    meta = read_sidecar(path)
    in_domain = in_domain or meta.get("in_domain")
    if not in_domain:
        raise UnknownInDomain(f"{path}: in-domain dataset not given and no sidecar metadata")
    text = path.read_text(encoding="utf-8-sig")
    rows = parse_rows(text, source=str(path))
    return build_runset(rows, in_domain, label or meta.get("label") or "")


def align_checkpoints(runset: RunSet, policy: AlignPolicy = AlignPolicy.INTERSECT):
    """Make every series of a trace share the same steps.

    Returns
    -------
    (RunSet, list of DroppedStep)
        Under ``STRICT`` any disagreement raises :class:`StepMismatch`.
        Under ``INTERSECT`` each trace is cut to the steps common to all of
        its series and the removed ``(run, step, dataset)`` triples are
        reported.  Steps are never aligned across runs.
    """
    policy = AlignPolicy(policy)
    traces, dropped = [], []
    for t in runset.traces:
        step_sets = {name: set(s.steps) for name, s in t.all_series()}
        common = set.intersection(*step_sets.values())
        if all(steps == common for steps in step_sets.values()):
            traces.append(t)
            continue
        if policy is AlignPolicy.STRICT:
            odd = sorted(name for name, steps in step_sets.items() if steps != common)
            raise StepMismatch(f"run {t.run_id!r}: series {odd} disagree on checkpoint steps")
        if len(common) < MIN_SERIES_LENGTH:
            raise EmptyIntersection(
                f"run {t.run_id!r}: only {len(common)} step(s) shared by all series")
        for name, steps in sorted(step_sets.items()):
            dropped.extend(DroppedStep(t.run_id, s, name) for s in sorted(steps - common))
        traces.append(EvalTrace(
            t.run_id, t.in_domain, t.in_domain_series.restrict(common),
            {name: s.restrict(common) for name, s in t.ood_series.items()}))
    if dropped:
        log.warning("dropped %d measurement(s) at steps missing from sibling series", len(dropped))
    return RunSet(runset.label, runset.in_domain, tuple(traces)), dropped


def load_runset(path, in_domain=None, label=None, policy=AlignPolicy.INTERSECT) -> RunSet:
    """Parse and align in one go; dropped steps are only logged."""
    runset, _ = align_checkpoints(parse_trace_csv(path, in_domain, label), policy)
    return runset


def format_trace_csv(runset: RunSet) -> str:
    """Serialise a run set to CSV text, rows sorted by (run, step, dataset).

    Floats are written with ``repr`` so parsing gives back identical values.
    """
    rows = []
    for t in runset.traces:
        for name, series in t.all_series():
            rows.extend((t.run_id, s, name, v) for s, v in zip(series.steps, series.values))
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    writer.writerows((run, step, name, repr(float(v))) for run, step, name, v in rows)
    return buf.getvalue()


def write_trace_csv(runset: RunSet, path, with_sidecar: bool = True) -> None:
    path = Path(path)
    path.write_text(format_trace_csv(runset), encoding="utf-8")
    if with_sidecar:
        meta = {"in_domain": runset.in_domain, "label": runset.label}
        sidecar_path(path).write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n", encoding="utf-8")
