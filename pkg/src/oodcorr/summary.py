"""Accuracy tables at the best in-domain checkpoint.

Each run contributes the accuracies of its own best checkpoint (highest
in-domain accuracy, earliest step on ties).  Per dataset, the table
reports mean and sample standard deviation across runs, formatted as
``"89.0 ± 5.9"``, plus a chance-performance row.
"""
from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass

import numpy as np

from .errors import MissingStep
from .trace_model import EvalTrace, RunSet

CHANCE = 50.0


@dataclass(frozen=True)
class SummaryRow:
    dataset: str
    mean: float
    std: float
    in_domain: bool = False

    @property
    def cell(self) -> str:
        return format_cell(self.mean, self.std)


@dataclass(frozen=True)
class SummaryTable:
    runset_label: str
    in_domain: str
    rows: tuple
    n_runs: int
    chance: float = CHANCE

    def row(self, dataset: str) -> SummaryRow:
        for r in self.rows:
            if r.dataset == dataset:
                return r
        raise KeyError(dataset)


def format_cell(mean: float, std: float) -> str:
    return f"{mean:.1f} ± {std:.1f}"


def best_checkpoint(trace: EvalTrace) -> int:
    """Step with the highest in-domain accuracy; the earliest one wins ties."""
    series = trace.in_domain_series
    order = np.argsort(series.steps, kind="stable")
    values = np.asarray(series.values)[order]
    return series.steps[order[int(np.argmax(values))]]


def summary_table(runset: RunSet, chance: float = CHANCE) -> SummaryTable:
    """Mean and sample std (n - 1) across runs at each run's best checkpoint.

    The in-domain dataset comes first, followed by the OOD datasets in
    sorted order.  With a single run the std is 0.
    """
    names = (runset.in_domain,) + runset.ood_datasets
    picked = {name: [] for name in names}
    for trace in runset.traces:
        step = best_checkpoint(trace)
        for name, series in trace.all_series():
            try:
                picked[name].append(series.value_at(step))
            except KeyError:
                raise MissingStep(f"run {trace.run_id!r}: {name} has no value at best step {step}") from None
    rows = []
    for name in names:
        vals = picked[name]
        std = statistics.stdev(vals) if len(vals) > 1 else 0.0
        rows.append(SummaryRow(name, statistics.fmean(vals), std, name == runset.in_domain))
    return SummaryTable(runset.label, runset.in_domain, tuple(rows), len(runset.traces), chance)


def format_table_text(table: SummaryTable) -> str:
    """Aligned plain-text table: one column per dataset, in-domain marked with ``*``."""
    header = ["", *(r.dataset + ("*" if r.in_domain else "") for r in table.rows)]
    body = [table.runset_label or table.in_domain, *(r.cell for r in table.rows)]
    chance = ["Chance performance", *(f"{table.chance:.1f}" for _ in table.rows)]
    lines = [header, body, chance]
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    out = []
    for line in lines:
        first = line[0].ljust(widths[0])
        rest = (cell.rjust(w) for cell, w in zip(line[1:], widths[1:]))
        out.append("  ".join([first, *rest]).rstrip())
    out.append(f"(* in-domain; mean ± std over {table.n_runs} run(s) at the best in-domain checkpoint)")
    return "\n".join(out) + "\n"


def format_table_csv(table: SummaryTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["label", "dataset", "in_domain", "mean", "std", "cell", "chance", "n_runs"])
    for r in table.rows:
        w.writerow([table.runset_label, r.dataset, int(r.in_domain), f"{r.mean:.6f}",
                    f"{r.std:.6f}", r.cell, f"{table.chance:.1f}", table.n_runs])
    return buf.getvalue()
