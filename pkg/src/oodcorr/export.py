"""Rendering and serialisation of analysis results.

Every function here is a pure function of its inputs: no timestamps, no
dependence on dict order, so identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .partial_corr import PartialCorrResult, average_partial_corr
from .regressors import (Diagnostics, RegressorModel, curve_samples, kind_from_dict,
                         kind_to_dict)
from .trace_model import PartialCorrMatrix, ResidualSeries

# RdBu-style endpoints; white at zero.
NEGATIVE_RGB = (33, 102, 172)
POSITIVE_RGB = (178, 24, 43)
ZERO_RGB = (255, 255, 255)
UNDEFINED_RGB = (200, 200, 200)


@dataclass(frozen=True)
class RenderSpec:
    cell_size: int = 56
    label_margin: int = 90
    precision: int = 2
    font_size: int = 12
    title: str = ""


def _as_matrix(result) -> PartialCorrMatrix:
    return result.matrix if isinstance(result, PartialCorrResult) else result


def corr_color(value: float) -> str:
    """Diverging colour for a correlation in [-1, 1]; ``corr_color(-r)`` mirrors ``corr_color(r)``."""
    v = min(1.0, max(-1.0, float(value)))
    end = POSITIVE_RGB if v >= 0 else NEGATIVE_RGB
    t = abs(v)
    rgb = (round(z + (e - z) * t) for z, e in zip(ZERO_RGB, end))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def format_corr(value: float, precision: int = 2) -> str:
    text = f"{value:.{precision}f}"
    # avoid "-0.00"
    if float(text) == 0:
        text = f"{0.0:.{precision}f}"
    return text


def render_heatmap(result, spec: RenderSpec = RenderSpec()) -> str:
    """Annotated correlation grid as an SVG 1.1 document.

    Defined cells are filled on a fixed [-1, 1] diverging scale and
    labelled; undefined cells are grey, hatched and carry no number.
    """
    m = _as_matrix(result)
    n = len(m.datasets)
    if n == 0:
        raise ValueError("cannot render an empty matrix")
    c, pad = spec.cell_size, spec.label_margin
    top = pad + (24 if spec.title else 0)
    width, height = pad + n * c + 10, top + n * c + 10
    out = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif" '
        f'font-size="{spec.font_size}">',
        "<defs>",
        '<pattern id="undefined-hatch" patternUnits="userSpaceOnUse" width="8" height="8">',
        '<rect width="8" height="8" fill="#{:02x}{:02x}{:02x}"/>'.format(*UNDEFINED_RGB),
        '<path d="M0,8 L8,0" stroke="#777777" stroke-width="1"/>',
        "</pattern>",
        "</defs>",
    ]
    if spec.title:
        out.append(f'<text x="{width / 2:g}" y="18" text-anchor="middle" font-weight="bold">'
                   f"{escape(spec.title)}</text>")
    for k, name in enumerate(m.datasets):
        mid = k * c + c / 2
        out.append(f'<text class="row-label" x="{pad - 6}" y="{top + mid:g}" text-anchor="end" '
                   f'dominant-baseline="middle">{escape(name)}</text>')
        out.append(f'<text class="col-label" x="{pad + mid:g}" y="{top - 6}" text-anchor="start" '
                   f'transform="rotate(-45 {pad + mid:g} {top - 6})">{escape(name)}</text>')
    for i in range(n):
        for j in range(n):
            v = m.entries[i][j]
            x, y = pad + j * c, top + i * c
            if v is None:
                out.append(f'<rect class="cell undefined" x="{x}" y="{y}" width="{c}" height="{c}" '
                           f'fill="url(#undefined-hatch)" stroke="#ffffff"/>')
                continue
            out.append(f'<rect class="cell" x="{x}" y="{y}" width="{c}" height="{c}" '
                       f'fill="{corr_color(v)}" stroke="#ffffff"/>')
            ink = "#ffffff" if abs(v) > 0.6 else "#000000"
            out.append(f'<text class="value" x="{x + c / 2:g}" y="{y + c / 2:g}" text-anchor="middle" '
                       f'dominant-baseline="middle" fill="{ink}">{format_corr(v, spec.precision)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def edge_width(value: float) -> float:
    """Pen width of a graph edge: grows linearly from 0.5 at 0 to 4.5 at |r| = 1."""
    return 0.5 + 4.0 * abs(value)


def _dot_id(name: str) -> str:
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


def render_graph(result, name: str = "partial_corr") -> str:
    """Undirected DOT graph; one edge per defined pair, dashed when negative."""
    m = _as_matrix(result)
    if not m.datasets:
        raise ValueError("cannot render an empty matrix")
    lines = [f"graph {_dot_id(name)} {{", '  node [shape=ellipse];']
    lines += [f"  {_dot_id(d)};" for d in sorted(m.datasets)]
    edges = []
    for d1, d2, v in m.upper_pairs():
        if v is None:
            continue
        a, b = sorted((d1, d2))
        style = "solid" if v >= 0 else "dashed"
        edges.append((a, b, f'  {_dot_id(a)} -- {_dot_id(b)} [penwidth={edge_width(v):.6g}, '
                            f'style={style}, label="{format_corr(v)}"];'))
    lines += [e for *_, e in sorted(edges)]
    lines.append("}")
    return "\n".join(lines) + "\n"


def matrix_to_csv(matrix) -> str:
    """Long form ``dataset_1,dataset_2,partial_corr``; undefined is an empty field."""
    m = _as_matrix(matrix)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset_1", "dataset_2", "partial_corr"])
    for d1, d2, v in m.upper_pairs():
        w.writerow([d1, d2, "" if v is None else repr(v)])
    return buf.getvalue()


def matrix_to_dict(m: PartialCorrMatrix) -> dict:
    return {"datasets": list(m.datasets), "entries": [list(row) for row in m.entries]}


def matrix_from_dict(data: dict) -> PartialCorrMatrix:
    return PartialCorrMatrix(tuple(data["datasets"]), data["entries"])


def _model_to_dict(model: RegressorModel) -> dict:
    d = model.diagnostics
    return {
        "kind": kind_to_dict(model.kind),
        "coefficients": model.coefficients.tolist(),
        "x_domain": list(model.x_domain),
        "knots": None if model.knots is None else model.knots.tolist(),
        "chosen_lambda": model.chosen_lambda,
        "n_points": model.n_points,
        "diagnostics": {
            "rss": d.rss, "effective_dof": d.effective_dof, "gcv": d.gcv,
            "lambda_path": list(d.lambda_path), "edf_path": list(d.edf_path),
            "gcv_path": [None if not np.isfinite(g) else g for g in d.gcv_path],
        },
    }


def _model_from_dict(data: dict) -> RegressorModel:
    d = data["diagnostics"]
    diag = Diagnostics(d["rss"], d["effective_dof"], d["gcv"], tuple(d["lambda_path"]),
                       tuple(d["edf_path"]),
                       tuple(float("inf") if g is None else g for g in d["gcv_path"]))
    return RegressorModel(kind_from_dict(data["kind"]), data["coefficients"], tuple(data["x_domain"]),
                          diag, data["knots"], data["chosen_lambda"], data["n_points"])


def result_to_dict(result: PartialCorrResult) -> dict:
    models = {d: _model_to_dict(mod) for d, mod in result.per_dataset_models.items()}
    per_run = None
    if result.per_run_models is not None:
        per_run = {run: {d: _model_to_dict(mod) for d, mod in ms.items()}
                   for run, ms in result.per_run_models.items()}
    return {
        "regressor": kind_to_dict(result.regressor_kind),
        "n_points": result.n_points,
        "per_run": result.per_run,
        "matrix": matrix_to_dict(result.matrix),
        "average_partial_corr": average_partial_corr(result),
        "models": models,
        "per_run_models": per_run,
        "residuals": {d: [list(p) for p in r.points] for d, r in result.residuals.items()},
    }


def result_from_dict(data: dict) -> PartialCorrResult:
    residuals = {}
    for d, pts in data["residuals"].items():
        residuals[d] = ResidualSeries(d, tuple(p[0] for p in pts), np.array([p[1] for p in pts], dtype=np.int64),
                                      np.array([p[2] for p in pts], dtype=float))
    per_run = data.get("per_run_models")
    if per_run is not None:
        per_run = {run: {d: _model_from_dict(m) for d, m in ms.items()} for run, ms in per_run.items()}
    return PartialCorrResult(
        matrix_from_dict(data["matrix"]), kind_from_dict(data["regressor"]), data["n_points"],
        {d: _model_from_dict(m) for d, m in data["models"].items()}, residuals,
        per_run=data.get("per_run", False), per_run_models=per_run)


def dump_result(result: PartialCorrResult, fmt: str = "json") -> str:
    """Serialise a result.

    ``json`` gives the full nested result (UTF-8, sorted keys, undefined as
    ``null``); ``csv`` only the matrix in long form.
    """
    if fmt == "json":
        return json.dumps(result_to_dict(result), sort_keys=True, indent=1, allow_nan=False) + "\n"
    if fmt == "csv":
        return matrix_to_csv(result.matrix)
    raise ValueError(f"unknown format {fmt!r}")


def load_result(text: str) -> PartialCorrResult:
    return result_from_dict(json.loads(text))


def curves_to_csv(result: PartialCorrResult, n: int = 101) -> str:
    """Fitted regressor curves (``dataset,x,prediction``) for plotting."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "x", "prediction"])
    for d in sorted(result.per_dataset_models):
        for x, y in curve_samples(result.per_dataset_models[d], n):
            w.writerow([d, repr(x), repr(y)])
    return buf.getvalue()
