"""Exit criteria for the package, one test per criterion.

Each test prints a single ``ACCEPTANCE <n> PASS|FAIL`` line (visible with
``pytest -s`` or in the captured output of a failure) before asserting.
"""
import csv
import io
import json
import math
import random
import re
import time

import numpy as np
import pytest
from scipy.interpolate import BSpline

from oodcorr.cli import main
from oodcorr.export import render_graph
from oodcorr.ingest import align_checkpoints, build_runset, format_trace_csv, parse_rows
from oodcorr.partial_corr import partial_corr_matrix, pearson
from oodcorr.regressors import Gam, Linear, fit_gam, predict
from oodcorr.summary import best_checkpoint, format_table_text, summary_table
from oodcorr.synth import InDomainCurve, OodSpec, SynthConfig, ground_truth_partial_corr, simulate_runset
from oodcorr.trace_model import EvalTrace, PartialCorrMatrix, RunSet, ScoreSeries


def report(capsys, number, title, ok, detail=""):
    with capsys.disabled():
        print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else ""))


def textbook_partial(x, y1, y2):
    r = np.corrcoef(np.vstack([x, y1, y2]))
    return (r[1, 2] - r[0, 1] * r[0, 2]) / math.sqrt((1 - r[0, 1] ** 2) * (1 - r[0, 2] ** 2))


# 1 ------------------------------------------------------------------------

def test_1_closed_form_equivalence(capsys):
    rng = np.random.default_rng(1001)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        x = rng.uniform(30, 95, (2, 100))
        z = rng.normal(size=x.shape)
        slopes, loads = rng.uniform(-1, 1, 3), rng.uniform(-3, 3, 3)
        ood = {d: np.clip(50 + s * (x - 60) + w * z + rng.normal(0, 2, x.shape), 0, 100)
               for d, s, w in zip("ABC", slopes, loads)}
        rs = RunSet.from_arrays(x, ood)
        m = partial_corr_matrix(rs, Linear()).matrix
        xs = rs.pooled("A")[2]
        ys = {d: rs.pooled(d)[3] for d in "ABC"}
        for d1, d2, v in m.upper_pairs():
            worst = max(worst, abs(v - textbook_partial(xs, ys[d1], ys[d2])))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 5
    report(capsys, 1, "Linear partial correlation equals textbook formula", ok,
           f"max |diff| = {worst:.2e} < 1e-10, {elapsed:.2f}s < 5s")
    assert worst < 1e-10
    assert elapsed < 5


# 2 ------------------------------------------------------------------------

def _oracle_configs(n_runs, n_steps):
    params = [  # (w, sigma) per dataset
        [(1.0, 1.0), (1.0, 1.0), (1.0, 1.0)],
        [(0.0, 1.0), (0.0, 2.0), (0.0, 0.5)],
        [(2.0, 1.0), (1.0, 2.0), (-1.0, 1.0)],
        [(1.0, 0.0), (-1.0, 0.5), (0.5, 0.5)],
        [(0.3, 1.0), (0.3, 1.0), (3.0, 1.0)],
        [(1.5, 0.5), (1.5, 0.5), (-1.5, 0.5)],
        [(0.5, 2.0), (2.0, 0.5), (1.0, 1.0)],
        [(-2.0, 1.0), (1.0, 1.0), (0.0, 1.0)],
        [(1.0, 3.0), (3.0, 1.0), (2.0, 2.0)],
        [(0.8, 0.6), (-0.6, 0.8), (0.1, 0.1)],
    ]
    for k, p in enumerate(params):
        specs = [OodSpec(d, alpha=5 + 5 * j, beta=0.4 + 0.2 * j, w=w, sigma=s)
                 for j, (d, (w, s)) in enumerate(zip(("ANLI", "HANS", "PAWS"), p))]
        yield SynthConfig(specs, n_runs=n_runs, n_steps=n_steps, seed=7000 + k,
                          in_domain_curve=InDomainCurve(A=40, tau=n_steps / 5, base=50, sigma_ind=2))


def test_2_synthetic_oracle_convergence(capsys):
    start = time.perf_counter()
    worst = {}
    for label, n_runs, n_steps, tol in (("5k", 5, 1000, 0.05), ("50k", 10, 5000, 0.02)):
        errs = []
        for cfg in _oracle_configs(n_runs, n_steps):
            rs = simulate_runset(cfg)
            assert rs.n_points == n_runs * n_steps
            est = partial_corr_matrix(rs, Linear()).matrix.to_array()
            errs.append(np.nanmax(np.abs(est - ground_truth_partial_corr(cfg).to_array())))
        worst[label] = (max(errs), tol)
    elapsed = time.perf_counter() - start
    ok = all(e < tol for e, tol in worst.values()) and elapsed < 60
    report(capsys, 2, "Monte-Carlo convergence to analytic partial correlations", ok,
           ", ".join(f"n={k}: max err {e:.4f} < {t}" for k, (e, t) in worst.items()) + f", {elapsed:.1f}s < 60s")
    for e, tol in worst.values():
        assert e < tol
    assert elapsed < 60


# 3 ------------------------------------------------------------------------

def _direct_gcv(x, y, lam, knots, n_basis=10):
    B = BSpline.design_matrix(x, knots, 3).toarray()
    D = np.diff(np.eye(n_basis), 2, axis=0)
    H = B @ np.linalg.solve(B.T @ B + lam * D.T @ D, B.T)
    return len(x) * np.sum((y - H @ y) ** 2) / (len(x) - np.trace(H)) ** 2


def test_3_gam_correctness(capsys):
    start = time.perf_counter()
    rng = np.random.default_rng(3003)

    x_line = rng.uniform(40, 95, 200)
    m = fit_gam(x_line, 2 * x_line + 1, Gam(lambda_grid=(1e12,)))
    line_err = float(np.max(np.abs(predict(m, x_line) - (2 * x_line + 1))))

    x = rng.uniform(0, 1, 500)
    y = np.sin(2 * np.pi * x) + rng.normal(0, 0.1, 500)
    cfg = Gam()
    m = fit_gam(x, y, cfg)
    rmse = float(np.sqrt(np.mean((predict(m, x) - np.sin(2 * np.pi * x)) ** 2)))

    dense = np.logspace(-4, 6, 1001)
    brute = dense[int(np.argmin([_direct_gcv(x, y, lam, m.knots) for lam in dense]))]
    step = math.log10(cfg.lambda_grid[1] / cfg.lambda_grid[0])
    lam_gap = abs(math.log10(m.chosen_lambda / brute))

    edf = np.asarray(m.diagnostics.edf_path)
    monotone = bool(np.all(np.diff(edf) <= 1e-12)) and len(edf) == len(cfg.lambda_grid)
    elapsed = time.perf_counter() - start

    checks = {"a": line_err < 1e-6, "b": rmse < 0.05, "c": lam_gap <= step, "d": monotone}
    report(capsys, 3, "P-spline correctness", all(checks.values()) and elapsed < 30,
           f"(a) line err {line_err:.1e}; (b) RMSE {rmse:.4f}; (c) lambda {m.chosen_lambda:.3g} vs "
           f"brute {brute:.3g}, gap {lam_gap:.3f} <= {step:.3f} decades; (d) edf non-increasing {monotone}; "
           f"{elapsed:.1f}s")
    assert checks == {"a": True, "b": True, "c": True, "d": True}
    assert elapsed < 30


# 4 ------------------------------------------------------------------------

def test_4_regressor_choice_robustness(capsys):
    worst = 0.0
    for cfg in _oracle_configs(5, 1000):
        rs = simulate_runset(cfg)
        lin = partial_corr_matrix(rs, Linear()).matrix.to_array()
        gam = partial_corr_matrix(rs, Gam()).matrix.to_array()
        worst = max(worst, float(np.nanmax(np.abs(gam - lin))))
    report(capsys, 4, "GAM and Linear agree on linear ground truth (n=5000)", worst < 0.05,
           f"max |rho_GAM - rho_Linear| = {worst:.4f} < 0.05")
    assert worst < 0.05


# 5 ------------------------------------------------------------------------

def test_5_pearson_units(capsys):
    results = [
        pearson([1, 2, 3], [2, 4, 6]) == 1.0,
        pearson([1, 2, 3], [3, 2, 1]) == -1.0,
        pearson([1, 2, 3, 4], [1, 3, 2, 4]) == 0.8,
    ]
    undefined = [pearson([1, 2, 3], [5, 5, 5]), pearson([7.1] * 4, [1, 2, 3, 4]),
                 pearson([0.3] * 5, [0.3] * 5)]
    ok = all(results) and all(u is None for u in undefined)
    report(capsys, 5, "Pearson examples exact; zero variance is undefined, not NaN", ok,
           f"exact {results}, undefined {undefined}")
    assert ok


# 6 ------------------------------------------------------------------------

def test_6_summary_conventions(capsys):
    steps = (0, 10, 20)
    tie = EvalTrace("r", "MNLI", ScoreSeries(steps, (90, 70, 90)), {"HANS": ScoreSeries(steps, (1, 2, 3))})
    tie_ok = best_checkpoint(tie) == 0

    rs = RunSet("opt", "MNLI", (
        EvalTrace("a", "MNLI", ScoreSeries((0, 1), (80, 90)), {"HANS": ScoreSeries((0, 1), (30, 60))}),
        EvalTrace("b", "MNLI", ScoreSeries((0, 1), (95, 85)), {"HANS": ScoreSeries((0, 1), (70, 20))}),
    ))
    table = summary_table(rs)
    row = table.row("HANS")
    std_ok = f"{row.mean:.2f}" == "65.00" and f"{row.std:.2f}" == "7.07"
    cell_ok = row.cell == "65.0 ± 7.1"
    text = format_table_text(table)
    chance_line = next(line for line in text.splitlines() if line.startswith("Chance performance"))
    chance_ok = chance_line.split()[2:] == ["50.0", "50.0"]
    from oodcorr.summary import format_cell
    style_cell = format_cell(89.0, 5.9) == "89.0 ± 5.9"

    ok = tie_ok and std_ok and cell_ok and chance_ok and style_cell
    report(capsys, 6, "Summary conventions", ok,
           f"tie->earliest {tie_ok}, 65.00 ± 7.07 {std_ok}, cell '{row.cell}', chance row {chance_ok}")
    assert ok


# 7 ------------------------------------------------------------------------

SYNTH = {
    "n_runs": 3, "n_steps": 120, "seed": 2024, "in_domain": "MNLI", "label": "golden",
    "in_domain_curve": {"A": 40, "tau": 20, "base": 50, "sigma_ind": 2},
    "ood_specs": [
        {"dataset": "HANS", "alpha": 10, "beta": 0.6, "w": 1.0, "sigma": 1.0},
        {"dataset": "PAWS", "alpha": 20, "beta": 0.4, "w": -1.0, "sigma": 1.5},
        {"dataset": "ANLI", "alpha": 5, "beta": 0.5, "w": 0.5, "sigma": 1.0},
        {"dataset": "WNLI", "alpha": 45, "beta": 0.1, "w": 0.0, "sigma": 1.0},
    ],
}


def _pipeline(root, config):
    traces = root / "traces.csv"
    assert main(["simulate", "--config", str(config), "--output", str(traces)]) == 0
    out = root / "analysis"
    assert main(["analyze", "--input", str(traces), "--output-dir", str(out), "--regressor", "gam",
                 "--heatmap", "--graph"]) == 0
    rendered = root / "rendered"
    assert main(["render", "--result", str(out / "partial_corr.json"), "--output-dir", str(rendered)]) == 0
    return {name: path.read_bytes() for name, path in {
        "traces.csv": traces, "partial_corr.csv": out / "partial_corr.csv",
        "partial_corr.json": out / "partial_corr.json", "heatmap.svg": out / "heatmap.svg",
        "graph.dot": out / "graph.dot", "rendered.svg": rendered / "heatmap.svg",
        "rendered.dot": rendered / "graph.dot"}.items()}


def test_7_determinism_and_golden_files(tmp_path, capsys):
    config = tmp_path / "synth.json"
    config.write_text(json.dumps(SYNTH))
    (tmp_path / "one").mkdir()
    (tmp_path / "two").mkdir()
    first, second = _pipeline(tmp_path / "one", config), _pipeline(tmp_path / "two", config)
    identical = {name: first[name] == second[name] for name in first}

    m = PartialCorrMatrix(("a", "b", "c", "d"),
                          [[1, 0.0, 0.8, 1.0], [0.0, 1, None, 0.1], [0.8, None, 1, -0.5], [1.0, 0.1, -0.5, 1]])
    widths = {(a, b): float(w) for a, b, w in
              re.findall(r'"(\w)" -- "(\w)" \[penwidth=([\d.]+)', render_graph(m))}
    spot = {rho: widths[pair] for rho, pair in ((0.0, ("a", "b")), (0.8, ("a", "c")), (1.0, ("a", "d")))}
    widths_ok = all(abs(w - (0.5 + 4 * abs(rho))) < 1e-9 for rho, w in spot.items())

    # the pipeline's own graph also obeys the law
    res = json.loads(first["partial_corr.json"])
    names, entries = res["matrix"]["datasets"], res["matrix"]["entries"]
    dot = first["graph.dot"].decode()
    law_ok = True
    for a, b, w in re.findall(r'"(\w+)" -- "(\w+)" \[penwidth=([\d.]+)', dot):
        rho = entries[names.index(a)][names.index(b)]
        law_ok &= abs(float(w) - (0.5 + 4 * abs(rho))) < 1e-5

    ok = all(identical.values()) and widths_ok and law_ok
    report(capsys, 7, "Byte-identical pipeline output; DOT widths 0.5 + 4|rho|", ok,
           f"identical {sorted(k for k, v in identical.items() if v)}, spot widths {spot}")
    assert all(identical.values()), identical
    assert widths_ok and law_ok


# 8 ------------------------------------------------------------------------

def test_8_permutation_invariance(capsys):
    cfg = SynthConfig([OodSpec("A", 10, 0.6, 1, 1), OodSpec("B", 5, 0.4, -1, 1), OodSpec("C", 20, 0.3, 0.5, 2)],
                      n_runs=4, n_steps=80, seed=88, in_domain="M")
    text = format_trace_csv(simulate_runset(cfg))
    header, *rows = text.splitlines()
    reference = {}
    for kind in (Linear(), Gam()):
        rs, _ = align_checkpoints(build_runset(parse_rows(text), "M"))
        reference[kind.name] = partial_corr_matrix(rs, kind).matrix
    rnd = random.Random(8)
    worst = 0.0
    for _ in range(5):
        rnd.shuffle(rows)
        rs, _ = align_checkpoints(build_runset(parse_rows("\n".join([header, *rows]) + "\n"), "M"))
        traces = list(rs.traces)
        rnd.shuffle(traces)
        rs = RunSet(rs.label, rs.in_domain, tuple(traces))
        for kind in (Linear(), Gam()):
            m = partial_corr_matrix(rs, kind).matrix
            ref = reference[kind.name]
            assert m.defined_mask().tolist() == ref.defined_mask().tolist()
            worst = max(worst, float(np.nanmax(np.abs(m.to_array() - ref.to_array()))))
    report(capsys, 8, "Row and trace order do not change the matrix", worst <= 1e-12,
           f"max |diff| = {worst:.1e} <= 1e-12")
    assert worst <= 1e-12
