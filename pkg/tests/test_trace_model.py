import dataclasses

import pytest
from hypothesis import given, strategies as st

from oodcorr.errors import InvalidRunSet
from oodcorr.trace_model import (EvalTrace, PartialCorrMatrix, RunSet, ScoreSeries, Violation,
                                 validate_trace)


def trace(ind_steps=(0, 100, 200), ind_vals=(50, 60, 70), ood=None, run_id="r1", in_domain="MNLI"):
    ood = ood if ood is not None else {"HANS": ScoreSeries(ind_steps, (49, 51, 53))}
    return EvalTrace(run_id, in_domain, ScoreSeries(ind_steps, ind_vals), ood)


def test_valid_trace_has_no_violations():
    assert validate_trace(trace()) == []


def test_out_of_range_accuracy():
    t = trace(ood={"HANS": ScoreSeries((0, 100, 200), (49, 101.0, 53))})
    assert [(v.field, v.rule) for v in validate_trace(t)] == [("values", "range")]


def test_misaligned_steps():
    t = trace(ood={"HANS": ScoreSeries((0, 100), (49, 51))})
    assert [(v.field, v.rule) for v in validate_trace(t)] == [("steps", "alignment")]


@pytest.mark.parametrize("ood, rule", [
    ({}, ("ood_series", "non_empty")),
    ({"MNLI": ScoreSeries((0, 100, 200), (1, 2, 3))}, ("ood_series", "excludes_in_domain")),
])
def test_structural_violations(ood, rule):
    assert rule in [(v.field, v.rule) for v in validate_trace(trace(ood=ood))]


def test_series_rules():
    t = trace(ind_steps=(5, 3), ind_vals=(1, 2), ood={"X": ScoreSeries((5, 3), (1, 2))})
    assert ("steps", "increasing") in [(v.field, v.rule) for v in validate_trace(t)]
    t = trace(ind_steps=(0,), ind_vals=(1,), ood={"X": ScoreSeries((0,), (1,))})
    assert ("steps", "length") in [(v.field, v.rule) for v in validate_trace(t)]


def test_violation_is_data():
    v = Violation("values", "range")
    assert v.field == "values" and v.detail == ""


def test_trace_is_immutable():
    t = trace()
    with pytest.raises(dataclasses.FrozenInstanceError):
        t.run_id = "x"
    with pytest.raises(TypeError):
        t.ood_series["NEW"] = t.in_domain_series


def test_runset_sorts_traces():
    rs = RunSet("x", "MNLI", (trace(run_id="b"), trace(run_id="a")))
    assert rs.run_ids == ("a", "b")


_mutations = st.sampled_from(["in_domain", "drop_key", "extra_key", "dup_id"])


@given(_mutations, st.integers(min_value=2, max_value=5))
def test_runset_rejects_mutated_members(mutation, n):
    traces = [trace(run_id=f"r{i}") for i in range(n)]
    rs = RunSet("ok", "MNLI", tuple(traces))
    assert all(validate_trace(t) == [] for t in rs.traces)
    assert {t.in_domain for t in rs.traces} == {"MNLI"}
    assert len(set(rs.run_ids)) == n

    victim = traces[-1]
    if mutation == "in_domain":
        victim = trace(run_id=victim.run_id, in_domain="SNLI")
    elif mutation == "drop_key":
        victim = trace(run_id=victim.run_id, ood={"PAWS": ScoreSeries((0, 100, 200), (1, 2, 3))})
    elif mutation == "extra_key":
        victim = trace(run_id=victim.run_id, ood={**victim.ood_series,
                                                  "PAWS": ScoreSeries((0, 100, 200), (1, 2, 3))})
    else:
        victim = trace(run_id=traces[0].run_id)
    with pytest.raises(InvalidRunSet):
        RunSet("bad", "MNLI", tuple(traces[:-1]) + (victim,))


def test_matrix_symmetry_and_clamp():
    m = PartialCorrMatrix(("a", "b"), [[1.0, 1.0 + 1e-13], [1.0 + 1e-13, None]])
    assert m.get("a", "b") == 1.0
    assert m.get("b", "b") is None
    with pytest.raises(ValueError):
        PartialCorrMatrix(("a", "b"), [[1.0, 0.2], [0.3, 1.0]])
    with pytest.raises(ValueError):
        PartialCorrMatrix(("a", "b"), [[1.0, 1.1], [1.1, 1.0]])
    with pytest.raises(ValueError):
        PartialCorrMatrix(("a", "b"), [[1.0, float("nan")], [float("nan"), 1.0]])


def test_matrix_from_pairs_mirrors():
    calls = []

    def pair(i, j):
        calls.append((i, j))
        return 0.1 * (i + j)

    m = PartialCorrMatrix.from_pairs(["a", "b", "c"], pair, lambda i: 1.0)
    assert sorted(calls) == [(0, 1), (0, 2), (1, 2)]
    assert m.get("c", "a") == m.get("a", "c") == pytest.approx(0.2)
    assert [p[:2] for p in m.upper_pairs()] == [("a", "b"), ("a", "c"), ("b", "c")]
