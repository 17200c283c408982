import pytest

from oodcorr.trace_model import RunSet


@pytest.fixture
def make_runset():
    return RunSet.from_arrays


@pytest.fixture
def small_csv(tmp_path):
    """2 runs x 3 steps x 3 datasets (MNLI in-domain)."""
    lines = ["run,step,dataset,accuracy"]
    for run, base in (("r1", 50.0), ("r2", 52.0)):
        for step in (0, 100, 200):
            lines.append(f"{run},{step},MNLI,{base + step / 10}")
            lines.append(f"{run},{step},HANS,{base - 1 + step / 20}")
            lines.append(f"{run},{step},PAWS,{base + 3 - step / 50}")
    path = tmp_path / "traces.csv"
    path.write_text("\n".join(lines) + "\n")
    return path
