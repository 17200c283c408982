"""
Heatmaps, graphs and the command line
=====================================

Results render to an SVG heatmap and a DOT graph whose edge widths grow
with |rho|.  The same pipeline is available as ``oodcorr`` subcommands;
here they are driven through ``oodcorr.cli.main`` so the script stays
self-contained.
"""
import json
import tempfile
from pathlib import Path

from oodcorr.cli import main
from oodcorr.export import render_graph
from oodcorr.trace_model import PartialCorrMatrix

###############################################################################
# A hand-made matrix
# ------------------
# Undefined entries (a dataset with no residual variance) drop out of the
# graph and show up hatched in the heatmap.

m = PartialCorrMatrix(("ANLI", "HANS", "PAWS"),
                      [[1.0, -0.4, None], [-0.4, 1.0, 0.8], [None, 0.8, None]])
print(render_graph(m))

###############################################################################
# The full pipeline
# -----------------

config = {
    "n_runs": 3, "n_steps": 200, "seed": 7, "in_domain": "MNLI", "label": "cli-demo",
    "in_domain_curve": {"A": 40, "tau": 40, "base": 50, "sigma_ind": 2},
    "ood_specs": [{"dataset": "HANS", "alpha": 10, "beta": 0.6, "w": 1.0, "sigma": 1.0},
                  {"dataset": "PAWS", "alpha": 20, "beta": 0.4, "w": 1.0, "sigma": 1.5}],
}
with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp)
    (root / "synth.json").write_text(json.dumps(config))
    main(["simulate", "--config", str(root / "synth.json"), "--output", str(root / "traces.csv")])
    main(["analyze", "--input", str(root / "traces.csv"), "--output-dir", str(root / "out"),
          "--regressor", "gam", "--heatmap", "--graph"])
    main(["summarize", "--input", str(root / "traces.csv"), "--output-dir", str(root / "out")])
    main(["oracle", "--config", str(root / "synth.json"), "--output", str(root / "truth.csv")])
    print((root / "out" / "partial_corr.csv").read_text())
    print((root / "truth.csv").read_text())
