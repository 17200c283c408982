"""Partial correlations of out-of-distribution accuracy over finetuning traces."""

__version__ = "0.1.0"

from .errors import InputError, NumericalError, OodCorrError
from .ingest import AlignPolicy, align_checkpoints, load_runset, parse_trace_csv, write_trace_csv
from .partial_corr import (PartialCorrResult, average_partial_corr, compute_residuals, partial_corr_matrix,
                           pearson, raw_corr_matrix)
from .regressors import (Gam, GamConfig, Linear, RegressorModel, Ridge, curve_samples, fit, fit_gam,
                         fit_linear, fit_ridge, predict)
from .summary import best_checkpoint, summary_table
from .synth import InDomainCurve, OodSpec, SynthConfig, ground_truth_partial_corr, simulate, simulate_runset
from .trace_model import (EvalTrace, PartialCorrMatrix, ResidualSeries, RunSet, ScoreSeries, Violation,
                          validate_trace)
