"""One-dimensional regressors mapping in-domain accuracy to OOD accuracy.

Three kinds are available:

* :class:`Linear` -- ordinary least squares line.
* :class:`Ridge` -- line with an L2 penalty on the slope (intercept free).
* :class:`Gam` -- penalized B-spline (P-spline) smoother whose smoothing
  parameter is chosen by generalized cross-validation (GCV).

Use :func:`fit` to dispatch on the kind, :func:`predict` to evaluate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .bspline import basis_matrix, difference_matrix, equispaced_knots
from .errors import (ConfigError, DegenerateX, LengthMismatch, NonPositiveLambda,
                     SingularSystem, TooFewPoints)

DEFAULT_LAMBDA_GRID = tuple(float(v) for v in np.logspace(-4, 6, 40))


@dataclass(frozen=True)
class Linear:
    name = "linear"
    min_points = 2


@dataclass(frozen=True)
class Ridge:
    lam: float = 1.0
    name = "ridge"
    min_points = 2

    def __post_init__(self):
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise NonPositiveLambda(f"ridge lambda must be finite and > 0, got {self.lam!r}")


@dataclass(frozen=True)
class Gam:
    """P-spline configuration.

    Parameters
    ----------
    n_basis : int
        Number of B-spline basis functions.
    degree : int
        Spline degree (3 = cubic).
    penalty_order : int
        Order of the difference penalty on adjacent coefficients.
    lambda_grid : tuple of float
        Candidate smoothing parameters, strictly increasing; the one with
        the lowest GCV score is used.
    """

    n_basis: int = 10
    degree: int = 3
    penalty_order: int = 2
    lambda_grid: tuple = DEFAULT_LAMBDA_GRID
    name = "gam"

    def __post_init__(self):
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in self.lambda_grid))
        if self.degree < 0 or self.penalty_order < 0:
            raise ConfigError("degree and penalty_order must be non-negative")
        if self.n_basis < 4:
            raise ConfigError(f"n_basis must be >= 4, got {self.n_basis}")
        if self.n_basis <= self.degree:
            raise ConfigError(f"n_basis ({self.n_basis}) must exceed degree ({self.degree})")
        if self.penalty_order >= self.n_basis:
            raise ConfigError("penalty_order must be smaller than n_basis")
        grid = self.lambda_grid
        if not grid:
            raise ConfigError("lambda_grid is empty")
        if not all(math.isfinite(v) and v > 0 for v in grid):
            raise ConfigError("lambda_grid values must be finite and positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("lambda_grid must be strictly increasing")

    @property
    def min_points(self):
        return self.n_basis

    @classmethod
    def log_grid(cls, lambda_min=1e-4, lambda_max=1e6, steps=40, **kwargs) -> "Gam":
        if steps < 1:
            raise ConfigError("lambda grid needs at least one step")
        if not 0 < lambda_min <= lambda_max:
            raise ConfigError("need 0 < lambda_min <= lambda_max")
        if steps > 1 and lambda_min == lambda_max:
            raise ConfigError("lambda_min == lambda_max requires a single step")
        grid = np.logspace(math.log10(lambda_min), math.log10(lambda_max), steps)
        return cls(lambda_grid=tuple(grid), **kwargs)


GamConfig = Gam
RegressorKind = Union[Linear, Ridge, Gam]


@dataclass(frozen=True)
class Diagnostics:
    rss: float
    effective_dof: float
    gcv: Optional[float]
    # GAM only: score of every candidate smoothing parameter
    lambda_path: tuple = ()
    edf_path: tuple = ()
    gcv_path: tuple = ()


@dataclass(frozen=True, eq=False)
class RegressorModel:
    """A fitted regressor.  Coefficients are (intercept, slope) for the
    linear kinds and B-spline weights for :class:`Gam`."""

    kind: RegressorKind
    coefficients: np.ndarray
    x_domain: tuple
    diagnostics: Diagnostics
    knots: Optional[np.ndarray] = None
    chosen_lambda: Optional[float] = None
    n_points: int = field(default=0)

    def __post_init__(self):
        for name in ("coefficients", "knots"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr, dtype=float)
                arr.flags.writeable = False
                object.__setattr__(self, name, arr)

    def predict(self, x):
        return predict(self, x)


def _check_xy(x, y, min_points):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise LengthMismatch(f"x has {x.size} points, y has {y.size}")
    if x.size < min_points:
        raise TooFewPoints(f"need at least {min_points} points, got {x.size}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DegenerateX("inputs contain non-finite values")
    return x, y


def _line_fit(kind, x, y, lam):
    n = x.size
    x_mean, y_mean = x.mean(), y.mean()
    xc = x - x_mean
    sxx = float(xc @ xc)
    sxy = float(xc @ (y - y_mean))
    denom = sxx + lam
    slope = sxy / denom if denom > 0 else 0.0
    intercept = y_mean - slope * x_mean
    resid = y - (intercept + slope * x)
    rss = float(resid @ resid)
    edf = 1.0 + (sxx / denom if denom > 0 else 0.0)
    gcv = n * rss / (n - edf) ** 2 if n > edf else None
    return RegressorModel(kind, np.array([intercept, slope]), (float(x.min()), float(x.max())),
                          Diagnostics(rss, edf, gcv), n_points=n)


def fit_linear(x, y) -> RegressorModel:
    """Least-squares line; a constant `x` gives slope 0 and intercept mean(y)."""
    x, y = _check_xy(x, y, Linear.min_points)
    return _line_fit(Linear(), x, y, 0.0)


def fit_ridge(x, y, lam: float = 1.0) -> RegressorModel:
    """Ridge line ``b = Sxy / (Sxx + lam)`` on centered inputs, intercept unpenalized."""
    kind = Ridge(lam)
    x, y = _check_xy(x, y, Ridge.min_points)
    return _line_fit(kind, x, y, kind.lam)


def fit_gam(x, y, cfg: Gam = Gam()) -> RegressorModel:
    """Fit a P-spline, selecting the smoothing parameter by GCV.

    For every ``lam`` in ``cfg.lambda_grid`` the penalized normal equations
    ``(B'B + lam D'D) beta = B'y`` are solved by Cholesky factorization in
    the eigenbasis of ``D'D``, where `B` is the B-spline design matrix and
    `D` the difference matrix.
    The score ``GCV = n RSS / (n - tr H)**2`` with hat matrix
    ``H = B (B'B + lam D'D)^-1 B'`` decides the winner (first minimum on
    ties).

    Raises
    ------
    TooFewPoints
        Fewer points than basis functions.
    DegenerateX
        All `x` equal.
    SingularSystem
        The penalized system could not be factorized for any candidate.
    """
    x, y = _check_xy(x, y, cfg.min_points)
    x_min, x_max = float(x.min()), float(x.max())
    if not x_max > x_min:
        raise DegenerateX("GAM needs at least two distinct x values")
    n = x.size
    knots = equispaced_knots(x_min, x_max, cfg.n_basis, cfg.degree)
    B = basis_matrix(x, knots, cfg.degree)
    # Rotate coefficients onto the right singular vectors of the difference
    # matrix: the penalty becomes diagonal and leaves the polynomial null
    # space untouched, so huge lambdas do not swamp B'B in rounding.
    _, sv, Vt = np.linalg.svd(difference_matrix(cfg.n_basis, cfg.penalty_order))
    Q = Vt.T
    penalty = np.zeros(cfg.n_basis)
    penalty[:sv.size] = sv ** 2
    BQ = B @ Q
    G, c = BQ.T @ BQ, BQ.T @ y

    best = None
    lams, edfs, gcvs = [], [], []
    for lam in cfg.lambda_grid:
        try:
            factor = cho_factor(G + np.diag(lam * penalty))
        except LinAlgError:
            continue
        gamma = cho_solve(factor, c)
        resid = y - BQ @ gamma
        rss = float(resid @ resid)
        edf = float(np.trace(cho_solve(factor, G)))
        gcv = n * rss / (n - edf) ** 2 if n > edf else math.inf
        lams.append(lam)
        edfs.append(edf)
        gcvs.append(gcv)
        if best is None or gcv < best[0]:
            best = (gcv, lam, Q @ gamma, rss, edf)
    if best is None:
        raise SingularSystem("penalized normal equations not positive definite for any lambda")

    gcv, lam, beta, rss, edf = best
    diag = Diagnostics(rss, edf, gcv if math.isfinite(gcv) else None,
                       tuple(lams), tuple(edfs), tuple(gcvs))
    return RegressorModel(cfg, beta, (x_min, x_max), diag, knots=knots, chosen_lambda=lam, n_points=n)


def fit(kind: RegressorKind, x, y) -> RegressorModel:
    if isinstance(kind, Linear):
        return fit_linear(x, y)
    if isinstance(kind, Ridge):
        return fit_ridge(x, y, kind.lam)
    if isinstance(kind, Gam):
        return fit_gam(x, y, kind)
    raise TypeError(f"unknown regressor kind {kind!r}")


def predict(model: RegressorModel, x):
    """Evaluate a fitted model at scalar or array `x`.

    GAM inputs are clamped to the training range first; lines extrapolate.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if isinstance(model.kind, Gam):
        lo, hi = model.x_domain
        B = basis_matrix(np.clip(x, lo, hi), model.knots, model.kind.degree)
        out = B @ model.coefficients
    else:
        intercept, slope = model.coefficients
        out = intercept + slope * x
    return float(out[0]) if scalar else out


def curve_samples(model: RegressorModel, n: int = 101) -> list:
    """``n`` evenly spaced ``(x, prediction)`` pairs across the training range."""
    if n < 2:
        raise ValueError("n must be >= 2")
    xs = np.linspace(*model.x_domain, n)
    return list(zip(xs.tolist(), np.asarray(predict(model, xs)).tolist()))


def kind_from_name(name: str, ridge_lambda: float = 1.0, gam: Optional[Gam] = None) -> RegressorKind:
    name = name.lower()
    if name == "linear":
        return Linear()
    if name == "ridge":
        return Ridge(ridge_lambda)
    if name == "gam":
        return gam or Gam()
    raise ConfigError(f"unknown regressor {name!r}")


def kind_to_dict(kind: RegressorKind) -> dict:
    if isinstance(kind, Ridge):
        return {"name": "ridge", "lambda": kind.lam}
    if isinstance(kind, Gam):
        return {"name": "gam", "n_basis": kind.n_basis, "degree": kind.degree,
                "penalty_order": kind.penalty_order, "lambda_grid": list(kind.lambda_grid)}
    return {"name": "linear"}


def kind_from_dict(data: dict) -> RegressorKind:
    name = data.get("name")
    if name == "ridge":
        return Ridge(data["lambda"])
    if name == "gam":
        return Gam(data["n_basis"], data["degree"], data["penalty_order"], tuple(data["lambda_grid"]))
    if name == "linear":
        return Linear()
    raise ConfigError(f"unknown regressor {name!r}")
