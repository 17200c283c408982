"""Synthetic finetuning traces with known partial-correlation structure.

In-domain accuracy follows a saturating curve plus Gaussian noise::

    ind_t = base + A * (1 - exp(-t / tau)) + eps_t,        eps_t ~ N(0, sigma_ind^2)

Every OOD dataset depends on it linearly, plus a latent factor ``z_t``
shared by all OOD datasets and its own noise::

    ood_d(t) = alpha_d + beta_d * g(ind_t) + w_d * z_t + eta_dt

with ``g`` the identity (or a logistic curve for the nonlinear variant).
Given ``ind_t``, the residual of dataset `d` is ``w_d z_t + eta_dt``, so the
population partial correlation of two datasets is

    w_1 w_2 / sqrt((w_1^2 + s_1^2) (w_2^2 + s_2^2)).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.stats import norm

from .errors import ConfigError
from .partial_corr import corr_matrix
from .trace_model import Corr, EvalTrace, PartialCorrMatrix, RunSet, ScoreSeries

CLIP_WARN_FRACTION = 0.01


@dataclass(frozen=True)
class InDomainCurve:
    A: float = 40.0
    tau: float = 10.0
    base: float = 50.0
    sigma_ind: float = 2.0

    def __post_init__(self):
        if not 0 < self.A <= 100:
            raise ConfigError(f"asymptote A must be in (0, 100], got {self.A}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if not self.sigma_ind >= 0:
            raise ConfigError(f"sigma_ind must be >= 0, got {self.sigma_ind}")

    def mean(self, steps):
        return self.base + self.A * (1.0 - np.exp(-np.asarray(steps, dtype=float) / self.tau))


@dataclass(frozen=True)
class OodSpec:
    dataset: str
    alpha: float = 0.0
    beta: float = 1.0
    w: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.dataset:
            raise ConfigError("OOD dataset id must be non-empty")
        if not self.sigma >= 0:
            raise ConfigError(f"{self.dataset}: sigma must be >= 0")


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the generator.

    ``link`` is ``"linear"`` (closed-form oracle exact) or ``"sigmoid"``,
    where OOD accuracy depends on ``100 / (1 + exp(-(ind - link_center) /
    link_scale))`` instead of ``ind`` itself.
    """

    ood_specs: tuple
    n_runs: int = 3
    n_steps: int = 60
    step_stride: int = 1
    in_domain_curve: InDomainCurve = field(default_factory=InDomainCurve)
    seed: int = 0
    in_domain: str = "IND"
    label: str = "synthetic"
    link: str = "linear"
    link_center: float = 70.0
    link_scale: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "ood_specs", tuple(self.ood_specs))
        if self.n_runs < 1:
            raise ConfigError("n_runs must be >= 1")
        if self.n_steps < 3:
            raise ConfigError("n_steps must be >= 3")
        if self.step_stride < 1:
            raise ConfigError("step_stride must be >= 1")
        if not self.ood_specs:
            raise ConfigError("need at least one OOD spec")
        ids = [s.dataset for s in self.ood_specs]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"duplicate OOD dataset ids: {sorted({i for i in ids if ids.count(i) > 1})}")
        if self.in_domain in ids:
            raise ConfigError(f"in-domain id {self.in_domain!r} also listed as OOD")
        if self.link not in ("linear", "sigmoid"):
            raise ConfigError(f"link must be 'linear' or 'sigmoid', got {self.link!r}")
        if not self.link_scale > 0:
            raise ConfigError("link_scale must be > 0")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        frac = self.expected_clip_fraction()
        if frac > CLIP_WARN_FRACTION:
            warnings.warn(f"config expected to clip about {100 * frac:.1f}% of accuracies to [0, 100]",
                          stacklevel=3)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.n_steps, dtype=np.int64) * self.step_stride

    def link_fn(self, ind):
        if self.link == "linear":
            return ind
        return 100.0 / (1.0 + np.exp(-(ind - self.link_center) / self.link_scale))

    def expected_clip_fraction(self) -> float:
        """Normal-approximation estimate of the share of values clipped."""
        curve = self.in_domain_curve
        mu = curve.mean(self.steps)
        probs = [_outside(mu, curve.sigma_ind)]
        for s in self.ood_specs:
            if self.link == "linear":
                m, slope_sd = s.alpha + s.beta * mu, abs(s.beta) * curve.sigma_ind
            else:
                m, slope_sd = s.alpha + s.beta * self.link_fn(mu), 0.0
            probs.append(_outside(m, math.sqrt(slope_sd ** 2 + s.w ** 2 + s.sigma ** 2)))
        return float(np.mean(probs))


def _outside(mu, sd):
    mu = np.asarray(mu, dtype=float)
    if sd == 0:
        return float(np.mean((mu < 0) | (mu > 100)))
    return float(np.mean(norm.cdf(-mu / sd) + norm.sf((100.0 - mu) / sd)))


@dataclass(frozen=True, eq=False)
class Simulation:
    """Generated run set plus the hidden quantities behind it.

    Arrays are indexed ``[run, step]`` (and ``[run, step, dataset]`` for
    ``ood_noise``); runs follow ``runset.traces`` and datasets follow
    ``cfg.ood_specs``.
    """

    cfg: SynthConfig
    runset: RunSet
    latent: np.ndarray
    ind_noise: np.ndarray
    ood_noise: np.ndarray
    n_clipped: int
    n_values: int

    def true_residuals(self) -> dict:
        """dataset -> ``w z + eta`` flattened in (run, step) order."""
        return {s.dataset: (s.w * self.latent + self.ood_noise[:, :, k]).ravel()
                for k, s in enumerate(self.cfg.ood_specs)}


def simulate(cfg: SynthConfig) -> Simulation:
    """Draw one run set.

    All randomness comes from one ``numpy.random.default_rng(cfg.seed)``
    stream of standard normals consumed run-major, step-minor; each
    (run, step) takes the in-domain noise, then the shared latent, then
    one noise draw per OOD dataset in config order.
    """
    rng = np.random.default_rng(cfg.seed)
    k = len(cfg.ood_specs)
    draws = rng.standard_normal((cfg.n_runs, cfg.n_steps, 2 + k))
    curve = cfg.in_domain_curve
    steps = cfg.steps

    ind_noise = curve.sigma_ind * draws[:, :, 0]
    latent = draws[:, :, 1]
    ind = curve.mean(steps)[None, :] + ind_noise
    alpha = np.array([s.alpha for s in cfg.ood_specs])
    beta = np.array([s.beta for s in cfg.ood_specs])
    w = np.array([s.w for s in cfg.ood_specs])
    sigma = np.array([s.sigma for s in cfg.ood_specs])
    ood_noise = sigma * draws[:, :, 2:]
    ood = alpha + beta * cfg.link_fn(ind)[:, :, None] + w * latent[:, :, None] + ood_noise

    n_clipped = int(np.sum((ind < 0) | (ind > 100)) + np.sum((ood < 0) | (ood > 100)))
    ind = np.clip(ind, 0.0, 100.0)
    ood = np.clip(ood, 0.0, 100.0)

    width = len(str(cfg.n_runs - 1))
    traces = []
    for r in range(cfg.n_runs):
        traces.append(EvalTrace(
            f"run{r:0{width}d}", cfg.in_domain, ScoreSeries(steps, ind[r]),
            {s.dataset: ScoreSeries(steps, ood[r, :, j]) for j, s in enumerate(cfg.ood_specs)}))
    runset = RunSet(cfg.label, cfg.in_domain, tuple(traces))
    n_values = ind.size + ood.size
    if n_clipped > CLIP_WARN_FRACTION * n_values:
        warnings.warn(f"{n_clipped} of {n_values} simulated accuracies clipped to [0, 100]", stacklevel=2)
    return Simulation(cfg, runset, latent, ind_noise, ood_noise, n_clipped, n_values)


def simulate_runset(cfg: SynthConfig) -> RunSet:
    return simulate(cfg).runset


def ground_truth_partial_corr(cfg: SynthConfig) -> PartialCorrMatrix:
    """Population partial correlations implied by the loadings and noise levels.

    A dataset with ``w == 0`` and ``sigma == 0`` has no residual variance;
    all its entries are undefined.
    """
    specs = sorted(cfg.ood_specs, key=lambda s: s.dataset)
    var = [s.w ** 2 + s.sigma ** 2 for s in specs]

    def pair(i, j) -> Corr:
        if var[i] == 0 or var[j] == 0:
            return None
        return specs[i].w * specs[j].w / math.sqrt(var[i] * var[j])

    return PartialCorrMatrix.from_pairs([s.dataset for s in specs], pair,
                                        lambda i: 1.0 if var[i] > 0 else None)


def monte_carlo_partial_corr(cfg: SynthConfig, n_runs: Optional[int] = None) -> PartialCorrMatrix:
    """Correlations of the injected residuals ``w z + eta`` from one large draw.

    Needs no regression at all, so it serves as a reference for fits of
    the nonlinear (``link="sigmoid"``) generator.
    """
    if n_runs is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cfg = replace(cfg, n_runs=n_runs)
    return corr_matrix(simulate(cfg).true_residuals())


def config_from_dict(data: dict) -> SynthConfig:
    """Build a :class:`SynthConfig` from parsed JSON; raises ConfigError on bad input."""
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    try:
        curve = InDomainCurve(**data.pop("in_domain_curve", {}))
        specs = data.pop("ood_specs")
        if not isinstance(specs, list):
            raise ConfigError("ood_specs must be a list")
        specs = tuple(OodSpec(**s) for s in specs)
        return SynthConfig(ood_specs=specs, in_domain_curve=curve, **data)
    except KeyError as e:
        raise ConfigError(f"missing config key {e}") from None
    except TypeError as e:
        raise ConfigError(f"bad config: {e}") from None


def config_to_dict(cfg: SynthConfig) -> dict:
    out = asdict(cfg)
    out["ood_specs"] = [asdict(s) for s in cfg.ood_specs]
    return out
