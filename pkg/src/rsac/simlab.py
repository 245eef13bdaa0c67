"""Simulation protocol: populations, Poisson sampling, truth curves, metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .baselines import poisson_sf_sum
from .counts import FrequencyHistogram
from .errors import InputError

T_GRID = np.arange(1, 101, dtype=np.float64)
R_GRID = np.arange(1, 101)


@dataclass(frozen=True)
class PopulationModel:
    """One of the rate generators.

    ``kind`` is ``"P"``, ``"NB"``, ``"LN"``, ``"Z"`` or ``"ZM"``.  NB uses
    ``shape``/``scale``, LN uses ``mu``/``sigma``, and Z/ZM use
    ``offset``/``exponent``.
    """

    kind: str
    shape: float = 1.0
    scale: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    offset: float = 100.0
    exponent: float = 1.0

    def __post_init__(self):
        if self.kind not in ("P", "NB", "LN", "Z", "ZM"):
            raise InputError(f"unknown population model {self.kind!r}")
        for name in ("shape", "scale", "sigma", "exponent"):
            if getattr(self, name) <= 0:
                raise InputError(f"{name} must be positive")
        if self.offset < 0:
            raise InputError("offset must be non-negative")


MODELS = {
    "P": PopulationModel("P"),
    "NB1": PopulationModel("NB", shape=1.0, scale=1.0),
    "NB2": PopulationModel("NB", shape=0.01, scale=1.0),
    "LN": PopulationModel("LN", mu=0.0, sigma=1.0),
    "Z": PopulationModel("Z", offset=100.0, exponent=1.0),
    "ZM": PopulationModel("ZM", offset=100.0, exponent=1.1),
}


def get_model(name: str) -> PopulationModel:
    try:
        return MODELS[name]
    except KeyError:
        raise InputError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


def draw_population(model: PopulationModel, L: int, rng: np.random.Generator) -> np.ndarray:
    """Rates ``lambda_1..lambda_L`` rescaled so they sum to ``L``."""
    if L < 2:
        raise InputError("population size must be >= 2")
    if model.kind == "P":
        raw = np.ones(L)
    elif model.kind == "NB":
        raw = rng.gamma(model.shape, model.scale, size=L)
    elif model.kind == "LN":
        raw = np.exp(rng.normal(model.mu, model.sigma, size=L))
    else:
        raw = 1.0 / (np.arange(1, L + 1, dtype=np.float64) + model.offset) ** model.exponent
    return raw * (L / raw.sum())


def sample_poisson(rates, t: float, rng: np.random.Generator) -> FrequencyHistogram:
    """Histogram of independent ``Poisson(lambda_i t)`` counts."""
    if t <= 0:
        raise InputError("t must be positive")
    counts = rng.poisson(np.asarray(rates, dtype=np.float64) * t)
    return FrequencyHistogram.from_species_counts(counts)


def true_rsac(rates, r, t):
    """Exact ``E[S_r(t)] = sum_i P(Pois(lambda_i t) >= r)``.

    ``r`` may be an integer or an array of integers; ``t`` a scalar or an
    array.  The result has shape ``(len(r), len(t))`` for array inputs.
    """
    rates = np.asarray(rates, dtype=np.float64)
    r_arr = np.atleast_1d(np.asarray(r, dtype=np.int64))
    t_arr = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if np.any(r_arr < 1) or np.any(t_arr < 0):
        raise InputError("need r >= 1 and t >= 0")
    r_max = int(r_arr.max())
    table = np.empty((len(r_arr), len(t_arr)))
    for k, tk in enumerate(t_arr):
        table[:, k] = poisson_sf_sum(rates * tk, 1.0, r_max)[r_arr - 1]
    if np.ndim(r) == 0 and np.ndim(t) == 0:
        return float(table[0, 0])
    if np.ndim(r) == 0:
        return table[0]
    if np.ndim(t) == 0:
        return table[:, 0]
    return table


def cv_empirical(rates) -> float:
    """Sample standard deviation (``ddof=1``) over the mean."""
    rates = np.asarray(rates, dtype=np.float64)
    if rates.size < 2:
        raise InputError("need at least two rates")
    return float(rates.std(ddof=1) / rates.mean())


def expected_coverage(p, N: int) -> float:
    """``1 - sum_i p_i (1 - p_i)^N`` for a probability vector ``p``."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
        raise InputError("p must be a probability vector")
    with np.errstate(divide="ignore"):
        miss = np.exp(N * np.log1p(-p))
    return float(1.0 - np.sum(p * miss))


@dataclass(frozen=True)
class RelativeError:
    per_r: np.ndarray
    mean: float
    skipped: tuple


def relative_error(estimates, truths) -> RelativeError:
    """Per-``r`` L2 relative error over the ``t`` grid, and its mean.

    Rows are ``r`` and columns are ``t``.  Rows whose truth is identically
    zero are skipped and listed (0-based) in ``skipped``.
    """
    est = np.asarray(estimates, dtype=np.float64)
    tru = np.asarray(truths, dtype=np.float64)
    if est.shape != tru.shape or est.ndim != 2:
        raise InputError(f"shape mismatch: {est.shape} vs {tru.shape}")
    norms = np.linalg.norm(tru, axis=1)
    keep = norms > 0
    per_r = np.full(len(tru), np.nan)
    per_r[keep] = np.linalg.norm(est[keep] - tru[keep], axis=1) / norms[keep]
    skipped = tuple(int(i) for i in np.nonzero(~keep)[0])
    return RelativeError(per_r, float(np.nanmean(per_r)) if keep.any() else float("nan"), skipped)
