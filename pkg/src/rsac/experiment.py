"""Replicated accuracy experiments over the simulation models.

One population is drawn per model (sub-stream ``(seed, 0)``) and its
truth curves are computed once.  Replicate ``k`` then samples from that
population with sub-stream ``(seed, k + 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .counts import FrequencyHistogram, substream
from .errors import RsacError
from .estimator import M_MAX, RsacEstimator
from .simlab import R_GRID, T_GRID, draw_population, get_model, relative_error, sample_poisson, true_rsac
from .uncertainty import METHODS, fit_curve


@dataclass
class ExperimentResult:
    model: str
    L: int
    reps: int
    methods: tuple
    errors: dict          # method -> (reps,) mean relative error per replicate (nan on failure)
    per_r: dict           # method -> (reps, len(r_grid)) per-r relative errors
    failures: dict        # method -> list of messages
    estimators: list = field(default_factory=list)

    def mean(self, method: str) -> float:
        return float(np.nanmean(self.errors[method]))

    def sd(self, method: str) -> float:
        vals = self.errors[method][np.isfinite(self.errors[method])]
        return float(vals.std(ddof=1)) if len(vals) > 1 else float("nan")

    def ranking(self) -> list:
        return sorted(self.methods, key=self.mean)


def score_histogram(hist: FrequencyHistogram, truth, methods=METHODS, m_max: int = M_MAX,
                    r_grid=R_GRID, t_grid=T_GRID):
    """Relative error of each method against a truth table ``(len(r), len(t))``.

    Returns ``(results, fitted)`` where ``results[method]`` is a
    :class:`~rsac.simlab.RelativeError` or the failure message.
    """
    rr, tt = np.meshgrid(r_grid, t_grid, indexing="ij")
    results, fitted = {}, {}
    for method in methods:
        try:
            curve = fit_curve(hist, method, m_max)
            est = np.asarray(curve(rr, tt), dtype=np.float64)
            results[method] = relative_error(est, truth)
            fitted[method] = curve
        except RsacError as exc:
            results[method] = f"{type(exc).__name__}: {exc}"
    return results, fitted


def run_experiment(model: str, L: int, reps: int, seed: int = 0, methods=METHODS,
                   m_max: int = M_MAX, r_grid=R_GRID, t_grid=T_GRID,
                   keep_estimators: bool = False) -> ExperimentResult:
    rates = draw_population(get_model(model), L, substream(seed, 0))
    truth = true_rsac(rates, r_grid, t_grid)
    errors = {m: np.full(reps, np.nan) for m in methods}
    per_r = {m: np.full((reps, len(r_grid)), np.nan) for m in methods}
    failures = {m: [] for m in methods}
    kept: list[RsacEstimator] = []
    for k in range(reps):
        hist = sample_poisson(rates, 1.0, substream(seed, k + 1))
        results, fitted = score_histogram(hist, truth, methods, m_max, r_grid, t_grid)
        for method, res in results.items():
            if isinstance(res, str):
                failures[method].append(res)
                continue
            errors[method][k] = res.mean
            per_r[method][k] = res.per_r
        if keep_estimators and "rfa" in fitted:
            kept.append(fitted["rfa"].model)
    return ExperimentResult(model, L, reps, tuple(methods), errors, per_r, failures, kept)
