"""Bootstrap variance, lognormal intervals, CV estimation and method choice."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.stats import norm

from . import baselines
from .counts import FrequencyHistogram, bootstrap_resample, substream
from .errors import ConstructionError, InputError, NumericError, RsacError
from .estimator import M_MAX, construct

METHODS = ("rfa", "ztnb", "ztp", "ls", "bbc", "cs")
CV_CUTOFF = 1.0


@dataclass(frozen=True)
class FittedCurve:
    """A fitted r-SAC estimator: ``curve(r, t)`` plus what produced it."""

    method: str
    curve: Callable
    model: object
    report: object = None

    def __call__(self, r, t):
        return self.curve(r, t)


def fit_curve(hist: FrequencyHistogram, method: str = "rfa", m_max: int = M_MAX) -> FittedCurve:
    """Fit one of ``METHODS`` (or ``"auto"``) to a histogram."""
    if method == "auto":
        return best_practice(hist, m_max)
    if method == "rfa":
        est, report = construct(hist, m_max)
        return FittedCurve("rfa", est, est, report)
    fitters = {
        "ztnb": baselines.fit_ztnb,
        "ztp": baselines.fit_ztp,
        "ls": baselines.fit_logseries,
        "bbc": baselines.fit_bbc,
        "cs": baselines.fit_cs,
    }
    if method not in fitters:
        raise InputError(f"unknown method {method!r}; choose from {METHODS + ('auto',)}")
    fit = fitters[method](hist)
    return FittedCurve(method, fit.rsac, fit)


def lognormal_ci(point: float, variance: float, level: float = 0.95) -> tuple[float, float]:
    """Multiplicative interval ``[point / C, point * C]``.

    ``C = exp(z * sqrt(log(1 + variance / point**2)))`` with ``z`` the
    two-sided normal quantile for ``level``.
    """
    if point <= 0:
        raise NumericError(f"lognormal interval needs a positive estimate, got {point}")
    if variance < 0:
        raise InputError("variance must be non-negative")
    if not 0 < level < 1:
        raise InputError("level must lie in (0, 1)")
    z = norm.ppf(0.5 + level / 2.0)
    c = math.exp(z * math.sqrt(math.log1p(variance / (point * point))))
    return point / c, point * c


@dataclass(frozen=True)
class BootstrapSummary:
    point: float
    mean: float
    variance: float
    ci_low: float
    ci_high: float
    B: int
    failed: int = 0

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class BootstrapGrid:
    """Bootstrap results on an ``(r, t)`` grid; arrays have shape ``(len(r), len(t))``."""

    r: np.ndarray
    t: np.ndarray
    point: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    B: int
    failed: int
    method: str


def bootstrap_grid(hist: FrequencyHistogram, rs, ts, B: int = 100, level: float = 0.95,
                   seed: int = 0, method: str = "rfa", m_max: int = M_MAX) -> BootstrapGrid:
    """Multinomial bootstrap of a fitted curve over a grid.

    Replicate ``i`` draws from ``substream(seed, i, attempt)``.  A replicate
    whose fit fails is redrawn with the next ``attempt``, and at most
    ``10 * B`` draws are made in total.
    """
    if B < 2:
        raise InputError("B must be >= 2")
    rs = np.atleast_1d(np.asarray(rs, dtype=np.int64))
    ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
    rr, tt = np.meshgrid(rs, ts, indexing="ij")
    base = fit_curve(hist, method, m_max)
    point = np.asarray(base(rr, tt), dtype=np.float64)
    hint = m_max
    if base.method == "rfa" and base.report is not None and not base.report.saturated:
        hint = max(base.report.accepted_m, 1)
    rep_method = base.method
    samples = np.empty((B,) + point.shape)
    failed = 0
    draws = 0
    for i in range(B):
        attempt = 0
        while True:
            if draws >= 10 * B:
                raise ConstructionError(f"too many failed bootstrap replicates ({failed})")
            draws += 1
            rng = substream(seed, i, attempt)
            try:
                fit = fit_curve(bootstrap_resample(hist, rng), rep_method, hint)
                samples[i] = fit(rr, tt)
                break
            except RsacError:
                failed += 1
                attempt += 1
    mean = samples.mean(axis=0)
    var = samples.var(axis=0, ddof=1)
    lo = np.empty_like(point)
    hi = np.empty_like(point)
    for idx in np.ndindex(point.shape):
        lo[idx], hi[idx] = lognormal_ci(point[idx], var[idx], level)
    return BootstrapGrid(rs, ts, point, mean, var, lo, hi, B, failed, rep_method)


def bootstrap_summary(hist: FrequencyHistogram, r: int, t: float, B: int = 100,
                      level: float = 0.95, seed: int = 0, method: str = "rfa",
                      m_max: int = M_MAX) -> BootstrapSummary:
    g = bootstrap_grid(hist, [r], [t], B, level, seed, method, m_max)
    return BootstrapSummary(float(g.point[0, 0]), float(g.mean[0, 0]), float(g.variance[0, 0]),
                            float(g.ci_low[0, 0]), float(g.ci_high[0, 0]), B, g.failed)


@dataclass(frozen=True)
class CvEstimate:
    cv: float
    k: float


def estimate_cv(hist: FrequencyHistogram) -> CvEstimate:
    """``1 / sqrt(k)`` where ``k`` is the fitted ZTNB shape."""
    fit = baselines.fit_ztnb(hist)
    return CvEstimate(1.0 / math.sqrt(fit.alpha), fit.alpha)


def choose_method(cv: float) -> str:
    """Rational estimator when the estimated CV exceeds 1, ZTNB otherwise."""
    return "rfa" if cv > CV_CUTOFF else "ztnb"


def best_practice(hist: FrequencyHistogram, m_max: int = M_MAX) -> FittedCurve:
    """Fit the method picked by the CV switch.

    The returned curve's ``method`` attribute is the branch that fired.
    If that branch cannot be built, the other one is tried.

    Raises
    ------
    ConstructionError
        When neither estimator can be built.
    """
    cv = estimate_cv(hist)
    first = choose_method(cv.cv)
    order = [first, "ztnb" if first == "rfa" else "rfa"]
    errors = []
    for method in order:
        try:
            fitted = fit_curve(hist, method, m_max)
            return FittedCurve(method, fitted.curve, fitted.model, {"cv": cv, "report": fitted.report,
                                                                    "preferred": first})
        except RsacError as exc:
            errors.append(f"{method}: {exc}")
    raise ConstructionError("; ".join(errors))
