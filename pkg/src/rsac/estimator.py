"""Construction and evaluation of the rational r-SAC estimator.

The estimator has the form ``sum_i c_i * (t / (t - x_i))**r``.  The pairs
``(c_i, x_i)`` come from the partial-fraction expansion of a Pade
approximant to the discovery-rate series, and they do not depend on ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import pade
from .counts import FrequencyHistogram, tail_sums
from .errors import ConstructionError, InputError, NumericError

M_MAX = 10
MONOTONE_GRID = 1.0 + 0.05 * np.arange(1981)  # 1, 1.05, ..., 100
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class RsacEstimator:
    """Immutable ``sum_i c_i (t/(t - x_i))**r``.

    Attributes
    ----------
    residues, poles : complex arrays
        ``c_i`` and ``x_i`` (``t`` domain), closed under conjugation.
    m : int
        Number of terms, i.e. the denominator degree after defect removal.
    order_m : int
        ``m`` of the ``[m-1/m]`` approximant the terms were derived from.
    tail : tuple of float
        Tail sums ``S_1..S_{2 order_m}`` used for the fit.
    """

    residues: np.ndarray
    poles: np.ndarray
    m: int
    order_m: int
    tail: tuple = ()
    saturated: bool = False
    defects_removed: int = 0

    @property
    def terms(self):
        return list(zip(self.residues, self.poles))

    def __call__(self, r, t):
        return evaluate(self, r, t)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "order_m": self.order_m,
            "saturated": self.saturated,
            "defects_removed": self.defects_removed,
            "terms": [
                {"c": [float(c.real), float(c.imag)], "x": [float(x.real), float(x.imag)]}
                for c, x in self.terms
            ],
            "tail_sums": [float(s) for s in self.tail],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RsacEstimator":
        res = np.array([complex(*term["c"]) for term in d["terms"]], dtype=np.complex128)
        pol = np.array([complex(*term["x"]) for term in d["terms"]], dtype=np.complex128)
        return cls(res, pol, int(d["m"]), int(d.get("order_m", d["m"])),
                   tuple(d.get("tail_sums", ())), bool(d.get("saturated", False)),
                   int(d.get("defects_removed", 0)))


@dataclass
class ConstructionReport:
    accepted_m: int = 0
    n_terms: int = 0
    m_max: int = M_MAX
    m_max_effective: int = 0
    rejections: list = field(default_factory=list)
    cf_length: int = 0
    cf_truncated_at: int | None = None
    defects_removed: int = 0
    m1_fallback: bool = False
    saturated: bool = False

    def to_dict(self) -> dict:
        return {
            "accepted_m": self.accepted_m,
            "n_terms": self.n_terms,
            "m_max": self.m_max,
            "m_max_effective": self.m_max_effective,
            "rejections": [{"m": m, "reason": why} for m, why in self.rejections],
            "cf_length": self.cf_length,
            "cf_truncated_at": self.cf_truncated_at,
            "defects_removed": self.defects_removed,
            "m1_fallback": self.m1_fallback,
            "saturated": self.saturated,
        }


def m1_estimator(s1: float, s2: float) -> RsacEstimator:
    """Closed form for ``m = 1``: ``c = S1^2/S2`` and ``x = -(S1 - S2)/S2``."""
    if s2 <= 0:
        raise InputError("m=1 estimator needs S_2 > 0")
    c = s1 * s1 / s2
    x = -(s1 - s2) / s2
    return RsacEstimator(np.array([c], dtype=np.complex128), np.array([x], dtype=np.complex128),
                         1, 1, (float(s1), float(s2)), saturated=(s1 == s2))


def saturated_estimator(level: float) -> RsacEstimator:
    """The constant estimator ``L`` (single term with its pole at 0)."""
    return RsacEstimator(np.array([level], dtype=np.complex128), np.zeros(1, dtype=np.complex128),
                         1, 1, (float(level),), saturated=True)


def _from_partial_fractions(pf: pade.PartialFractions, rf: pade.RationalApproximant,
                            tail) -> RsacEstimator:
    return RsacEstimator(pf.residues, pf.poles, len(pf.poles), rf.m, tuple(float(s) for s in tail),
                         defects_removed=rf.defects_removed)


def construct(hist: FrequencyHistogram, m_max: int = M_MAX) -> tuple[RsacEstimator, ConstructionReport]:
    """Largest-``m`` estimator with all poles in the left half plane and an
    increasing ``r = 1`` curve.

    ``m_max`` is capped at ``j_max // 2`` where ``j_max`` is the largest
    observed multiplicity.  A sample with ``S_1 = ... = S_{2m}`` returns the
    constant estimator.

    Raises
    ------
    InputError
        If ``N_1 = 0`` or ``N_2 = 0`` for a non-saturated sample.
    """
    if m_max < 1:
        raise InputError(f"m_max must be >= 1, got {m_max}")
    if not hist:
        raise InputError("histogram is empty")
    report = ConstructionReport(m_max=m_max)
    m_eff = min(m_max, hist.max_multiplicity // 2)
    report.m_max_effective = m_eff
    if m_eff >= 1:
        tail = tail_sums(hist, 2 * m_eff)
        if tail[0] == tail[-1]:
            report.saturated = True
            report.accepted_m = report.n_terms = 1
            return saturated_estimator(tail[0]), report
    if hist[1] == 0 or hist[2] == 0:
        raise InputError("construction requires N_1 > 0 and N_2 > 0 "
                         f"(got N_1={hist[1]}, N_2={hist[2]})")
    return construct_from_tail(tail, m_eff, report)


def construct_from_tail(tail, m_max: int, report: ConstructionReport | None = None
                        ) -> tuple[RsacEstimator, ConstructionReport]:
    """Descending-``m`` search on tail sums ``S_1..S_{2 m_max}``."""
    tail = np.asarray(tail, dtype=np.float64)
    if report is None:
        report = ConstructionReport(m_max=m_max, m_max_effective=m_max)
    if len(tail) < 2 * m_max:
        raise InputError(f"need {2 * m_max} tail sums, have {len(tail)}")
    if not (tail[0] > tail[1] > 0):
        raise InputError("construction requires S_1 > S_2 > 0")
    cf = pade.qd_continued_fraction(pade.phi_coefficients(tail, 2 * m_max))
    report.cf_length = len(cf)
    report.cf_truncated_at = cf.truncated_at
    m_top = min(m_max, len(cf) // 2)
    for m in range(m_max, m_top, -1):
        report.rejections.append((m, "qd_truncated"))
    for m in range(m_top, 0, -1):
        try:
            rf = pade.remove_defects(pade.convergent(cf, 2 * m))
            pf = pade.partial_fractions(rf)
        except pade.DefectDegeneracy:
            report.rejections.append((m, "defect_degeneracy"))
            continue
        except pade.RepeatedPoleError:
            report.rejections.append((m, "repeated_pole"))
            continue
        except (np.linalg.LinAlgError, NumericError):
            report.rejections.append((m, "numeric_failure"))
            continue
        est = _from_partial_fractions(pf, rf, tail[: 2 * m])
        if not stability_gate(est):
            report.rejections.append((m, "positive_real_part_pole"))
            continue
        if not is_increasing(est):
            report.rejections.append((m, "non_monotone"))
            continue
        report.accepted_m = m
        report.n_terms = est.m
        report.defects_removed = est.defects_removed
        return est, report
    # unreachable when S_1 > S_2 > 0 in exact arithmetic; kept as a guard
    est = m1_estimator(tail[0], tail[1])
    report.accepted_m = report.n_terms = 1
    report.m1_fallback = True
    return est, report


def evaluate(est: RsacEstimator, r, t):
    """Real value of the estimator at ``(r, t)``; broadcasts over arrays.

    ``t = 0`` evaluates to 0.

    Raises
    ------
    NumericError
        If the imaginary part exceeds ``1e-9 * sum|c_i|``.
    """
    r_arr = np.asarray(r)
    t_arr = np.asarray(t, dtype=np.float64)
    if np.any(t_arr < 0):
        raise InputError("t must be non-negative")
    if np.any(r_arr < 1):
        raise InputError("r must be >= 1")
    rr, tt = np.broadcast_arrays(r_arr, t_arr)
    if not np.any(est.residues.imag) and not np.any(est.poles.imag):
        # real terms: plain float arithmetic, so t / (t - 0) is exactly 1
        tf = tt[..., None]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(tf == 0, 0.0, tf / (tf - est.poles.real))
        out = np.sum(est.residues.real * ratio ** rr[..., None], axis=-1)
        return float(out) if out.ndim == 0 else out
    tc = tt[..., None].astype(np.complex128)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(tc == 0, 0.0, tc / (tc - est.poles))
    total = np.sum(est.residues * ratio ** rr[..., None], axis=-1)
    scale = np.sum(np.abs(est.residues))
    if np.any(np.abs(total.imag) > IMAG_TOL * max(scale, 1e-300)):
        raise NumericError("estimator terms are not conjugate-symmetric")
    out = total.real
    return float(out) if out.ndim == 0 else out


def asymptote(est: RsacEstimator) -> float:
    """Limit as ``t -> inf``: the sum of the residues."""
    return float(np.sum(est.residues).real)


def derivative_r1(est: RsacEstimator, t):
    """``d/dt`` of the ``r = 1`` curve: ``-sum c_i x_i / (t - x_i)**2``."""
    tc = np.asarray(t, dtype=np.float64)[..., None]
    return -np.sum(est.residues * est.poles / (tc - est.poles) ** 2, axis=-1).real


def is_increasing(est: RsacEstimator, grid=MONOTONE_GRID) -> bool:
    d = derivative_r1(est, grid)
    # slack of a few ulps of the largest term, for the constant estimator
    slack = 1e-12 * float(np.sum(np.abs(est.residues * est.poles)))
    return bool(np.all(d >= -slack))


def stability_gate(est: RsacEstimator) -> bool:
    """All poles strictly in the open left half plane."""
    return bool(np.all(est.poles.real < 0))


def phi_r_power_series(tail, r: int, t):
    """Truncated power-series estimator of ``E[S_r(t)]``.

    ``t**r * sum_i (-1)**i (t-1)**i C(r-1+i, r-1) S_{r+i}``.  Only reliable
    for ``t`` near 1; it oscillates wildly once ``t > 2``.
    """
    tail = np.asarray(tail, dtype=np.float64)
    if r < 1:
        raise InputError("r must be >= 1")
    t = np.asarray(t, dtype=np.float64)
    n = len(tail) - r + 1
    if n <= 0:
        return np.zeros_like(t) if t.ndim else 0.0
    i = np.arange(n)
    weights = np.array([math.comb(r - 1 + k, r - 1) for k in range(n)], dtype=np.float64)
    terms = weights * tail[r - 1:] * (-1.0) ** i
    powers = (t[..., None] - 1.0) ** i
    out = t ** r * np.sum(terms * powers, axis=-1)
    return float(out) if out.ndim == 0 else out
