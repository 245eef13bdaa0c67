"""Rational approximation of the discovery-rate power series.

Everything here works in the shifted variable ``s = t - 1`` and uses
ascending coefficient order (``p[k]`` multiplies ``s**k``), the
:mod:`numpy.polynomial.polynomial` convention.  Poles move to the
``t`` axis only in :func:`partial_fractions`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import ConstructionError, InputError, NumericError

QD_ZERO_TOL = 1e-12
DEFECT_THRESHOLD = 1e-3
REPEATED_ROOT_TOL = 1e-8


class DefectDegeneracy(ConstructionError):
    """Cancelling defects left a constant denominator."""


class RepeatedPoleError(ConstructionError):
    """Denominator has (numerically) repeated roots."""


@dataclass(frozen=True)
class ContinuedFraction:
    """Coefficients of ``a0 / (1 - a1 s / (1 - a2 s / (1 - ...)))``.

    ``truncated_at`` is the 1-based position of the first coefficient that
    came out zero (or undefined) and was dropped, ``None`` if the full
    requested length was produced.  ``exact`` holds the same coefficients
    as fractions.
    """

    coeffs: np.ndarray
    truncated_at: int | None = None
    exact: tuple = field(default=(), repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.coeffs)


@dataclass(frozen=True)
class RationalApproximant:
    """``numer(s) / denom(s)`` with ``denom(0) == 1``."""

    numer: np.ndarray
    denom: np.ndarray
    m: int
    source: str = "qd"
    defects_removed: int = 0

    def __call__(self, s):
        return P.polyval(s, self.numer) / P.polyval(s, self.denom)

    def taylor(self, n: int) -> np.ndarray:
        """First ``n`` Taylor coefficients at ``s = 0``."""
        num = np.zeros(n)
        k = min(n, len(self.numer))
        num[:k] = self.numer[:k]
        out = np.zeros(n)
        for i in range(n):
            acc = num[i]
            for j in range(1, min(i, len(self.denom) - 1) + 1):
                acc -= self.denom[j] * out[i - j]
            out[i] = acc / self.denom[0]
        return out


def phi_coefficients(tail, n: int) -> np.ndarray:
    """Power-series coefficients ``(-1)**i * S_{i+1}`` for ``i < n``."""
    tail = np.asarray(tail, dtype=np.float64)
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if len(tail) < n:
        raise InputError(f"need {n} tail sums, have {len(tail)}")
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return signs * tail[:n]


def qd_continued_fraction(coeffs, zero_tol: float = QD_ZERO_TOL) -> ContinuedFraction:
    """Quotient-difference algorithm (column form).

    Produces ``len(coeffs)`` continued-fraction coefficients whose ``2m``-th
    convergent is the ``[m-1/m]`` Pade approximant of the series.  A
    coefficient with ``|a| < zero_tol * |a0|`` (or an undefined one, from a
    zero divisor deeper in the table) ends the fraction there.

    The table is built in exact rational arithmetic from the float inputs
    (tail sums are integers in practice), which sidesteps the rounding
    instability of the floating-point QD scheme.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    n = len(c)
    if n == 0 or c[0] == 0.0 or not np.all(np.isfinite(c)):
        raise InputError("series coefficients must be finite with a nonzero leading term")
    x = [Fraction(float(v)) for v in c]
    cutoff = zero_tol * abs(x[0])
    out = [x[0]]

    def div(a, b):
        return None if a is None or b is None or b == 0 else a / b

    def accept(value) -> bool:
        if value is None or abs(value) < cutoff:
            return False
        out.append(value)
        return True

    def done(truncated):
        return ContinuedFraction(np.array([float(v) for v in out]), truncated, tuple(out))

    # q holds column k of the q-table, e the matching e-column; None marks undefined
    q = [div(x[i + 1], x[i]) for i in range(n - 1)]
    e = [Fraction(0)] * len(q)
    while len(out) < n:
        if not accept(q[0]):
            return done(len(out) + 1)
        if len(out) == n:
            break
        e = [None if q[i + 1] is None or q[i] is None or e[i + 1] is None
             else q[i + 1] - q[i] + e[i + 1] for i in range(len(q) - 1)]
        if not accept(e[0]):
            return done(len(out) + 1)
        q = [None if q[i + 1] is None else
             (lambda r: None if r is None else q[i + 1] * r)(div(e[i + 1], e[i]))
             for i in range(len(q) - 2)]
    return done(None)


def convergent(cf: ContinuedFraction, order: int) -> RationalApproximant:
    """Evaluate the ``order``-th convergent; ``order = 2m`` gives ``[m-1/m]``."""
    if order < 2 or order % 2:
        raise InputError(f"convergent order must be a positive even integer, got {order}")
    if order > len(cf):
        raise InputError(f"order {order} exceeds {len(cf)} available coefficients")
    a = cf.exact if len(cf.exact) == len(cf) else [Fraction(float(v)) for v in cf.coeffs]
    # A_k = A_{k-1} + alpha_k A_{k-2}, alpha_1 = a0, alpha_k = -a_{k-1} s
    a_prev, b_prev = [Fraction(1)], [Fraction(0)]
    a_cur, b_cur = [Fraction(0)], [Fraction(1)]
    for k in range(order):
        alpha = [a[0]] if k == 0 else [Fraction(0), -a[k]]
        a_next = _padd(a_cur, _pmul(alpha, a_prev))
        b_next = _padd(b_cur, _pmul(alpha, b_prev))
        a_prev, b_prev, a_cur, b_cur = a_cur, b_cur, a_next, b_next
    m = order // 2
    lead = b_cur[0]
    numer = _fit_length(np.array([float(v / lead) for v in a_cur]), m)
    denom = _fit_length(np.array([float(v / lead) for v in b_cur]), m + 1)
    return RationalApproximant(numer, denom, m, "qd")


def _padd(p: list, q: list) -> list:
    if len(p) < len(q):
        p, q = q, p
    return [v + (q[i] if i < len(q) else 0) for i, v in enumerate(p)]


def _pmul(p: list, q: list) -> list:
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, u in enumerate(p):
        if u:
            for j, v in enumerate(q):
                out[i + j] += u * v
    return out


def _fit_length(p: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n)
    k = min(n, len(p))
    out[:k] = p[:k]
    return out


def pade_from_series(coeffs, m: int, max_cond: float = 1e14) -> RationalApproximant:
    """``[m-1/m]`` Pade approximant by solving the linear systems directly."""
    c = np.asarray(coeffs, dtype=np.float64)
    if len(c) < 2 * m:
        raise InputError(f"need {2 * m} series coefficients, have {len(c)}")
    # sum_{j=1..m} b_j c_{k-j} = -c_k  for k = m..2m-1
    mat = np.array([[c[k - j] for j in range(1, m + 1)] for k in range(m, 2 * m)])
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or cond > max_cond:
        raise NumericError(f"Pade system for m={m} is singular (cond={cond:.3g})")
    b = np.concatenate([[1.0], np.linalg.solve(mat, -c[m:2 * m])])
    a = np.array([sum(b[j] * c[k - j] for j in range(min(k, m) + 1)) for k in range(m)])
    return RationalApproximant(a, b, m, "linear")


def pade_linear_solve(tail, m: int) -> RationalApproximant:
    """Oracle route: the same approximant as the QD route, from tail sums."""
    return pade_from_series(phi_coefficients(tail, 2 * m), m)


def hankel_det(tail, i: int, j: int) -> float:
    """Hankel determinant of order ``j`` whose top-left entry is ``S_{i-j+2}``.

    ``S_k`` is taken as 0 for ``k < 1``.
    """
    tail = np.asarray(tail, dtype=np.float64)
    if j < 1:
        raise InputError(f"order must be >= 1, got {j}")

    def S(k: int) -> float:
        if k < 1:
            return 0.0
        if k > len(tail):
            raise InputError(f"S_{k} requested but only {len(tail)} tail sums given")
        return tail[k - 1]

    mat = np.array([[S(i - j + 2 + row + col) for col in range(j)] for row in range(j)])
    return float(np.linalg.det(mat))


def poly_roots(coeffs, tolerance: float = 1e-8) -> np.ndarray:
    """All complex roots of a real polynomial (ascending coefficients).

    Companion-matrix eigenvalues.  Roots whose imaginary part is below
    ``tolerance * max(1, |z|)`` are made real, and the rest are paired so
    the result is exactly closed under conjugation.
    """
    c = np.asarray(coeffs, dtype=np.float64)
    if len(c) < 2:
        raise InputError("polynomial must have degree >= 1")
    if c[-1] == 0.0:
        raise InputError("leading coefficient is zero")
    roots = P.polyroots(c).astype(np.complex128)
    return _symmetrize(roots, tolerance)


def _symmetrize(roots: np.ndarray, tolerance: float) -> np.ndarray:
    scale = np.maximum(1.0, np.abs(roots))
    is_real = np.abs(roots.imag) <= tolerance * scale
    real = roots[is_real].real.astype(np.complex128)
    upper = list(roots[~is_real & (roots.imag > 0)])
    lower = list(roots[~is_real & (roots.imag < 0)])
    pairs = []
    for z in upper:
        if not lower:
            break
        k = int(np.argmin([abs(z - np.conj(w)) for w in lower]))
        w = lower.pop(k)
        zz = 0.5 * (z + np.conj(w))
        pairs.extend([zz, np.conj(zz)])
    leftover = upper[len(pairs) // 2:] + lower
    # unmatched complex roots only arise from badly conditioned input; keep them
    out = np.concatenate([np.sort_complex(real), np.array(pairs, dtype=np.complex128),
                          np.array(leftover, dtype=np.complex128)])
    return out


def _from_roots(lead: float, roots: np.ndarray) -> np.ndarray:
    if len(roots) == 0:
        return np.array([lead])
    p = P.polyfromroots(roots)
    return lead * np.real_if_close(p, tol=1e6).real


def _trim(p: np.ndarray) -> np.ndarray:
    nz = np.nonzero(p)[0]
    return p[: nz[-1] + 1] if len(nz) else p[:1]


def remove_defects(rf: RationalApproximant, threshold: float = DEFECT_THRESHOLD) -> RationalApproximant:
    """Cancel pole/zero pairs closer than ``threshold``.

    Raises
    ------
    DefectDegeneracy
        If every pole would be cancelled.
    """
    numer = _trim(rf.numer)
    denom = _trim(rf.denom)
    if len(numer) < 2 or len(denom) < 2:
        return rf
    zeros = list(poly_roots(numer))
    poles = list(poly_roots(denom))
    kept_poles = []
    removed = 0
    for z in poles:
        if zeros:
            dist = np.abs(np.array(zeros) - z)
            k = int(np.argmin(dist))
            if dist[k] < threshold:
                zeros.pop(k)
                removed += 1
                continue
        kept_poles.append(z)
    if not removed:
        return rf
    if not kept_poles:
        raise DefectDegeneracy("all poles cancelled by defects")
    num = _from_roots(numer[-1], np.array(zeros, dtype=np.complex128))
    den = _from_roots(denom[-1], np.array(kept_poles, dtype=np.complex128))
    return RationalApproximant(
        num / den[0], den / den[0], rf.m, rf.source, rf.defects_removed + removed
    )


@dataclass(frozen=True)
class PartialFractions:
    """``sum_i residues[i] / (t - poles[i])`` with poles on the ``t`` axis."""

    residues: np.ndarray
    poles: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=np.complex128)[..., None]
        return np.sum(self.residues / (t - self.poles), axis=-1)

    def __iter__(self):
        return iter(zip(self.residues, self.poles))


def partial_fractions(rf: RationalApproximant, root_tol: float = REPEATED_ROOT_TOL) -> PartialFractions:
    """Residues ``c_i = P(z_i) / Q'(z_i)`` at the simple roots of the denominator.

    Raises
    ------
    RepeatedPoleError
        If two denominator roots are closer than ``root_tol``.
    """
    numer = _trim(rf.numer)
    denom = _trim(rf.denom)
    if len(denom) < 2:
        raise DefectDegeneracy("denominator is constant")
    if len(numer) >= len(denom):
        raise InputError("numerator degree must be below denominator degree")
    z = poly_roots(denom)
    if len(z) > 1:
        gaps = np.abs(z[:, None] - z[None, :]) + np.diag(np.full(len(z), np.inf))
        if gaps.min() < root_tol:
            raise RepeatedPoleError(f"near-repeated denominator roots (gap {gaps.min():.3g})")
    res = P.polyval(z, numer) / P.polyval(z, P.polyder(denom))
    res = np.asarray(res, dtype=np.complex128)
    for i, zi in enumerate(z):
        if zi.imag == 0.0:
            res[i] = res[i].real
        elif zi.imag > 0:
            k = np.nonzero(z == np.conj(zi))[0]
            if len(k):
                avg = 0.5 * (res[i] + np.conj(res[k[0]]))
                res[i], res[k[0]] = avg, np.conj(avg)
    return PartialFractions(res, z + 1.0)
