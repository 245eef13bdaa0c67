"""Comparison r-SAC estimators and parametric truth curves.

Each SAC estimator is lifted to ``r >= 1`` through the identity linking
``E[S_r(t)]`` to the ``(r-1)``-th derivative of ``E[S_1(t)] / t``.  The
identity maps ``(1 - exp(-lam t)) / t`` to the Poisson survival
``P(Pois(lam t) >= r)``, so the Poisson-type terms below are regularized
incomplete gamma functions and the negative binomial ones are regularized
incomplete beta functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import betainc, digamma, gammainc, gammaln, polygamma

from .counts import FrequencyHistogram
from .errors import InputError, NumericError

ROOT_RTOL = 1e-10
EM_TOL = 1e-10
EM_MAX_ITER = 10_000
ALPHA_CAP = 1e8


def poisson_sf(r, mu):
    """``P(Pois(mu) >= r)`` for integer ``r >= 1``."""
    return gammainc(r, mu)


def poisson_cdf_below(r, mu):
    """``P(Pois(mu) < r) = sum_{i<r} mu^i e^-mu / i!``."""
    return 1.0 - gammainc(r, mu)


def poisson_sf_sum(mu, weights, r_max: int) -> np.ndarray:
    """``out[k] = sum_i w_i P(Pois(mu_i) >= k + 1)`` for ``k < r_max``.

    Upward pmf recurrence.  Entries with ``mu > 700`` (where ``e^-mu``
    underflows) go through the incomplete gamma function instead.
    """
    mu = np.asarray(mu, dtype=np.float64)
    w = np.broadcast_to(np.asarray(weights, dtype=np.float64), mu.shape)
    out = np.zeros(r_max)
    big = mu > 700.0
    if big.any():
        r = np.arange(1, r_max + 1)[:, None]
        out += (gammainc(r, mu[big][None, :]) * w[big]).sum(axis=1)
    small, ws = mu[~big], w[~big]
    if small.size:
        total = ws.sum()
        pmf = np.exp(-small)
        cdf = pmf.copy()
        for k in range(r_max):
            out[k] += total - np.dot(ws, cdf)
            pmf = pmf * small / (k + 1)
            cdf = cdf + pmf
    return np.maximum(out, 0.0)


def nb_sf(r, alpha, p_fail):
    """``P(Y >= r)`` for ``Y ~ NB(alpha)`` with ``P(Y=i) ∝ C(i+alpha-1, i) p_fail^i``."""
    return betainc(r, alpha, p_fail)


def _grid(r, t):
    r = np.asarray(r)
    t = np.asarray(t, dtype=np.float64)
    if np.any(r < 1):
        raise InputError("r must be >= 1")
    return np.broadcast_arrays(r, t)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def _bracket_root(f, lo: float, hi: float, what: str) -> float:
    """Geometric bracket expansion followed by Brent's method."""
    flo, fhi = f(lo), f(hi)
    for _ in range(200):
        if np.sign(flo) != np.sign(fhi):
            break
        if abs(flo) < abs(fhi):
            lo /= 10.0
            flo = f(lo)
        else:
            hi *= 10.0
            fhi = f(hi)
    else:
        raise NumericError(f"could not bracket root for {what}")
    root = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root)


# ---------------------------------------------------------------- truths

def true_rsac_homogeneous(L, lam, r, t):
    """``L * P(Pois(lam t) >= r)``."""
    r, t = _grid(r, t)
    return _scalar(L * poisson_sf(r, lam * t))


def true_rsac_nb(L, alpha, beta, r, t):
    """``E[S_r(t)]`` when rates are Gamma(shape=alpha, scale=beta)."""
    r, t = _grid(r, t)
    bt = beta * t
    return _scalar(L * nb_sf(r, alpha, bt / (1.0 + bt)))


# ---------------------------------------------------------------- ZTP

@dataclass(frozen=True)
class ZtpFit:
    lam: float
    s1: int

    def rsac(self, r, t):
        return rsac_ztp(self, r, t)


def fit_ztp(hist: FrequencyHistogram) -> ZtpFit:
    """Zero-truncated Poisson MLE: ``lam / (1 - e^-lam) = N / S_1``."""
    s1, n = hist.n_species, hist.n_individuals
    if s1 == 0:
        raise InputError("histogram is empty")
    mean = n / s1
    if mean <= 1.0:
        raise InputError("ZTP fit needs mean count per species > 1")

    def f(lam):
        return lam / -math.expm1(-lam) - mean

    # lam/(1-e^-lam) lies in (lam, lam + 1) so the root is in (mean - 1, mean)
    lam = optimize.brentq(f, max(mean - 1.0, 1e-12), mean, xtol=1e-300, rtol=4 * np.finfo(float).eps)
    if abs(f(lam)) > ROOT_RTOL * mean:
        raise NumericError("ZTP solver did not converge")
    return ZtpFit(float(lam), s1)


def rsac_ztp(fit: ZtpFit, r, t):
    r, t = _grid(r, t)
    return _scalar(fit.s1 / -math.expm1(-fit.lam) * poisson_sf(r, fit.lam * t))


# ---------------------------------------------------------------- ZTNB

@dataclass(frozen=True)
class ZtnbFit:
    """Zero-truncated NB fit with shape ``alpha`` and scale ``beta``."""

    alpha: float
    beta: float
    s1: int
    log_likelihood: tuple = field(default=(), repr=False)
    converged: bool = True

    @property
    def p0(self) -> float:
        return math.exp(-self.alpha * math.log1p(self.beta))

    def rsac(self, r, t):
        return rsac_ztnb(self, r, t)


def ztnb_loglik(js, ns, alpha: float, beta: float) -> float:
    """Zero-truncated NB log-likelihood of histogram arrays."""
    log_p0 = -alpha * math.log1p(beta)
    logpmf = (gammaln(js + alpha) - gammaln(alpha) - gammaln(js + 1.0)
              + js * math.log(beta / (1.0 + beta)) + log_p0)
    return float(np.sum(ns * logpmf) - ns.sum() * math.log(-math.expm1(log_p0)))


def _nb_shape_mle(js, ns, n_zero: float, alpha0: float) -> float:
    """Complete-data NB MLE for the shape (scale profiled out).

    Solves ``sum N_j [psi(j+a) - psi(a)] = n log(1 + ybar/a)`` by Newton's
    method in ``log a`` with a bisection safeguard.  Returns ``ALPHA_CAP``
    when the data are not overdispersed (no finite root).
    """
    n = ns.sum() + n_zero
    ybar = float(np.dot(js, ns)) / n

    def g(a):
        return float(np.dot(ns, digamma(js + a) - digamma(a))) - n * math.log1p(ybar / a)

    def dg_dlog(a):
        d = float(np.dot(ns, polygamma(1, js + a) - polygamma(1, a))) + n * ybar / (a * (a + ybar))
        return a * d

    # g > 0 at small a, and g < 0 at large a iff overdispersed
    if g(ALPHA_CAP) >= 0:
        return ALPHA_CAP
    lo, hi = -40.0, math.log(ALPHA_CAP)
    u = min(max(math.log(alpha0), lo), hi)
    for _ in range(200):
        val = g(math.exp(u))
        if val > 0:
            lo = u
        else:
            hi = u
        step = val / dg_dlog(math.exp(u))
        u_new = u - step
        if not (lo < u_new < hi) or not math.isfinite(u_new):
            u_new = 0.5 * (lo + hi)
        if abs(u_new - u) < 1e-13 * max(1.0, abs(u)) or hi - lo < 1e-13:
            u = u_new
            break
        u = u_new
    return math.exp(u)


def _em_step(js, ns, s1: float, alpha: float, beta: float) -> tuple[float, float]:
    p0 = math.exp(-alpha * math.log1p(beta))
    n_zero = s1 * p0 / -math.expm1(-alpha * math.log1p(beta))
    alpha = _nb_shape_mle(js, ns, n_zero, alpha)
    beta = float(np.dot(js, ns)) / (s1 + n_zero) / alpha
    return alpha, beta


def fit_ztnb(hist: FrequencyHistogram, tol: float = EM_TOL, max_iter: int = EM_MAX_ITER,
             accelerate: bool = True) -> ZtnbFit:
    """EM fit of a zero-truncated negative binomial.

    The unobserved zero class is the missing data.  The E-step imputes
    ``N_0 = S_1 p_0 / (1 - p_0)``, and the M-step is the complete-data NB
    MLE.  Iteration stops when the relative log-likelihood gain drops
    below ``tol``.

    With ``accelerate`` the EM map is extrapolated SQUAREM-style (on log
    parameters).  An extrapolated point is kept only if it does not lower
    the likelihood, so the recorded trace stays monotone.

    Raises
    ------
    InputError
        Fewer than two distinct multiplicities observed.
    NumericError
        No convergence within ``max_iter`` EM-map evaluations.
    """
    if len(hist) < 2:
        raise InputError("ZTNB fit needs at least two distinct multiplicities")
    js = hist.multiplicities.astype(np.float64)
    ns = hist.counts.astype(np.float64)
    s1 = ns.sum()
    mean = float(np.dot(js, ns)) / s1
    alpha, beta = 1.0, max(mean - 1.0, 0.1)
    ll = ztnb_loglik(js, ns, alpha, beta)
    trace = [ll]
    evals = 0
    converged = False
    while evals < max_iter:
        a1, b1 = _em_step(js, ns, s1, alpha, beta)
        evals += 1
        cand = (a1, b1)
        if accelerate and a1 < ALPHA_CAP:
            a2, b2 = _em_step(js, ns, s1, a1, b1)
            evals += 1
            cand = (a2, b2)
            x0 = np.log([alpha, beta])
            x1 = np.log([a1, b1])
            x2 = np.log([a2, b2])
            d1, d2 = x1 - x0, x2 - 2 * x1 + x0
            nv = np.linalg.norm(d2)
            if nv > 0:
                step = -max(np.linalg.norm(d1) / nv, 1.0)
                xe = x0 - 2 * step * d1 + step * step * d2
                if np.all(np.isfinite(xe)) and np.all(np.abs(xe) < 700):
                    try:
                        a3, b3 = _em_step(js, ns, s1, *np.exp(xe))
                        evals += 1
                        if ztnb_loglik(js, ns, a3, b3) >= ztnb_loglik(js, ns, a2, b2):
                            cand = (a3, b3)
                    except (ValueError, OverflowError, ZeroDivisionError):
                        pass
        alpha, beta = cand
        ll_new = ztnb_loglik(js, ns, alpha, beta)
        trace.append(ll_new)
        if abs(ll_new - ll) < tol * abs(ll_new) or alpha >= ALPHA_CAP:
            converged = True
            break
        ll = ll_new
    if not converged:
        raise NumericError(f"ZTNB EM did not converge in {max_iter} iterations")
    return ZtnbFit(alpha, beta, int(s1), tuple(trace), converged)


def rsac_ztnb(fit: ZtnbFit, r, t):
    r, t = _grid(r, t)
    bt = fit.beta * t
    return _scalar(fit.s1 / (1.0 - fit.p0) * nb_sf(r, fit.alpha, bt / (1.0 + bt)))


# ---------------------------------------------------------------- logseries

@dataclass(frozen=True)
class LogseriesFit:
    alpha: float
    n_individuals: int

    def rsac(self, r, t):
        return rsac_ls(self, None, r, t)


def fit_logseries(hist: FrequencyHistogram) -> LogseriesFit:
    """Solve ``S_1 = alpha log(1 + N / alpha)`` for alpha."""
    s1, n = hist.n_species, hist.n_individuals
    if s1 == 0 or s1 >= n:
        raise InputError("logseries fit needs S_1 < N")

    def f(a):
        return a * math.log1p(n / a) - s1

    alpha = _bracket_root(f, 1e-6 * s1, 1e6 * s1, "logseries alpha")
    if abs(f(alpha)) > ROOT_RTOL * s1:
        raise NumericError("logseries solver did not converge")
    return LogseriesFit(alpha, n)


def _log_tail(x: float, r_max: int, rtol: float = 1e-12) -> np.ndarray:
    """``T[r-1] = sum_{i >= r} x^i / i`` for ``r = 1..r_max`` by direct summation."""
    if x <= 0.0:
        return np.zeros(r_max)
    block = max(4 * r_max, 1024)
    start = 1
    chunks = []
    while True:
        i = np.arange(start, start + block, dtype=np.float64)
        terms = np.exp(i * math.log(x)) / i
        chunks.append(terms)
        start += block
        allterms = np.concatenate(chunks)
        # reference is the smallest requested tail, accumulated so far
        ref = allterms[r_max - 1:].sum() if len(allterms) >= r_max else allterms.sum()
        if terms[-1] < rtol * ref or terms[-1] == 0.0:
            break
    tails = np.cumsum(allterms[::-1])[::-1]
    return tails[:r_max]


def rsac_ls(fit: LogseriesFit, hist: FrequencyHistogram | None, r, t):
    """``sum_{i >= r} alpha x_t^i / i`` with ``x_t = N t / (alpha + N t)``."""
    r, t = _grid(r, t)
    r_int = r.astype(np.int64)
    out = np.empty(t.shape, dtype=np.float64)
    r_max = int(r_int.max()) if r_int.size else 1
    flat_t, flat_r, flat_out = t.ravel(), r_int.ravel(), out.reshape(-1)
    cache: dict[float, np.ndarray] = {}
    for k, (tk, rk) in enumerate(zip(flat_t, flat_r)):
        tk = float(tk)
        if tk not in cache:
            nt = fit.n_individuals * tk
            cache[tk] = fit.alpha * _log_tail(nt / (fit.alpha + nt), r_max)
        flat_out[k] = cache[tk][rk - 1]
    return _scalar(out)


# ---------------------------------------------------------------- BBC

@dataclass(frozen=True)
class BbcFit:
    u: float
    s1: int
    n1: int
    js: np.ndarray = field(repr=False)
    ns: np.ndarray = field(repr=False)

    def rsac(self, r, t):
        return _rsac_bbc_fit(self, r, t)


def fit_bbc(hist: FrequencyHistogram) -> BbcFit:
    """Solve ``U (1 - exp(-N_1/U)) = sum_i N_i e^-i``.

    Raises
    ------
    InputError
        If ``N_1 <= sum_i N_i e^-i`` (no solution).
    """
    n1 = hist[1]
    js = hist.multiplicities.astype(np.float64)
    ns = hist.counts.astype(np.float64)
    target = float(np.dot(ns, np.exp(-js)))
    if n1 <= target:
        raise InputError("BBC needs N_1 > sum_i N_i e^-i")
    s1 = hist.n_species

    def f(u):
        return u * -math.expm1(-n1 / u) - target

    u = _bracket_root(f, 1e-6 * s1, 1e6 * s1, "BBC U")
    if abs(f(u)) > ROOT_RTOL * target:
        raise NumericError("BBC solver did not converge")
    return BbcFit(u, s1, n1, js, ns)


def _rsac_bbc_fit(fit: BbcFit, r, t):
    r, t = _grid(r, t)
    if np.any(t < 1):
        raise InputError("BBC estimator is defined for t >= 1")
    r_int = r.astype(np.int64)
    r_max = int(r_int.max()) if r_int.size else 1
    # sum_i N_i (e^-i - P(Pois(i t) < r)) = sum_i N_i e^-i - S_1 + sum_i N_i P(Pois(i t) >= r)
    const = float(np.dot(fit.ns, np.exp(-fit.js))) - fit.s1
    observed = np.empty(t.shape)
    flat_t, flat_r, flat_o = t.ravel(), r_int.ravel(), observed.reshape(-1)
    cache: dict[float, np.ndarray] = {}
    for k, (tk, rk) in enumerate(zip(flat_t, flat_r)):
        tk = float(tk)
        if tk not in cache:
            cache[tk] = poisson_sf_sum(fit.js * tk, fit.ns, r_max)
        flat_o[k] = cache[tk][rk - 1]
    mu = fit.n1 * t / fit.u
    unseen = fit.u * (math.exp(-fit.n1 / fit.u) - poisson_cdf_below(r, mu))
    return _scalar(fit.s1 + const + observed + unseen)


def rsac_bbc(hist: FrequencyHistogram, r, t):
    return _rsac_bbc_fit(fit_bbc(hist), r, t)


# ---------------------------------------------------------------- CS

def chao1_unseen(hist: FrequencyHistogram) -> float:
    """``N_0 = N_1^2 / (2 N_2)``."""
    n1, n2 = hist[1], hist[2]
    if n2 == 0:
        raise InputError("CS estimator needs N_2 > 0")
    return n1 * n1 / (2.0 * n2)


@dataclass(frozen=True)
class CsFit:
    n0: float
    n1: int
    s1: int

    def rsac(self, r, t):
        return _rsac_cs_fit(self, r, t)


def fit_cs(hist: FrequencyHistogram) -> CsFit:
    return CsFit(chao1_unseen(hist), hist[1], hist.n_species)


def _rsac_cs_fit(fit: CsFit, r, t):
    r, t = _grid(r, t)
    if np.any(t < 1):
        raise InputError("CS estimator is defined for t >= 1")
    if fit.n0 == 0:
        return _scalar(np.full(t.shape, float(fit.s1)))
    mu = fit.n1 * t / fit.n0
    # sum_{i<r} mu^i/i! e^{-N_1 (t-1)/N_0} = P(Pois(mu) < r) * e^{N_1/N_0}
    below = poisson_cdf_below(r, mu) * math.exp(fit.n1 / fit.n0)
    return _scalar(fit.s1 + fit.n0 * (1.0 - below))


def rsac_cs(hist: FrequencyHistogram, r, t):
    return _rsac_cs_fit(fit_cs(hist), r, t)
