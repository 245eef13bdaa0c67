"""Nonparametric estimation of r-species accumulation curves.

``E[S_r(t)]`` is the expected number of species seen at least ``r`` times
after ``t`` units of sampling effort, where ``t = 1`` is the initial
sample.  The main entry points are :func:`construct` and :func:`evaluate`.
"""

__version__ = "0.1.0"

from .counts import (FrequencyHistogram, binomial_subsample, bootstrap_resample, load_histogram,
                     make_rng, substream, tail_sums)
from .errors import ConstructionError, InputError, NumericError, RsacError
from .estimator import (ConstructionReport, RsacEstimator, asymptote, construct, evaluate,
                        is_increasing, phi_r_power_series, stability_gate)

__all__ = [
    "FrequencyHistogram", "binomial_subsample", "bootstrap_resample", "load_histogram",
    "make_rng", "substream", "tail_sums", "ConstructionError", "InputError", "NumericError",
    "RsacError", "ConstructionReport", "RsacEstimator", "asymptote", "construct", "evaluate",
    "is_increasing", "phi_r_power_series", "stability_gate",
]
