"""Frequency histograms, tail sums and resampling.

A histogram maps a multiplicity ``j`` (how many times a species was seen)
to ``N_j``, the number of species seen exactly ``j`` times.  Files use a
two-column whitespace-delimited format::

    # comment
    1 14376
    2 4343

Random draws use :class:`numpy.random.Generator` backed by PCG64.  Use
:func:`make_rng` to get one from an integer seed, and :func:`substream` to
derive independent per-replicate generators that do not depend on
execution order.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable, Mapping, TextIO

import numpy as np

from .errors import InputError


def make_rng(seed: int | None) -> np.random.Generator:
    """PCG64 generator seeded through :class:`numpy.random.SeedSequence`."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def substream(seed: int, *key: int) -> np.random.Generator:
    """Generator for the sub-stream identified by ``key`` under ``seed``.

    ``substream(s, i)`` is the same stream no matter how many other
    sub-streams were drawn before it, so parallel replicates reproduce.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class FrequencyHistogram:
    """Immutable sparse histogram ``{j: N_j}`` with zero counts dropped."""

    entries: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        prev = 0
        for j, n in self.entries:
            if j < 1 or n < 1 or j <= prev:
                raise InputError(f"invalid histogram entry ({j}, {n})")
            prev = j

    @classmethod
    def from_mapping(cls, counts: Mapping[int, int]) -> "FrequencyHistogram":
        items = []
        for j, n in counts.items():
            j, n = int(j), int(n)
            if j < 1:
                raise InputError(f"multiplicity must be >= 1, got {j}")
            if n < 0:
                raise InputError(f"count must be >= 0, got {n}")
            if n:
                items.append((j, n))
        return cls(tuple(sorted(items)))

    @classmethod
    def from_arrays(cls, js: Iterable[int], ns: Iterable[int]) -> "FrequencyHistogram":
        return cls.from_mapping(dict(zip((int(j) for j in js), (int(n) for n in ns))))

    @classmethod
    def from_species_counts(cls, counts) -> "FrequencyHistogram":
        """Histogram of a per-species count vector (zeros are unobserved species)."""
        counts = np.asarray(counts, dtype=np.int64)
        counts = counts[counts > 0]
        if counts.size == 0:
            return cls()
        freq = np.bincount(counts)
        js = np.nonzero(freq)[0]
        return cls(tuple((int(j), int(freq[j])) for j in js))

    @classmethod
    def from_tail_sums(cls, tail) -> "FrequencyHistogram":
        """Invert ``S_r = sum_{j >= r} N_j``; the last entry pools ``j >= len(tail)``."""
        tail = [int(s) for s in tail]
        if any(a < b for a, b in zip(tail, tail[1:])) or (tail and tail[-1] < 0):
            raise InputError("tail sums must be non-negative and non-increasing")
        diffs = [a - b for a, b in zip(tail, tail[1:])] + tail[-1:]
        return cls.from_mapping({j + 1: n for j, n in enumerate(diffs)})

    def as_dict(self) -> dict[int, int]:
        return dict(self.entries)

    def __getitem__(self, j: int) -> int:
        return self.as_dict().get(j, 0)

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return bool(self.entries)

    @property
    def multiplicities(self) -> np.ndarray:
        return np.array([j for j, _ in self.entries], dtype=np.int64)

    @property
    def counts(self) -> np.ndarray:
        return np.array([n for _, n in self.entries], dtype=np.int64)

    @property
    def n_species(self) -> int:
        """Observed species ``S_1``."""
        return sum(n for _, n in self.entries)

    @property
    def n_individuals(self) -> int:
        """Total individuals ``N = sum_j j N_j``."""
        return sum(j * n for j, n in self.entries)

    @property
    def max_multiplicity(self) -> int:
        return self.entries[-1][0] if self.entries else 0


def load_histogram(source: str | bytes | TextIO) -> FrequencyHistogram:
    """Parse the two-column histogram text format.

    Raises
    ------
    InputError
        On a malformed line, a repeated multiplicity, or input with no entries.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        source = io.StringIO(source)
    counts: dict[int, int] = {}
    seen_any = False
    for lineno, raw in enumerate(source, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 2:
            raise InputError(f"line {lineno}: expected 'j count', got {raw.rstrip()!r}")
        try:
            j, n = int(fields[0]), int(fields[1])
        except ValueError:
            raise InputError(f"line {lineno}: non-integer field in {raw.rstrip()!r}") from None
        if j < 1:
            raise InputError(f"line {lineno}: multiplicity must be >= 1, got {j}")
        if n < 0:
            raise InputError(f"line {lineno}: count must be >= 0, got {n}")
        if j in counts:
            raise InputError(f"line {lineno}: duplicate multiplicity {j}")
        counts[j] = n
        seen_any = True
    if not seen_any:
        raise InputError("empty histogram input")
    return FrequencyHistogram.from_mapping(counts)


def read_histogram(path) -> FrequencyHistogram:
    with open(path, "rb") as fh:
        return load_histogram(fh.read())


def dump_histogram(hist: FrequencyHistogram) -> str:
    return "".join(f"{j} {n}\n" for j, n in hist.entries)


def tail_sums(hist: FrequencyHistogram, J: int) -> np.ndarray:
    """``[S_1, ..., S_J]`` with ``S_r = sum_{j >= r} N_j``.

    Summation is done on Python ints and converted to float64 at the end.
    """
    if J < 1:
        raise InputError(f"J must be >= 1, got {J}")
    out = [0] * J
    for j, n in hist.entries:
        # N_j contributes to S_1..S_min(j, J)
        out[min(j, J) - 1] += n
    acc = 0
    for r in range(J - 1, -1, -1):
        acc += out[r]
        out[r] = acc
    return np.array(out, dtype=np.float64)


def bootstrap_resample(hist: FrequencyHistogram, rng: np.random.Generator) -> FrequencyHistogram:
    """Multinomial resample of the ``N_j`` with the species total held fixed."""
    s1 = hist.n_species
    if s1 < 1:
        raise InputError("cannot resample an empty histogram")
    counts = hist.counts
    draw = rng.multinomial(s1, counts / s1)
    return FrequencyHistogram.from_arrays(hist.multiplicities, draw)


def binomial_subsample(
    hist: FrequencyHistogram, fraction: float, rng: np.random.Generator
) -> FrequencyHistogram:
    """Keep each individual independently with probability ``fraction``.

    This thins at the individual level, which approximates drawing a
    subsample without replacement from the underlying corpus.
    """
    if not 0.0 < fraction <= 1.0:
        raise InputError(f"fraction must lie in (0, 1], got {fraction}")
    if fraction == 1.0:
        return hist
    kept = np.zeros(hist.max_multiplicity + 1, dtype=np.int64)
    for j, n in hist.entries:
        kept += np.bincount(rng.binomial(j, fraction, size=n), minlength=kept.size)
    kept[0] = 0
    js = np.nonzero(kept)[0]
    return FrequencyHistogram.from_arrays(js, kept[js])
