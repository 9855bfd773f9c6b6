"""Consecutive gap-ratio statistics and the Poisson reference.

No unfolding is done anywhere: ratios of neighbouring gaps are
insensitive to the local density of states.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .model import ManyBodySpectrum

POISSON_MEAN_RATIO = 2 * math.log(2) - 1


class DegeneratePolicy(str, enum.Enum):
    """How to treat ratios of two vanishing gaps.

    CONVENTION sets ``0/0 -> 1`` (limit of equal gaps). DROP removes those
    pairs, which is what a naive ``min/max`` followed by a NaN-ignoring
    histogram does.
    """

    CONVENTION = "convention"
    DROP = "drop"


@dataclass(frozen=True)
class RatioReport:
    L: int
    n_levels: int
    ratios: np.ndarray
    mean_r: float
    n_zero_gaps: int
    n_dropped: int
    policy: DegeneratePolicy

    def summary(self) -> dict:
        return {
            "L": self.L,
            "n_levels": self.n_levels,
            "n_ratios": int(self.ratios.size),
            "mean_r": self.mean_r,
            "n_zero_gaps": self.n_zero_gaps,
            "n_dropped": self.n_dropped,
            "policy": self.policy.value,
        }


@dataclass(frozen=True)
class HistogramData:
    bin_edges: np.ndarray
    densities: np.ndarray
    reference_densities: np.ndarray

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.bin_edges)

    def sup_distance(self) -> float:
        return float(np.max(np.abs(self.densities - self.reference_densities)))

    def total_variation(self) -> float:
        """Half the L1 distance between the histogram and the reference."""
        return float(0.5 * np.sum(np.abs(self.densities - self.reference_densities) * self.widths))


def gaps(energies) -> np.ndarray:
    """``s_k = E_k - E_{k-1}`` for a sorted spectrum."""
    e = np.asarray(energies.energies if isinstance(energies, ManyBodySpectrum) else energies,
                   dtype=np.float64)
    s = np.diff(e)
    if s.size and s.min() < 0:
        raise ValueError("spectrum must be sorted ascending")
    return s


def ratios(s, delta: float = 0.0, policy=DegeneratePolicy.CONVENTION) -> tuple[np.ndarray, int]:
    """``r_k = min(s_k, s_{k+1}) / max(s_k, s_{k+1})``.

    Gaps below ``delta`` count as zero. One zero gap gives ``r = 0``; the
    zero/zero case is resolved by ``policy``. Returns the ratios and the
    number of dropped pairs.
    """
    policy = DegeneratePolicy(policy)
    s = np.asarray(s, dtype=np.float64)
    if s.size < 2:
        raise ValueError("need at least two gaps")
    zero = s < delta if delta > 0 else s == 0
    a, b = s[:-1], s[1:]
    za, zb = zero[:-1], zero[1:]
    both = za & zb
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(za | zb, 0.0, lo / np.where(hi > 0, hi, 1.0))
    if policy is DegeneratePolicy.DROP:
        return r[~both], int(both.sum())
    r[both] = 1.0
    return r, 0


def mean_ratio(r) -> float:
    r = np.asarray(r, dtype=np.float64)
    if r.size == 0:
        raise ValueError("mean of an empty ratio sequence")
    return float(math.fsum(r) / r.size)


def poisson_ratio_pdf(r):
    """``p(r) = 2 / (1 + r)**2`` on ``[0, 1]``."""
    arr = np.asarray(r, dtype=np.float64)
    if np.any((arr < 0) | (arr > 1)) or np.any(np.isnan(arr)):
        raise ValueError("r must lie in [0, 1]")
    out = 2.0 / (1.0 + arr) ** 2
    return float(out) if out.ndim == 0 else out


def poisson_reference_spectrum(n: int, seed=None) -> np.ndarray:
    """``n`` sorted i.i.d. uniform levels on ``[0, 1)``."""
    if n < 2:
        raise ValueError("need at least two levels")
    e = np.random.default_rng(seed).random(n)
    e.sort()
    return e


def histogram(r, bins: int = 50) -> HistogramData:
    """Density histogram on ``[0, 1]`` with the Poisson density at bin centres."""
    if bins < 1:
        raise ValueError("bins must be >= 1")
    dens, edges = np.histogram(np.asarray(r, dtype=np.float64), bins=bins, range=(0.0, 1.0),
                               density=True)
    centers = 0.5 * (edges[1:] + edges[:-1])
    return HistogramData(edges, dens, poisson_ratio_pdf(centers))


def fraction_below(r, x: float) -> float:
    """Fraction of ratios in ``[0, x]``."""
    r = np.asarray(r)
    return float(np.count_nonzero(r <= x) / r.size)


def poisson_mass_below(x: float) -> float:
    """``int_0^x p(r) dr = 2x / (1 + x)``."""
    return 2 * x / (1 + x)


def ratio_report(mb: ManyBodySpectrum, policy=DegeneratePolicy.CONVENTION) -> RatioReport:
    policy = DegeneratePolicy(policy)
    s = gaps(mb)
    r, dropped = ratios(s, mb.degeneracy_threshold, policy)
    return RatioReport(
        L=mb.L,
        n_levels=len(mb),
        ratios=r,
        mean_r=mean_ratio(r),
        n_zero_gaps=int(np.count_nonzero(s < mb.degeneracy_threshold)),
        n_dropped=dropped,
        policy=policy,
    )
