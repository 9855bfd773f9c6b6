"""Spectral form factor moments of a free-fermion spectrum.

For free fermions ``tr exp(iHt) = prod_k (1 + exp(i eps_k t))``, so
``|tr U_t|**2 = prod_k (2 + 2 cos(eps_k t))`` costs O(L) per time. Time
averages are estimated by Monte Carlo over a window and compared with
exact integer references.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .model import ManyBodySpectrum, SingleParticleSpectrum

CHUNK = 1 << 16
MAX_SOLUTION_Q = 15


@dataclass(frozen=True)
class MomentReport:
    q: int
    L: int
    estimate: float
    std_error: float
    tau: float
    n_samples: int
    t0: float
    seed: int | None
    references: dict = field(default_factory=dict)

    def deviation_sigma(self, reference: str) -> float:
        """Distance of the estimate from a reference, in standard errors."""
        diff = abs(self.estimate - float(self.references[reference]))
        if self.std_error == 0:
            return 0.0 if diff == 0 else math.inf
        return diff / self.std_error


_SPLIT = 134217729.0  # 2**27 + 1
_TWO_PI_HI = 6.283185307179586
_TWO_PI_LO = 2.4492935982947064e-16


def _two_prod(a, b):
    """Dekker product: ``a*b == p + e`` exactly (barring overflow)."""
    p = a * b
    ca = _SPLIT * a
    a_hi = ca - (ca - a)
    a_lo = a - a_hi
    cb = _SPLIT * b
    b_hi = cb - (cb - b)
    b_lo = b - b_hi
    e = ((a_hi * b_hi - p) + a_hi * b_lo + a_lo * b_hi) + a_lo * b_lo
    return p, e


def _reduced_phases(sp: SingleParticleSpectrum, t: np.ndarray) -> np.ndarray:
    """``eps_k * t mod 2 pi`` in ``[-pi, pi]``, carried in double-double."""
    hi, lo = sp.split
    tt = t[..., None]
    p, e = _two_prod(hi, tt)
    e = e + lo * tt
    k = np.rint(p / _TWO_PI_HI)
    q, r = _two_prod(k, _TWO_PI_HI)
    return ((p - q) - r) + (e - k * _TWO_PI_LO)


def sff_point(sp: SingleParticleSpectrum, t):
    """``|tr exp(iHt)|**2 = prod_k 4 cos(eps_k t / 2)**2``; ``t`` may be an array."""
    t = np.asarray(t, dtype=np.float64)
    c = np.cos(0.5 * _reduced_phases(sp, t))
    out = np.prod(4.0 * c * c, axis=-1)
    return float(out) if out.ndim == 0 else out


def trace_direct(sp: SingleParticleSpectrum, t, dps: int = 30):
    """``|sum_n exp(i t E_n)|**2`` over all ``2**L`` configurations, in extended precision.

    Independent of the product formula: the many-body energies are
    enumerated explicitly and summed as complex phases.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    with mpmath.workdps(dps):
        levels = [mpmath.mpf(0)]
        for e in sp.energies:
            levels = levels + [x + e for x in levels]
        out = np.empty(t.shape)
        for i, ti in enumerate(t):
            tm = mpmath.mpf(float(ti))
            z = mpmath.fsum(mpmath.expj(tm * x) for x in levels)
            out[i] = float(abs(z) ** 2)
    return out


def _worker_count() -> int:
    return max(1, int(os.environ.get("FREEFERMION_WORKERS", "1")))


def _chunk_stats(sp, q, t0, tau, size, seed_seq):
    rng = np.random.default_rng(seed_seq)
    x = sff_point(sp, rng.uniform(t0, t0 + tau, size)) ** q
    mean = float(np.mean(x))
    return size, mean, float(np.sum((x - mean) ** 2))


def moment_estimate(sp: SingleParticleSpectrum, q: int, t0: float = 0.0, tau: float = 1e5,
                    n_samples: int = 1_000_000, seed: int | None = 0) -> MomentReport:
    """Monte Carlo time average of ``|tr U_s|**(2q)`` for ``s`` uniform in ``[t0, t0+tau)``.

    Samples are split into fixed-size chunks, each with its own child seed,
    so the result does not depend on the worker count.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if q < 0:
        raise ValueError("q must be >= 0")
    refs = reference_moments(q, sp.L)
    if q == 0:
        return MomentReport(0, sp.L, 1.0, 0.0, tau, n_samples, t0, seed, refs)

    sizes = [CHUNK] * (n_samples // CHUNK)
    if n_samples % CHUNK:
        sizes.append(n_samples % CHUNK)
    children = np.random.SeedSequence(seed).spawn(len(sizes))
    with ThreadPoolExecutor(_worker_count()) as pool:
        stats = list(pool.map(lambda a: _chunk_stats(sp, q, t0, tau, *a), zip(sizes, children)))

    # Chan et al. pairwise merge, in chunk order
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in stats:
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    var = m2 / (n - 1) if n > 1 else 0.0
    return MomentReport(q, sp.L, mean, math.sqrt(var / n), tau, n_samples, t0, seed, refs)


def per_mode_solution_count(q: int) -> int:
    """Number of ``(m, n) in {0,1}^q x {0,1}^q`` with ``sum(m) == sum(n)``.

    Counted by enumerating every bit vector on each side and pairing them by
    occupation number.
    """
    if not 0 <= q <= MAX_SOLUTION_Q:
        raise ValueError(f"q must lie in [0, {MAX_SOLUTION_Q}]")
    vectors = np.arange(1 << q, dtype=np.int64)
    weights = np.zeros(1 << q, dtype=np.int64)
    for bit in range(q):
        weights += (vectors >> bit) & 1
    counts = np.bincount(weights, minlength=q + 1)
    return sum(int(c) * int(c) for c in counts)


def exact_free_moment(q: int, L: int) -> int:
    """Infinite-time ``K_q`` for a rationally independent spectrum of L modes."""
    return per_mode_solution_count(q) ** L


def paper_free_moment(q: int, L: int) -> int:
    """``(q! 2**q)**L``, the closed form quoted in the literature."""
    return (math.factorial(q) * 2**q) ** L


def poisson_moment(q: int, L: int) -> int:
    """``q! 2**(qL)``, the Poisson prediction."""
    return math.factorial(q) * 2 ** (q * L)


def reference_moments(q: int, L: int) -> dict[str, int]:
    return {
        "paper_free": paper_free_moment(q, L),
        "exact_free": exact_free_moment(q, L),
        "poisson": poisson_moment(q, L),
    }


def degeneracy_first_moment(mb: ManyBodySpectrum) -> int:
    """Infinite-time ``K_1 = sum_E g(E)**2`` over distinct levels of degeneracy ``g``.

    Equals ``2**L`` iff the many-body spectrum is non-degenerate.
    """
    e = mb.energies
    breaks = np.nonzero(np.diff(e) >= mb.degeneracy_threshold)[0]
    sizes = np.diff(np.concatenate(([0], breaks + 1, [e.size])))
    return int(np.sum(sizes.astype(np.int64) ** 2))
