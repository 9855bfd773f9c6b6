"""Exact rational-independence certificates for ring dispersions.

A vanishing integer combination ``sum_k a_k eps_k`` of the mode energies
splits, for incommensurate couplings, into one root-of-unity condition
``P(xi**d) = 0`` per harmonic ``d`` (plus ``P(1) = 0`` for the constant
term), where ``P(z) = sum_k a_k z**k`` and ``xi = exp(2 pi i / L)``. Each
condition is equivalent to divisibility by a cyclotomic polynomial, so the
question becomes a degree count.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import mpmath
import numpy as np

from .cyclotomic import (
    IntPoly,
    cyclotomic,
    divides,
    divisors,
    is_prime,
    poly_product,
    prime_factors,
    totient,
)
from .model import ModelParams, SingleParticleSpectrum


@dataclass(frozen=True)
class HarmonicSet:
    """Ring size and hopping ranges entering the dispersion."""

    L: int
    orders: frozenset
    include_constant: bool = True

    def __post_init__(self):
        object.__setattr__(self, "orders", frozenset(int(d) for d in self.orders))
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if not self.orders:
            raise ValueError("at least one harmonic order is required")
        bad = sorted(d for d in self.orders if not 1 <= d < self.L)
        if bad:
            raise ValueError(f"orders {bad} outside [1, {self.L})")

    @classmethod
    def from_params(cls, p: ModelParams, include_constant: bool = True) -> "HarmonicSet":
        return cls(p.L, frozenset(p.orders), include_constant)


@dataclass(frozen=True)
class Certificate:
    """No nonzero integer combination of the mode energies vanishes."""

    required_orders: frozenset
    degree_sum: int
    bound: int

    independent = True

    def __post_init__(self):
        if self.degree_sum < self.bound:
            raise ValueError("certificate requires degree_sum >= bound")


@dataclass(frozen=True)
class Witness:
    """An explicit vanishing combination ``sum_k coeffs[k] * eps_k = 0``."""

    poly: IntPoly
    coeffs: tuple[int, ...]
    required_orders: frozenset

    independent = False

    @property
    def degree_sum(self) -> int:
        return self.poly.degree


IndependenceVerdict = Union[Certificate, Witness]


@dataclass(frozen=True)
class ResonancePair:
    M: tuple[int, ...]
    N: tuple[int, ...]
    deviation: float

    def coefficients(self, L: int) -> list[int]:
        """+1 on ``M``, -1 on ``N``; shared modes cancel to 0."""
        a = [0] * L
        for k in self.M:
            a[k] += 1
        for k in self.N:
            a[k] -= 1
        return a


def required_orders(h: HarmonicSet) -> frozenset:
    """Orders ``m`` whose cyclotomic polynomial must divide any resonance polynomial.

    ``xi**d`` is a primitive ``L/gcd(d, L)``-th root of unity.
    """
    out = {h.L // math.gcd(d, h.L) for d in h.orders}
    if h.include_constant:
        out.add(1)
    return frozenset(out)


def certify(h: HarmonicSet) -> IndependenceVerdict:
    orders = required_orders(h)
    degree_sum = sum(totient(m) for m in orders)
    if degree_sum >= h.L:
        return Certificate(orders, degree_sum, h.L)
    # the product of the distinct irreducible factors is itself admissible
    g = poly_product([cyclotomic(m) for m in sorted(orders)])
    return Witness(g, g.padded(h.L), orders)


def paper_counterexample(L: int, p: Optional[int] = None) -> IntPoly:
    """Resonance polynomial ``(z - 1) * Q(z)`` for composite ``L = n*p``.

    ``Q(z) = 1 + z**n + ... + z**(n*(p-1))`` vanishes at ``xi`` because
    ``xi**n`` is a primitive p-th root of unity; the ``z - 1`` factor kills
    the constant term. ``p`` defaults to the smallest prime factor of L.
    """
    if L < 4 or is_prime(L):
        raise ValueError(f"L must be composite, got {L}")
    if p is None:
        p = prime_factors(L)[0]
    if not is_prime(p) or L % p:
        raise ValueError(f"p={p} is not a prime factor of {L}")
    n = L // p
    q = [0] * (n * (p - 1) + 1)
    for j in range(p):
        q[j * n] = 1
    return IntPoly([-1, 1]) * IntPoly(q)


def verify_witness_exact(poly: IntPoly, h: HarmonicSet) -> bool:
    """True iff every required cyclotomic factor divides ``poly``."""
    if poly.is_zero:
        raise ValueError("witness polynomial must be nonzero")
    if poly.degree > h.L - 1:
        raise ValueError(f"witness degree {poly.degree} exceeds L-1 = {h.L - 1}")
    return all(divides(cyclotomic(m), poly) for m in sorted(required_orders(h)))


def verify_witness_numeric(a: Sequence[int], sp: SingleParticleSpectrum) -> mpmath.mpf:
    """``|sum_k a_k eps_k|`` at the spectrum's working precision."""
    if len(a) != sp.L:
        raise ValueError(f"expected {sp.L} coefficients, got {len(a)}")
    with mpmath.workdps(sp.precision_digits):
        return abs(mpmath.fsum(int(c) * e for c, e in zip(a, sp.energies)))


def subset_resonance_scan(sp: SingleParticleSpectrum, q_max: int, tol: float) -> list[ResonancePair]:
    """Brute-force search for equal-size mode subsets with equal energy sums.

    Returns every unordered pair of distinct ``q``-subsets (``q <= q_max``)
    whose sums differ by less than ``tol``, with ``M < N``
    lexicographically. Subsets may share modes.
    """
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    L = sp.L
    eps = sp.shadow
    found = []
    for q in range(1, min(q_max, L) + 1):
        subsets = np.array(list(itertools.combinations(range(L), q)), dtype=np.int64)
        sums = eps[subsets].sum(axis=1)
        order = np.argsort(sums, kind="stable")
        s = sums[order]
        upper = np.searchsorted(s, s + tol, side="left")
        for i in np.nonzero(upper > np.arange(len(s)) + 1)[0]:
            for j in range(i + 1, upper[i]):
                a = tuple(int(x) for x in subsets[order[i]])
                b = tuple(int(x) for x in subsets[order[j]])
                dev = abs(float(s[j] - s[i]))
                if dev < tol:
                    found.append(ResonancePair(min(a, b), max(a, b), dev))
    found.sort(key=lambda r: (len(r.M), r.M, r.N))
    return found


def pair_polynomial(pair: ResonancePair, L: int) -> IntPoly:
    return IntPoly(pair.coefficients(L))


def proper_divisor_orders(L: int) -> frozenset:
    """Every divisor of L below L: the harmonic set that restores independence."""
    return frozenset(divisors(L)[:-1])
