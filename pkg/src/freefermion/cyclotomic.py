"""Exact integer polynomials, cyclotomic polynomials and small number theory.

Coefficients are plain Python ints, so everything here is exact and
arbitrary precision. Polynomials are stored in ascending degree order.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence


class NotDivisible(ArithmeticError):
    """Raised when a polynomial is not an exact integer multiple of another."""


def _strip(coeffs: Iterable[int]) -> tuple[int, ...]:
    c = [int(x) for x in coeffs]
    while c and c[-1] == 0:
        c.pop()
    return tuple(c)


@dataclass(frozen=True, init=False)
class IntPoly:
    """Integer polynomial ``sum_j coeffs[j] * z**j`` in canonical form.

    Trailing (high-degree) zeros are stripped on construction, so two
    polynomials are equal iff their coefficient tuples are equal. The zero
    polynomial has an empty coefficient tuple and ``degree`` None.
    """

    coeffs: tuple[int, ...]

    def __init__(self, coeffs: Iterable[int] = ()):
        object.__setattr__(self, "coeffs", _strip(coeffs))

    @classmethod
    def monomial(cls, n: int, c: int = 1) -> "IntPoly":
        return cls([0] * n + [c])

    @property
    def degree(self) -> Optional[int]:
        """Degree, or None for the zero polynomial."""
        return len(self.coeffs) - 1 if self.coeffs else None

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def leading(self) -> int:
        return self.coeffs[-1] if self.coeffs else 0

    def padded(self, length: int) -> tuple[int, ...]:
        """Coefficients zero-padded to ``length`` entries."""
        if len(self.coeffs) > length:
            raise ValueError(f"degree {self.degree} does not fit in {length} coefficients")
        return self.coeffs + (0,) * (length - len(self.coeffs))

    def __mul__(self, other: "IntPoly") -> "IntPoly":
        return poly_mul(self, other)

    def __sub__(self, other: "IntPoly") -> "IntPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        return IntPoly(a - b for a, b in zip(self.padded(n), other.padded(n)))

    def __add__(self, other: "IntPoly") -> "IntPoly":
        n = max(len(self.coeffs), len(other.coeffs))
        return IntPoly(a + b for a, b in zip(self.padded(n), other.padded(n)))

    def __call__(self, x: int) -> int:
        return poly_eval_int(self, x)

    def __str__(self) -> str:
        if not self.coeffs:
            return "0"
        terms = []
        for j in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[j]
            if c == 0:
                continue
            mag = abs(c)
            if j == 0:
                body = str(mag)
            else:
                body = ("" if mag == 1 else str(mag)) + ("z" if j == 1 else f"z^{j}")
            terms.append(("-" if c < 0 else "+", body))
        sign, body = terms[0]
        out = ("-" if sign == "-" else "") + body
        for sign, body in terms[1:]:
            out += f" {sign} {body}"
        return out


ZERO = IntPoly()
ONE = IntPoly([1])


def divisors(n: int) -> list[int]:
    """All positive divisors of ``n`` in ascending order."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    small, large = [], []
    d = 1
    while d * d <= n:
        if n % d == 0:
            small.append(d)
            if d * d != n:
                large.append(n // d)
        d += 1
    return small + large[::-1]


def prime_factors(n: int) -> list[int]:
    """Distinct prime factors of ``n`` in ascending order."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    out = []
    p = 2
    while p * p <= n:
        if n % p == 0:
            out.append(p)
            while n % p == 0:
                n //= p
        p += 1
    if n > 1:
        out.append(n)
    return out


def is_prime(n: int) -> bool:
    return n >= 2 and prime_factors(n) == [n]


def totient(n: int) -> int:
    """Euler's totient, via the product formula over distinct primes."""
    result = n
    for p in prime_factors(n):
        result -= result // p
    return result


def poly_mul(p: IntPoly, q: IntPoly) -> IntPoly:
    """Schoolbook product."""
    if p.is_zero or q.is_zero:
        return ZERO
    out = [0] * (len(p.coeffs) + len(q.coeffs) - 1)
    for i, a in enumerate(p.coeffs):
        if a == 0:
            continue
        for j, b in enumerate(q.coeffs):
            out[i + j] += a * b
    return IntPoly(out)


def poly_divmod(p: IntPoly, d: IntPoly) -> tuple[IntPoly, IntPoly]:
    """Integer long division ``p = d*q + r`` with ``deg r < deg d``.

    Raises NotDivisible if a quotient coefficient would not be an integer,
    which can only happen when ``d`` is not monic.
    """
    if d.is_zero:
        raise ZeroDivisionError("division by the zero polynomial")
    rem = list(p.coeffs)
    dd = len(d.coeffs) - 1
    lead = d.leading
    if len(rem) <= dd:
        return ZERO, p
    quot = [0] * (len(rem) - dd)
    for i in range(len(rem) - 1, dd - 1, -1):
        c = rem[i]
        if c == 0:
            continue
        k, r = divmod(c, lead)
        if r:
            raise NotDivisible(f"leading coefficient {lead} does not divide {c}")
        quot[i - dd] = k
        for j, b in enumerate(d.coeffs):
            rem[i - dd + j] -= k * b
    return IntPoly(quot), IntPoly(rem)


def poly_divexact(p: IntPoly, d: IntPoly) -> IntPoly:
    """Return ``q`` with ``p == d*q`` exactly, or raise NotDivisible."""
    q, r = poly_divmod(p, d)
    if not r.is_zero:
        raise NotDivisible(f"({p}) is not a multiple of ({d})")
    return q


def divides(d: IntPoly, p: IntPoly) -> bool:
    try:
        poly_divexact(p, d)
    except NotDivisible:
        return False
    return True


def poly_eval_int(p: IntPoly, x: int) -> int:
    """Horner evaluation at an integer point."""
    acc = 0
    for c in reversed(p.coeffs):
        acc = acc * x + c
    return acc


@lru_cache(maxsize=None)
def cyclotomic(n: int) -> IntPoly:
    """The n-th cyclotomic polynomial.

    Obtained by dividing ``z**n - 1`` by every lower-order factor
    ``cyclotomic(d)`` with ``d | n``, ``d < n``.
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    acc = IntPoly([-1] + [0] * (n - 1) + [1])
    for d in divisors(n)[:-1]:
        acc = poly_divexact(acc, cyclotomic(d))
    return acc


def poly_product(polys: Sequence[IntPoly]) -> IntPoly:
    out = ONE
    for p in polys:
        out = poly_mul(out, p)
    return out

