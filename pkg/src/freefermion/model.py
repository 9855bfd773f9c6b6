"""Tight-binding ring with complex (parity-breaking) hopping.

Single-particle dispersion at extended precision, the real-space hopping
matrix, and the full many-body spectrum ``E = n . eps`` over all
occupation vectors ``n in {0,1}^L``.
"""
from __future__ import annotations

import os
import re
import struct
from dataclasses import dataclass, field
from numbers import Real
from typing import Iterable, Sequence, Union

import mpmath
import numpy as np
from numba import njit

Coupling = Union[str, int, float, mpmath.mpf]

DEFAULT_PRECISION = 50
MAX_MANY_BODY_L = 28
# Gray-code walk resynchronises from extended precision every 2**16 steps.
CHECKPOINT_BITS = 16

_PRIMES = [p for p in range(2, 2000) if all(p % f for f in range(2, int(p**0.5) + 1))]


class SpectrumTooLarge(RuntimeError):
    """Raised when 2**L energies would exceed the configured memory cap."""


_ROOT = re.compile(r"^\s*([+-]?)\s*(sqrt|cbrt)\(\s*(\d+)\s*\)\s*$")
_FRACTION = re.compile(r"^\s*([+-]?\d+)\s*/\s*(\d+)\s*$")


def coupling_value(c: Coupling, dps: int) -> mpmath.mpf:
    """Evaluate a coupling to ``dps`` digits.

    Strings may be decimals (``"0.25"``), fractions (``"1/3"``) or roots
    of integers (``"sqrt(2)"``, ``"-cbrt(3)"``); those are evaluated
    exactly at the working precision instead of going through a float.
    """
    with mpmath.workdps(dps + 10):
        if isinstance(c, mpmath.mpf):
            return +c
        if isinstance(c, str):
            m = _ROOT.match(c)
            if m:
                sign, fn, n = m.groups()
                v = mpmath.sqrt(int(n)) if fn == "sqrt" else mpmath.cbrt(int(n))
                return -v if sign == "-" else v
            m = _FRACTION.match(c)
            if m:
                return mpmath.mpf(int(m.group(1))) / int(m.group(2))
            return mpmath.mpf(c.strip())
        if isinstance(c, Real):
            return mpmath.mpf(c)
    raise TypeError(f"unsupported coupling {c!r}")


def default_harmonic(d: int) -> "Harmonic":
    """Default couplings for the hopping of range ``d``.

    Cube roots of distinct primes: they are linearly independent over every
    field generated by cosines and sines of rational angles, so no accidental
    resonance can appear at any ring size.
    """
    if d == 1:
        return Harmonic(1, "1", "cbrt(2)")
    return Harmonic(d, f"cbrt({_PRIMES[2 * d - 2]})", f"cbrt({_PRIMES[2 * d - 1]})")


DEFAULT_GAMMA = "cbrt(3)"


@dataclass(frozen=True)
class Harmonic:
    order: int
    alpha: Coupling
    beta: Coupling


@dataclass(frozen=True)
class ModelParams:
    """Ring size, hopping harmonics and chemical potential.

    Incommensurability of the couplings is assumed, never checked.
    """

    L: int
    harmonics: tuple[Harmonic, ...]
    gamma: Coupling = DEFAULT_GAMMA
    precision_digits: int = DEFAULT_PRECISION

    def __post_init__(self):
        object.__setattr__(self, "harmonics", tuple(self.harmonics))
        if self.L < 2:
            raise ValueError(f"L must be >= 2, got {self.L}")
        if self.precision_digits < 30:
            raise ValueError("precision_digits must be >= 30")
        orders = [h.order for h in self.harmonics]
        if len(set(orders)) != len(orders):
            raise ValueError(f"duplicate harmonic orders {orders}")
        for d in orders:
            if not 1 <= d < self.L:
                raise ValueError(f"harmonic order {d} outside [1, {self.L})")
        for h in self.harmonics:
            for c in (h.alpha, h.beta):
                if not mpmath.isfinite(coupling_value(c, 15)):
                    raise ValueError(f"non-finite coupling {c!r}")

    @classmethod
    def default(cls, L: int, orders: Iterable[int] = (1,), gamma: Coupling = DEFAULT_GAMMA,
                precision_digits: int = DEFAULT_PRECISION) -> "ModelParams":
        return cls(L, tuple(default_harmonic(d) for d in sorted(set(orders))), gamma,
                   precision_digits)

    @property
    def orders(self) -> tuple[int, ...]:
        return tuple(h.order for h in self.harmonics)

    def couplings(self) -> dict[str, str]:
        """Couplings as strings, for provenance records."""
        out = {}
        for h in self.harmonics:
            out[f"alpha_{h.order}"] = str(h.alpha)
            out[f"beta_{h.order}"] = str(h.beta)
        out["gamma"] = str(self.gamma)
        return out


@dataclass(frozen=True)
class SingleParticleSpectrum:
    """Mode energies at extended precision plus a float64 shadow."""

    energies: tuple
    precision_digits: int = DEFAULT_PRECISION
    shadow: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        with mpmath.workdps(self.precision_digits + 10):
            vals = tuple(mpmath.mpf(e) for e in self.energies)
        object.__setattr__(self, "energies", vals)
        shadow = np.array([float(e) for e in vals], dtype=np.float64)
        shadow.setflags(write=False)
        object.__setattr__(self, "shadow", shadow)

    @classmethod
    def from_energies(cls, values: Sequence, precision_digits: int = DEFAULT_PRECISION):
        return cls(tuple(coupling_value(v, precision_digits) for v in values), precision_digits)

    @property
    def L(self) -> int:
        return len(self.energies)

    @property
    def split(self) -> tuple[np.ndarray, np.ndarray]:
        """Double-double ``(hi, lo)`` representation of the energies."""
        with mpmath.workdps(self.precision_digits + 10):
            lo = np.array([float(e - mpmath.mpf(float(e))) for e in self.energies])
        return self.shadow, lo


def dispersion(p: ModelParams) -> SingleParticleSpectrum:
    """Mode energies ``eps_k = sum_d [a_d cos(2 pi d k/L) + b_d sin(2 pi d k/L)] + gamma``.

    The phase index ``d*k`` is reduced mod L in integers before the angle
    is formed, so no precision is lost on large arguments.
    """
    L, dps = p.L, p.precision_digits
    with mpmath.workdps(dps + 10):
        gamma = coupling_value(p.gamma, dps)
        coup = [(h.order, coupling_value(h.alpha, dps), coupling_value(h.beta, dps))
                for h in p.harmonics]
        two_pi = 2 * mpmath.pi
        energies = []
        for k in range(L):
            terms = [gamma]
            for d, a, b in coup:
                theta = two_pi * ((d * k) % L) / L
                terms.append(a * mpmath.cos(theta))
                terms.append(b * mpmath.sin(theta))
            energies.append(mpmath.fsum(terms))
    return SingleParticleSpectrum(tuple(energies), dps)


@dataclass(frozen=True)
class HoppingMatrix:
    matrix: np.ndarray

    @property
    def L(self) -> int:
        return self.matrix.shape[0]


def hopping_matrix(p: ModelParams) -> HoppingMatrix:
    """Real-space circulant ``M`` with ``M[n, n+d] = (a_d + i b_d)/2`` plus h.c.

    Contributions are accumulated, so for small rings where ``n+d`` and
    ``n-d`` coincide mod L both hoppings land on the same entry.
    """
    L = p.L
    m = np.zeros((L, L), dtype=np.complex128)
    m[np.diag_indices(L)] = float(coupling_value(p.gamma, p.precision_digits))
    for h in p.harmonics:
        t = complex(float(coupling_value(h.alpha, p.precision_digits)),
                    float(coupling_value(h.beta, p.precision_digits))) / 2
        for n in range(L):
            j = (n + h.order) % L
            m[n, j] += t
            m[j, n] += t.conjugate()
    return HoppingMatrix(m)


def eig_check(m: HoppingMatrix, sp: SingleParticleSpectrum) -> float:
    """Max deviation between sorted eigenvalues of ``m`` and sorted ``eps``."""
    if m.L != sp.L:
        raise ValueError(f"size mismatch: matrix {m.L}, spectrum {sp.L}")
    ev = np.linalg.eigvalsh(m.matrix)
    return float(np.max(np.abs(np.sort(ev) - np.sort(sp.shadow))))


def fourier_matrix(L: int) -> np.ndarray:
    n = np.arange(L)
    phase = (np.outer(n, n) % L) * (2 * np.pi / L)
    return np.exp(1j * phase) / np.sqrt(L)


def extensivity_check(L: int) -> float:
    """Max over entries of ``| |O_nk| sqrt(L) - 1 |`` for the Fourier modes."""
    if L < 2:
        raise ValueError(f"L must be >= 2, got {L}")
    o = fourier_matrix(L)
    return float(np.max(np.abs(np.abs(o) * np.sqrt(L) - 1.0)))


@dataclass(frozen=True)
class ManyBodySpectrum:
    L: int
    energies: np.ndarray
    degeneracy_threshold: float

    def __len__(self):
        return len(self.energies)


@njit(cache=True)
def _gray_walk(hi, lo, checkpoints, block_bits, out):
    n = out.shape[0]
    mask = (1 << block_bits) - 1
    s = 0.0
    c = 0.0
    for i in range(n):
        g = i ^ (i >> 1)
        if i & mask == 0:
            s = checkpoints[i >> block_bits]
            c = 0.0
        else:
            k = 0
            while not (i >> k) & 1:
                k += 1
            if (g >> k) & 1:
                a = hi[k]
                b = lo[k]
            else:
                a = -hi[k]
                b = -lo[k]
            # Neumaier compensated add of a, then b
            t = s + a
            if abs(s) >= abs(a):
                c += (s - t) + a
            else:
                c += (a - t) + s
            s = t
            t = s + b
            if abs(s) >= abs(b):
                c += (s - t) + b
            else:
                c += (b - t) + s
            s = t
        out[g] = s + c


def gray_code_energies(sp: SingleParticleSpectrum, max_L: int = MAX_MANY_BODY_L) -> np.ndarray:
    """Energies of all ``2**L`` configurations, indexed by occupation bitmask.

    Bit ``k`` of the index is the occupation of mode ``k``. Configurations are
    visited in Gray-code order, each step adding or removing one mode energy
    with compensated summation. Every ``2**CHECKPOINT_BITS`` steps the running
    sum is reset from an exact extended-precision evaluation.
    """
    L = sp.L
    if L > max_L:
        raise SpectrumTooLarge(f"L={L} exceeds the many-body cap of {max_L}")
    n = 1 << L
    hi, lo = sp.split
    with mpmath.workdps(sp.precision_digits + 10):
        n_blocks = max(1, n >> CHECKPOINT_BITS)
        checkpoints = np.empty(n_blocks)
        for b in range(n_blocks):
            i = b << CHECKPOINT_BITS
            g = i ^ (i >> 1)
            checkpoints[b] = float(mpmath.fsum(sp.energies[k] for k in range(L) if g >> k & 1))
    out = np.empty(n, dtype=np.float64)
    _gray_walk(hi, lo, checkpoints, CHECKPOINT_BITS, out)
    return out


def configuration_energy(sp: SingleParticleSpectrum, config: int) -> float:
    """Direct extended-precision energy of one occupation bitmask."""
    with mpmath.workdps(sp.precision_digits + 10):
        return float(mpmath.fsum(e for k, e in enumerate(sp.energies) if config >> k & 1))


def many_body_spectrum(sp: SingleParticleSpectrum, max_L: int | None = None) -> ManyBodySpectrum:
    """Sorted many-body energies of the free-fermion Hamiltonian."""
    if max_L is None:
        max_L = int(os.environ.get("FREEFERMION_MAX_L", MAX_MANY_BODY_L))
    e = gray_code_energies(sp, max_L)
    e.sort()
    delta = 1e-12 * float(e[-1] - e[0])
    return ManyBodySpectrum(sp.L, e, delta)


_MAGIC = b"FSPC"
_VERSION = 1
_HEADER = struct.Struct("<4sII")


def write_spectrum(mb: ManyBodySpectrum, path) -> None:
    """Binary dump: ``FSPC``, u32 version, u32 L, then ``2**L`` little-endian doubles."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, _VERSION, mb.L))
        fh.write(np.ascontiguousarray(mb.energies, dtype="<f8").tobytes())


def read_spectrum(path) -> ManyBodySpectrum:
    with open(path, "rb") as fh:
        magic, version, L = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != _VERSION:
            raise ValueError(f"unsupported version {version}")
        e = np.frombuffer(fh.read(), dtype="<f8").astype(np.float64)
    if e.size != 1 << L:
        raise ValueError(f"expected {1 << L} energies, found {e.size}")
    return ManyBodySpectrum(L, e, 1e-12 * float(e[-1] - e[0]))
