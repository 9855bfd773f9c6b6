import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from freefermion.levelstats import (
    POISSON_MEAN_RATIO,
    DegeneratePolicy,
    fraction_below,
    gaps,
    histogram,
    mean_ratio,
    poisson_mass_below,
    poisson_ratio_pdf,
    poisson_reference_spectrum,
    ratio_report,
    ratios,
)
from freefermion.model import ManyBodySpectrum, SingleParticleSpectrum, many_body_spectrum


def test_gaps_examples():
    assert gaps([0, 1, 3]).tolist() == [1, 2]
    assert gaps([2.0] * 5).tolist() == [0, 0, 0, 0]
    a, b = 0.5, 2.0
    assert gaps([0, a, b, a + b]).tolist() == [a, b - a, a]
    with pytest.raises(ValueError):
        gaps([0, 2, 1])


def test_ratio_examples():
    assert ratios([1, 1, 1])[0].tolist() == [1, 1]
    assert ratios([0, 1])[0].tolist() == [0]
    assert ratios([2, 1, 4])[0].tolist() == [0.5, 0.25]
    with pytest.raises(ValueError):
        ratios([1.0])


def test_ratio_policies():
    s = [0, 0, 1, 0, 2]
    r, dropped = ratios(s, policy="convention")
    assert r.tolist() == [1, 0, 0, 0] and dropped == 0
    r, dropped = ratios(s, policy=DegeneratePolicy.DROP)
    assert r.tolist() == [0, 0, 0] and dropped == 1


def test_ratio_threshold_classifies_tiny_gaps():
    r, _ = ratios([1e-15, 2e-15, 1.0], delta=1e-12)
    assert r.tolist() == [1, 0]


def test_mean_ratio():
    assert mean_ratio([1, 1]) == 1
    with pytest.raises(ValueError):
        mean_ratio([])


def test_poisson_pdf():
    assert poisson_ratio_pdf(0) == 2
    assert poisson_ratio_pdf(1) == 0.5
    with pytest.raises(ValueError):
        poisson_ratio_pdf(1.5)
    with pytest.raises(ValueError):
        poisson_ratio_pdf(np.array([0.2, -0.1]))
    assert abs(mpmath.quad(lambda r: poisson_ratio_pdf(float(r)), [0, 1]) - 1) < 1e-9
    mean = mpmath.quad(lambda r: r * 2 / (1 + r) ** 2, [0, 1])
    assert abs(mean - POISSON_MEAN_RATIO) < 1e-12
    assert poisson_mass_below(0.05) == pytest.approx(
        float(mpmath.quad(lambda r: 2 / (1 + r) ** 2, [0, 0.05])), rel=1e-12)


def test_poisson_reference():
    e = poisson_reference_spectrum(2, seed=1)
    assert e.shape == (2,) and e[0] <= e[1] and 0 <= e[0] and e[1] < 1
    assert np.array_equal(poisson_reference_spectrum(1000, seed=5),
                          poisson_reference_spectrum(1000, seed=5))
    with pytest.raises(ValueError):
        poisson_reference_spectrum(1)


def test_histogram_single_value():
    h = histogram([0.5], bins=1)
    assert h.densities.tolist() == [1.0]
    with pytest.raises(ValueError):
        histogram([0.5], bins=0)


def test_histogram_normalisation():
    r = np.random.default_rng(0).random(10_000)
    h = histogram(r, bins=37)
    assert abs(np.sum(h.densities * h.widths) - 1) < 1e-9
    assert np.all(np.diff(h.bin_edges) > 0)
    assert np.allclose(h.reference_densities, 2 / (1 + h.centers) ** 2)


@pytest.mark.parametrize("n", [10**4, 10**5, 10**6])
def test_poisson_mean_converges(n):
    sigma = math.sqrt(float(mpmath.quad(lambda r: r * r * 2 / (1 + r) ** 2, [0, 1]))
                      - POISSON_MEAN_RATIO**2)
    r, _ = ratios(gaps(poisson_reference_spectrum(n, seed=2024)))
    # neighbouring ratios share a gap, so allow a generous multiple
    assert abs(mean_ratio(r) - POISSON_MEAN_RATIO) < 6 * sigma / math.sqrt(n)


def test_report_on_degenerate_spectrum():
    sp = SingleParticleSpectrum.from_energies(["1", "1", "2"])
    mb = many_body_spectrum(sp)
    rep = ratio_report(mb)
    assert rep.n_levels == 8 and rep.n_zero_gaps == 3
    assert rep.mean_r == pytest.approx(np.mean(rep.ratios))
    drop = ratio_report(mb, "drop")
    assert drop.ratios.size + drop.n_dropped == rep.ratios.size


def test_fraction_below():
    assert fraction_below([0.0, 0.05, 0.5, 1.0], 0.05) == 0.5


levels = arrays(np.float64, st.integers(3, 60),
                elements=st.floats(-100, 100, allow_nan=False, allow_infinity=False),
                unique=True)


spaced = st.lists(st.floats(0.5, 2.0), min_size=2, max_size=40).map(
    lambda g: np.concatenate(([0.0], np.cumsum(g))))


@settings(max_examples=300, deadline=None)
@given(spaced, st.floats(0.01, 100), st.floats(-3, 3), st.floats(-100, 100))
def test_affine_invariance(e, a, shift, origin):
    e = e + origin
    r1, _ = ratios(gaps(e))
    r2, _ = ratios(gaps(np.sort(a * e + shift * a * (e[-1] - e[0]))))
    assert np.max(np.abs(r1 - r2)) < 1e-12


@settings(max_examples=200, deadline=None)
@given(levels)
def test_ratios_bounded_and_reversal_symmetric(e):
    e = np.sort(e)
    r, _ = ratios(gaps(e))
    assert np.all((r >= 0) & (r <= 1))
    rev, _ = ratios(gaps(np.sort(-e)))
    assert np.max(np.abs(np.sort(r) - np.sort(rev))) < 1e-12
