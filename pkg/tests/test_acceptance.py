"""Acceptance gate: one test per criterion, each at its stated tolerance and time budget.

A per-criterion PASS/FAIL table is printed in the terminal summary.
"""
import time
import tracemalloc

import mpmath
import numpy as np
import pytest

from freefermion.certify import (
    HarmonicSet,
    Witness,
    certify,
    pair_polynomial,
    paper_counterexample,
    proper_divisor_orders,
    subset_resonance_scan,
    verify_witness_exact,
    verify_witness_numeric,
)
from freefermion.cyclotomic import IntPoly, cyclotomic, divisors, is_prime, poly_product, totient
from freefermion.levelstats import (
    POISSON_MEAN_RATIO,
    DegeneratePolicy,
    fraction_below,
    histogram,
    mean_ratio,
    poisson_mass_below,
    poisson_reference_spectrum,
    ratio_report,
    ratios,
    gaps,
)
from freefermion.model import (
    ModelParams,
    SingleParticleSpectrum,
    dispersion,
    eig_check,
    extensivity_check,
    hopping_matrix,
    many_body_spectrum,
)
from freefermion.sff import (
    exact_free_moment,
    moment_estimate,
    paper_free_moment,
    poisson_moment,
    sff_point,
    trace_direct,
)

PAPER_MEAN_R_L23 = 0.36936


class Budget:
    def __init__(self, seconds):
        self.seconds = seconds

    def __enter__(self):
        self.t = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.t
        if exc[0] is None:
            assert self.elapsed < self.seconds, f"took {self.elapsed:.1f} s, budget {self.seconds} s"


@pytest.mark.criterion(1, "prime/composite sweep, L in [2,200], orders={1}")
def test_prime_composite_sweep(record_property):
    with Budget(10) as b:
        bad = [L for L in range(2, 201)
               if certify(HarmonicSet(L, {1})).independent != is_prime(L)]
    record_property("mismatches", len(bad))
    record_property("seconds", f"{b.elapsed:.2f}")
    assert bad == []


@pytest.mark.criterion(2, "divisor-harmonic sweep, L in [2,100]")
def test_divisor_harmonic_sweep(record_property):
    with Budget(10) as b:
        bad = [L for L in range(2, 101)
               if not certify(HarmonicSet(L, proper_divisor_orders(L))).independent]
        degree_ok = all(sum(totient(m) for m in divisors(L)) == L for L in range(2, 101))
    record_property("dependent", len(bad))
    record_property("seconds", f"{b.elapsed:.2f}")
    assert bad == [] and degree_ok


@pytest.mark.criterion(3, "witness validity, composite L <= 100")
def test_witness_validity(record_property):
    worst = mpmath.mpf(0)
    with Budget(30) as b:
        for L in range(4, 101):
            if is_prime(L):
                continue
            h = HarmonicSet(L, {1})
            sp = dispersion(ModelParams.default(L))
            verdict = certify(h)
            assert isinstance(verdict, Witness)
            for poly in (verdict.poly, paper_counterexample(L)):
                assert verify_witness_exact(poly, h), (L, poly)
                res = verify_witness_numeric(poly.padded(L), sp)
                assert res < mpmath.mpf("1e-20"), (L, res)
                worst = max(worst, res)
    record_property("max_residual", mpmath.nstr(worst, 3))
    record_property("seconds", f"{b.elapsed:.1f}")


@pytest.mark.criterion(4, "brute-force concordance, tol=1e-10, q<=3")
def test_brute_force_concordance(record_property):
    hits = {}
    with Budget(300) as b:
        for L in (4, 6, 8, 9, 10, 5, 7, 11, 13):
            pairs = subset_resonance_scan(dispersion(ModelParams.default(L)), 3, 1e-10)
            h = HarmonicSet(L, {1})
            assert all(verify_witness_exact(pair_polynomial(r, L), h) for r in pairs), L
            hits[L] = len(pairs)
    record_property("hits", hits)
    record_property("seconds", f"{b.elapsed:.1f}")
    assert all(hits[L] > 0 for L in (4, 6, 8, 9, 10))
    assert all(hits[L] == 0 for L in (5, 7, 11, 13))


@pytest.mark.criterion(5, "cyclotomic identities, n <= 300")
def test_cyclotomic_identities(record_property):
    with Budget(5) as b:
        for n in range(1, 301):
            assert poly_product([cyclotomic(d) for d in divisors(n)]) == IntPoly.monomial(n) - IntPoly([1])
            assert cyclotomic(n).degree == totient(n)
    record_property("seconds", f"{b.elapsed:.2f}")


@pytest.fixture(scope="module")
def spectrum_23():
    tracemalloc.start()
    t = time.perf_counter()
    mb = many_body_spectrum(dispersion(ModelParams.default(23)))
    report = ratio_report(mb)
    elapsed = time.perf_counter() - t
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return report, elapsed, peak


@pytest.mark.criterion(6, "gap-ratio test, L=23: <r> within 0.36936 +- 0.010, histogram tracks p(r)")
def test_ratio_L23(spectrum_23, record_property):
    report, elapsed, peak = spectrum_23
    hist = histogram(report.ratios, 50)
    tv = hist.total_variation()
    record_property("mean_r", f"{report.mean_r:.5f}")
    record_property("histogram_TV", f"{tv:.4f}")
    record_property("seconds", f"{elapsed:.1f}")
    record_property("peak_MiB", f"{peak / 2**20:.0f}")
    assert elapsed < 120
    assert peak < 2**30
    # qualitative tracking: small total variation, density decreasing from r=0 to r=1
    assert tv < 0.1
    assert hist.densities[0] > hist.densities[-1]
    assert abs(report.mean_r - PAPER_MEAN_R_L23) <= 0.010


@pytest.mark.criterion(7, "Poisson calibration, 1e6 i.i.d. levels")
def test_poisson_calibration(record_property):
    with Budget(10) as b:
        e = poisson_reference_spectrum(10**6, seed=2024)
        r, _ = ratios(gaps(e))
        m = mean_ratio(r)
        sup = histogram(r, 50).sup_distance()
    record_property("mean_r", f"{m:.5f}")
    record_property("sup_distance", f"{sup:.4f}")
    assert abs(m - 0.38629) <= 0.002
    assert abs(POISSON_MEAN_RATIO - 0.38629436112) < 1e-11
    assert sup < 0.02


@pytest.mark.criterion(8, "composite-L clustering, L=20: fraction of r in [0,0.05] >= 0.29 (drop policy)")
def test_composite_clustering(record_property):
    with Budget(30) as b:
        mb = many_body_spectrum(dispersion(ModelParams.default(20)))
        dropped = ratio_report(mb, DegeneratePolicy.DROP)
        convention = ratio_report(mb, DegeneratePolicy.CONVENTION)
        frac = fraction_below(dropped.ratios, 0.05)
    record_property("fraction_drop", f"{frac:.3f}")
    record_property("fraction_convention", f"{fraction_below(convention.ratios, 0.05):.3f}")
    record_property("poisson_mass", f"{poisson_mass_below(0.05):.4f}")
    assert frac >= 0.29
    assert frac >= 3 * poisson_mass_below(0.05)


@pytest.mark.criterion(9, "SFF first moment = 2^L within 3 sigma, L in {4,8,12} (divisor harmonics)")
def test_sff_first_moment(record_property):
    with Budget(120) as b:
        for L in (4, 8, 12):
            sp = dispersion(ModelParams.default(L, orders=proper_divisor_orders(L)))
            rep = moment_estimate(sp, 1, tau=1e5, n_samples=10**6, seed=L)
            record_property(f"L{L}", f"{rep.estimate:.1f}+-{rep.std_error:.1f}")
            assert rep.references["exact_free"] == 2**L
            assert rep.deviation_sigma("exact_free") < 3, (L, rep)


@pytest.mark.criterion(10, "SFF q=2: C(2q,q)^L within 3 sigma, (q!2^q)^L excluded at >= 10 sigma for L=1")
def test_sff_second_moment(record_property):
    with Budget(120) as b:
        for L in (1, 2, 3):
            if L == 1:
                sp = SingleParticleSpectrum.from_energies(["cbrt(3)"])
            else:
                sp = dispersion(ModelParams.default(L, orders=proper_divisor_orders(L)))
            rep = moment_estimate(sp, 2, tau=1e5, n_samples=10**6, seed=100 + L)
            refs = rep.references
            assert refs == {"paper_free": 8**L, "exact_free": 6**L,
                            "poisson": poisson_moment(2, L)}
            record_property(f"L{L}", f"{rep.estimate:.3f}+-{rep.std_error:.3f} refs={refs}")
            assert rep.deviation_sigma("exact_free") < 3, (L, rep)
            if L == 1:
                sigma = rep.deviation_sigma("paper_free")
                record_property("paper_free_sigma_L1", f"{sigma:.0f}")
                assert sigma >= 10


@pytest.mark.criterion(11, "free exceeds Poisson, q in {2,3}, L in [2,64]")
def test_free_exceeds_poisson():
    for q in (2, 3):
        for L in range(2, 65):
            assert exact_free_moment(q, L) > poisson_moment(q, L)
            assert paper_free_moment(q, L) > poisson_moment(q, L)


@pytest.mark.criterion(12, "model consistency: eig_check, extensivity, product vs direct trace")
def test_model_consistency(record_property):
    with Budget(60) as b:
        eig = ext = 0.0
        for L in (8, 23, 64):
            p = ModelParams.default(L)
            eig = max(eig, eig_check(hopping_matrix(p), dispersion(p)))
            ext = max(ext, extensivity_check(L))
        rel = 0.0
        for L in range(2, 13):
            sp = dispersion(ModelParams.default(L))
            t = np.random.default_rng(1000 + L).uniform(0, 100, 100)
            direct = trace_direct(sp, t)
            rel = max(rel, float(np.max(np.abs(sff_point(sp, t) - direct) / direct)))
    record_property("eig_dev", f"{eig:.2e}")
    record_property("extensivity", f"{ext:.2e}")
    record_property("trace_rel", f"{rel:.2e}")
    assert eig < 1e-10
    assert ext < 1e-14
    assert rel < 1e-10
