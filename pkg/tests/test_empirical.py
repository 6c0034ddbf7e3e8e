import math
from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from ipef import distributions
from ipef.empirical import (
    Sample,
    alpha_np,
    breve_integrated_edf,
    edf_eval,
    integrated_edf,
    integrated_edf_oracle,
    integrated_values,
    poly_integrated_edf,
    poly_theoretical,
    representation_coefficients,
    theoretical_integrated,
    tilde_integrated_edf,
    tilde_theoretical,
    weighted_pooled_integrated,
)


def multiset_count(k, p):
    # number of nondecreasing (p+1)-tuples from {1..k}, by enumeration
    return sum(1 for _ in combinations_with_replacement(range(k), p + 1))


def test_edf_examples():
    assert edf_eval(Sample([0.25, 0.75]), 0.5) == 0.5
    assert edf_eval(Sample([0.1, 0.2, 0.3]), 0.2) == pytest.approx(2 / 3)
    s = Sample([3.0, 1.0, 2.0])
    assert edf_eval(s, 0.99) == 0
    assert edf_eval(s, 2.0, left=True) == pytest.approx(1 / 3)


def test_integrated_edf_examples():
    s = Sample([0.25, 0.75])
    v = integrated_edf(s, 1, 0.5)
    assert v.exact == Fraction(1, 4)
    assert v.u_count == 1
    # p = 2 at the right end: C(n+2, 3) / n^3
    for n in range(1, 9):
        s = Sample(np.linspace(0.1, 0.9, n))
        assert integrated_edf(s, 2, 1.0).exact == Fraction(math.comb(n + 2, 3), n ** 3)
        assert integrated_edf_oracle(s, 2, 1.0) == pytest.approx(math.comb(n + 2, 3) / n ** 3, abs=1e-12)


def test_oracle_examples():
    assert integrated_edf_oracle(Sample([0.5]), 1, 1.0) == 1.0
    s3 = Sample([0.2, 0.5, 0.9])
    assert multiset_count(3, 2) == 10
    assert integrated_edf_oracle(s3, 2, 1.0) == pytest.approx(10 / 27, abs=1e-15)
    s2 = Sample([0.2, 0.6])
    assert integrated_edf_oracle(s2, 1, 0.4) == pytest.approx(1 / 4, abs=1e-15)
    with pytest.raises(ValueError):
        integrated_edf_oracle(Sample(np.arange(13.0)), 1, 0.0)
    with pytest.raises(ValueError):
        integrated_edf_oracle(s2, 5, 0.0)


def test_closed_form_counts_multisets():
    for k in range(0, 7):
        for p in range(0, 4):
            assert math.comb(k + p, p + 1) == multiset_count(k, p)


def test_p0_reduces_to_edf():
    rng = np.random.default_rng(0)
    s = Sample(rng.random(9))
    for t in np.linspace(-0.1, 1.1, 23):
        assert integrated_edf(s, 0, t).value == edf_eval(s, t)


def test_closed_form_vs_oracle_small():
    rng = np.random.default_rng(1)
    for _ in range(60):
        n = int(rng.integers(1, 9))
        s = Sample(rng.random(n))
        pts = np.concatenate([s.sorted, (s.sorted[:-1] + s.sorted[1:]) / 2, [-1.0, 2.0]])
        for p in range(4):
            for t in pts:
                assert abs(integrated_edf(s, p, t).value - integrated_edf_oracle(s, p, t)) <= 1e-12


def test_float_path_matches_exact():
    for n in (5, 61, 500):
        for p in (0, 1, 3, 7):
            k = np.arange(n + 1)
            exact = np.array([float(Fraction(math.comb(int(j) + p, p + 1), n ** (p + 1))) for j in k])
            assert_allclose(integrated_values(k, n, p), exact, rtol=1e-13, atol=0)
    # large n + p goes through floating point
    v = integrated_edf(Sample(np.arange(100.0)), 3, 50.0)
    assert v.exact is None
    assert v.value == pytest.approx(math.comb(51 + 3, 4) / 100 ** 4, rel=1e-13)


def test_left_limit_at_jump():
    s = Sample([0.2, 0.6, 0.7])
    assert integrated_edf(s, 1, 0.6, left=True).u_count == 1
    assert integrated_edf(s, 1, 0.6).u_count == 2


def test_ties_count_with_multiplicity():
    s = Sample([0.5, 0.5, 0.9])
    v = integrated_edf(s, 1, 0.5)
    assert v.u_count == 2
    assert v.exact == Fraction(3, 9)
    # the literal Stieltjes integral weights tied atoms by the post-jump
    # e.d.f. and so departs from the count-based closed form
    assert integrated_edf_oracle(s, 1, 0.5) == pytest.approx(4 / 9)


def test_theoretical_examples():
    assert theoretical_integrated(1.0, 2) == pytest.approx(1 / 6)
    for p in range(5):
        assert theoretical_integrated(0.0, p) == 0.0
    assert theoretical_integrated(0.5, 1) == 0.125
    with pytest.raises(ValueError):
        theoretical_integrated(1.5, 1)


def test_alpha_np_examples():
    u01 = distributions.uniform()
    s = Sample([0.25, 0.75])
    assert alpha_np(s, u01, 1, 0.5) == pytest.approx(math.sqrt(2) / 8)
    assert alpha_np(s, u01, 2, -5.0) == 0.0
    rng = np.random.default_rng(2)
    s = Sample(rng.random(15))
    for t in (0.1, 0.4, 0.77):
        classical = math.sqrt(15) * (edf_eval(s, t) - t)
        assert alpha_np(s, u01, 0, t) == pytest.approx(classical)


def test_tilde_breve_examples():
    s = Sample([0.25, 0.75])
    assert tilde_integrated_edf(s, 1, 0.5) == pytest.approx(1 / 4)
    assert breve_integrated_edf(s, 1, 0.5) == 0.0
    for n in range(1, 10):
        s = Sample(np.arange(n, dtype=float))
        assert tilde_integrated_edf(s, 1, n) == pytest.approx(n * (n + 1) / (2 * n * n))
        assert breve_integrated_edf(s, 0, n) == 1.0
        assert tilde_integrated_edf(s, 0, n / 2) == edf_eval(s, n / 2)


def test_breve_tilde_relation():
    rng = np.random.default_rng(3)
    for _ in range(50):
        n = int(rng.integers(1, 11))
        s = Sample(rng.random(n))
        t = float(rng.random())
        fn = edf_eval(s, t)
        for p in (1, 2, 3):
            assert breve_integrated_edf(s, p, t) + fn ** p / n == pytest.approx(
                tilde_integrated_edf(s, p, t), abs=1e-14)


def brute_breve1(s, t):
    # int_{-inf}^t (F_n(t) - F_n(s)) dF_n(s) summed over atoms
    fn_t = edf_eval(s, t)
    return sum(fn_t - edf_eval(s, x) for x in s.values if x <= t) / s.n


def test_poly_family():
    rng = np.random.default_rng(4)
    for _ in range(30):
        n = int(rng.integers(1, 9))
        s = Sample(rng.random(n))
        t = float(rng.random())
        assert poly_integrated_edf(s, [[1.0]], t) == pytest.approx(edf_eval(s, t))
        assert poly_integrated_edf(s, [[0.0], [1.0]], t) == pytest.approx(tilde_integrated_edf(s, 1, t))
        # P(x, y) = y - x
        val = poly_integrated_edf(s, [[0.0, 1.0], [-1.0, 0.0]], t)
        assert val == pytest.approx(brute_breve1(s, t), abs=1e-14)
        assert val == pytest.approx(breve_integrated_edf(s, 1, t), abs=1e-14)
    assert poly_theoretical([[0.0, 1.0], [-1.0, 0.0]], 0.6) == pytest.approx(0.6 ** 2 - 0.6 ** 2 / 2)
    assert tilde_theoretical(0.6, 1) == pytest.approx(0.18)


def test_representation_coefficients():
    assert representation_coefficients(1) == [Fraction(1, 2)]
    # (x+1)(x+2) = 2 + 3x + x^2 over 3!
    assert representation_coefficients(2) == [Fraction(2, 6), Fraction(3, 6)]
    rng = np.random.default_rng(5)
    for p in (1, 2, 3):
        a = representation_coefficients(p)
        bound = float(sum(a))
        for n in (1, 3, 10, 40):
            s = Sample(rng.random(n))
            for t in np.linspace(0, 1, 21):
                fn = edf_eval(s, t)
                exact = integrated_edf(s, p, t).value
                expansion = fn ** (p + 1) / math.factorial(p + 1) + sum(
                    float(a[k - 1]) * fn ** k / n ** (p - k + 1) for k in range(1, p + 1))
                assert exact == pytest.approx(expansion, abs=1e-14)
                assert abs(exact - fn ** (p + 1) / math.factorial(p + 1)) <= bound / n + 1e-15


def test_distribution_free_precursor():
    a = Sample([0.1, 0.3, 0.35, 0.8])
    b = Sample([-7.0, 2.0, 2.5, 100.0])
    for p in range(4):
        assert integrated_edf(a, p, 0.32).value == integrated_edf(b, p, 2.1).value


def test_pooled_identity_differs_for_p1():
    x = Sample([0.1, 0.4, 0.7])
    y = Sample([0.2, 0.5, 0.9])
    pooled = Sample(np.concatenate([x.values, y.values]))
    t = 0.45
    avg = weighted_pooled_integrated([x, y], 1, t)
    # per-sample counts 2 and 1: (3/9 + 1/9)/2 ; pooled count 3 of 6: 6/36
    assert avg == pytest.approx(2 / 9)
    assert integrated_edf(pooled, 1, t).value == pytest.approx(1 / 6)
    assert avg != pytest.approx(integrated_edf(pooled, 1, t).value)
    # p = 0 they agree
    assert weighted_pooled_integrated([x, y], 0, t) == pytest.approx(edf_eval(pooled, t))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.integers(0, 4))
def test_bounds_and_monotonicity(vals, p):
    s = Sample(vals)
    grid = np.concatenate([s.sorted, s.sorted - 1e-9, [s.sorted[0] - 1, s.sorted[-1] + 1]])
    grid.sort()
    prev = -1.0
    for t in grid:
        v = integrated_edf(s, p, t).value
        assert 0.0 <= v <= 1.0
        assert v >= prev
        prev = v
        assert 0.0 <= tilde_integrated_edf(s, p, t) <= 1.0
        assert 0.0 <= breve_integrated_edf(s, p, t) <= 1.0


def test_ingestion(tmp_path):
    txt = "# header\n0.5\n\n 1.25 # trailing\n-3e-1\n"
    s = Sample.from_text(txt)
    assert list(s.values) == [0.5, 1.25, -0.3]
    f = tmp_path / "d.csv"
    f.write_text("id,x\n1,0.1\n2,0.2\n")
    assert list(Sample.read(f, column="x").values) == [0.1, 0.2]
    with pytest.raises(ValueError):
        Sample.from_text("1,5\n")
    with pytest.raises(ValueError):
        Sample.from_csv("a\n1\n", "x")
    with pytest.raises(ValueError):
        Sample([])
