import cmath
import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polytower.analytic import (CubeSpec, bias, check_s_uniform, cube_sum,
                                cube_vanishing_fraction, expectation, fiber_statistics,
                                fubini_defect, level_histogram, monte_carlo_bias,
                                rank_bias_gap, vanishing_fraction, zero_locus)
from polytower.errors import AcceptanceTooLow, LimitExceeded
from polytower.field import SpaceShape, make_rng
from polytower.multiaffine import MultiAffineMap, MultiLinearMap
from polytower.poly import Poly, random_poly
from polytower.rank import partition_rank
from polytower.tower import Tower

from conftest import all_points


def direct_sum(P, pts, p, t=1):
    w = cmath.exp(2j * cmath.pi / p)
    vals = [P.evaluate(x) for x in pts]
    return sum(w ** (t * v) for v in vals) / len(vals) if vals else 0


def xy(p):
    return Poly(p, 2, {(1, 1): 1})


def x1x2_x3x4(p):
    return Poly(p, 4, {(1, 1, 0, 0): 1, (0, 0, 1, 1): 1})


def test_zero_locus_examples():
    T = Tower.from_polys([Poly.linear(5, [1, 2, 3])])
    assert zero_locus(T).count == 25
    assert zero_locus(Tower.empty("polynomial", SpaceShape(3, (3,)))).count == 27
    T = Tower.from_polys([Poly.linear(3, [1, 0, 0]), Poly(3, 3, {(1, 1, 0): 1, (0, 0, 1): 1})])
    assert zero_locus(T).count == 3
    pts = zero_locus(T).points()
    assert all(x[0] == 0 and x[2] == 0 for x in pts.tolist())


def test_zero_locus_limit():
    with pytest.raises(LimitExceeded):
        zero_locus(Tower.from_polys([Poly.linear(3, [1] * 8)]), limit=100)


def test_histogram_examples():
    assert level_histogram(xy(3)).tolist() == [5, 2, 2]
    assert level_histogram(Poly.zero(5, 2)).tolist() == [25, 0, 0, 0, 0]
    assert level_histogram(x1x2_x3x4(3)).tolist() == [33, 24, 24]
    # convolution oracle
    a = [5, 2, 2]
    conv = [sum(a[i] * a[(k - i) % 3] for i in range(3)) for k in range(3)]
    assert conv == [33, 24, 24]


def test_bias_examples():
    r = bias(xy(3))
    assert abs(r.bias - 1 / 3) < 1e-12
    assert abs(r.bias - abs(direct_sum(xy(3), all_points(3, 2), 3))) < 1e-12
    assert abs(bias(x1x2_x3x4(3)).bias - 1 / 9) < 1e-12
    T = Tower.from_polys([Poly.linear(5, [1, 1])])
    assert bias(Poly.constant(5, 2, 3), T).bias == 1.0


def test_empty_domain_convention():
    T = Tower.from_polys([Poly.constant(3, 2, 1)])
    r = bias(xy(3), T)
    assert r.bias == 0.0 and r.histogram.domain_size == 0
    assert vanishing_fraction(xy(3), T) == 0


@given(st.integers(0, 10**6))
def test_bias_report_invariants(seed):
    rng = make_rng(seed)
    P = random_poly(5, 2, 3, rng)
    T = Tower.from_polys([random_poly(5, 2, 1, rng)])
    r = bias(P, T)
    assert r.histogram.domain_size == zero_locus(T).count
    assert abs(r.bias ** 2 - r.real_part ** 2 - r.imag_part ** 2) < 1e-10
    Z = [x for x in all_points(5, 2) if T.maps()[0].evaluate(x) == 0]
    assert abs(complex(r.real_part, r.imag_part) - direct_sum(P, Z, 5)) < 1e-9


def test_bias_independent_of_character_for_multilinear():
    for seed in range(5):
        sh = SpaceShape(5, (2, 2))
        m = MultiLinearMap.random(sh, (0, 1), make_rng(seed))
        vals = [bias(m, t=t).bias for t in range(1, 5)]
        assert max(vals) - min(vals) < 1e-12


def test_bias_well_defined_per_character_for_polys():
    P = Poly(5, 1, {(3,): 1})
    for t in range(1, 5):
        r = bias(P, t=t)
        assert 0 <= r.bias <= 1
        assert abs(r.bias - abs(direct_sum(P, all_points(5, 1), 5, t))) < 1e-12


def test_parallel_counts_identical():
    P = random_poly(3, 9, 3, make_rng(2))
    T = Tower.from_polys([random_poly(3, 9, 2, make_rng(3))])
    a = level_histogram(P, T, threads=1).tolist()
    b = level_histogram(P, T, threads=4).tolist()
    assert a == b


def test_monte_carlo():
    mc = monte_carlo_bias(xy(3), samples=100_000, seed=1)
    assert abs(mc.bias - 1 / 3) <= mc.half_width
    again = monte_carlo_bias(xy(3), samples=100_000, seed=1)
    assert again.histogram == mc.histogram
    with pytest.raises(ValueError):
        monte_carlo_bias(xy(3), samples=0)
    assert monte_carlo_bias(Poly.constant(3, 2, 2), samples=1000).bias == pytest.approx(1.0)
    T = Tower.from_polys([Poly.linear(3, [1] * 2 + [0] * 10) + Poly.constant(3, 12, i)
                          for i in range(1)] + [Poly.linear(3, [0] * 2 + [1] * 10)])
    with pytest.raises(AcceptanceTooLow):
        monte_carlo_bias(Poly.zero(3, 12), T, samples=10, floor=0.5)


def test_s_uniform_examples():
    rows = [[1, 0, 0, 0], [0, 1, 1, 0]]
    T = Tower.from_polys([Poly.linear(3, r) for r in rows])
    rep = check_s_uniform(T, 10)
    assert rep.defect == 0 and rep.passed
    dup = Tower.from_polys([Poly.linear(3, [1, 0])] * 2)
    rep = check_s_uniform(dup, 0)
    assert rep.count == 3 and rep.defect == 2 and not rep.passed
    quad = Tower.from_polys([Poly(5, 6, {tuple(2 if j == i else 0 for j in range(6)): 1
                                         for i in range(6)})])
    rep = check_s_uniform(quad, 2)
    # classical count of x1^2+...+x6^2 = 0 over F_5 (even dim, discriminant a square)
    assert rep.count == 5 ** 5 + 4 * 5 ** 2
    assert rep.defect <= Fraction(1, 25) and rep.passed


def test_fiber_examples():
    st = fiber_statistics([Poly.linear(3, [1, 0])])
    assert st.sizes == [3, 3, 3] and st.deviation == 0
    st = fiber_statistics([x1x2_x3x4(3)])
    assert st.sizes == [33, 24, 24] and st.deviation == Fraction(3, 8)
    P = Poly(3, 6, {(1, 1, 0, 0, 0, 0): 1, (0, 0, 1, 1, 0, 0): 1, (0, 0, 0, 0, 1, 1): 1})
    st = fiber_statistics([P])
    brute = [0, 0, 0]
    for x in all_points(3, 6):
        brute[P.evaluate(x)] += 1
    assert st.sizes == brute and st.deviation < Fraction(1, 3)
    assert fiber_statistics([Poly.constant(3, 1, 1)]).deviation == float("inf")


def test_fubini_examples():
    sh = SpaceShape(3, (2, 2))
    assert fubini_defect(Tower.empty("multiaffine", sh), [0], lambda X: np.ones(len(X))).defect == 0
    Q = MultiLinearMap(sh, (0, 1), {(0, 0): 1, (1, 1): 2}).as_affine()
    T = Tower.from_maps("multiaffine", sh, [Q])
    g = MultiLinearMap(sh, (0, 1), {(0, 0): 1})
    rep = fubini_defect(T, [0], g)
    # double-loop oracle
    w = cmath.exp(2j * cmath.pi / 3)
    Z = [x for x in all_points(3, 4) if Q.evaluate(x) == 0]
    lhs = sum(w ** g.evaluate(x) for x in Z) / len(Z)
    inner = []
    for y in all_points(3, 2):
        fib = [y + z for z in all_points(3, 2) if Q.evaluate(y + z) == 0]
        inner.append(sum(w ** g.evaluate(x) for x in fib) / len(fib) if fib else 0)
    rhs = sum(inner) / len(inner)
    assert abs(rep.defect - abs(lhs - rhs)) < 1e-12
    one = fubini_defect(T, [0], lambda X: np.ones(len(X)))
    assert one.defect < 1e-12  # every derived locus is nonempty here


def test_rank_bias_examples():
    sh = SpaceShape(3, (1, 1))
    P = MultiLinearMap(sh, (0, 1), {(0, 0): 1})
    T = Tower.empty("multilinear", sh)
    rep = rank_bias_gap(P, T, 1, 5)
    assert rep.real_part == pytest.approx(1 / 3) and abs(rep.imag_part) < 1e-12
    assert rep.passed and not rep.caveat
    rep = rank_bias_gap(MultiLinearMap(sh, (0, 1)), T, 0, 5)
    assert rep.real_part == pytest.approx(1.0)


def test_rank_bias_random_bilinear():
    sh = SpaceShape(3, (3, 3))
    T = Tower.empty("multilinear", sh)
    rng = make_rng(2024)
    for _ in range(200):
        P = MultiLinearMap.random(sh, (0, 1), rng)
        r = partition_rank(P).upper
        rep = rank_bias_gap(P, T, r, 20)
        assert rep.passed


def test_cube_sum_examples():
    f = Poly(5, 1, {(2,): 1})
    assert cube_sum(f, (0,), [(1,), (1,)]) == 2
    # m = 1 is a single difference; the alternating sign puts f(u) first
    d = cube_sum(f, CubeSpec((3,), ((2,),)))
    assert d == (f.evaluate((3,)) - f.evaluate((0,))) % 5
    assert (-d) % 5 == f.discrete_derivative((2,)).evaluate((3,))
    rng = make_rng(6)
    for _ in range(20):
        g = random_poly(5, 2, 2, rng)
        u = tuple(int(v) for v in rng.integers(0, 5, 2))
        vs = [tuple(int(v) for v in rng.integers(0, 5, 2)) for _ in range(3)]
        assert cube_sum(g, u, vs) == 0


def test_cube_vanishing_fraction_examples():
    f = Poly(2, 2, {(1, 0): 1, (0, 1): 1})
    assert cube_vanishing_fraction(f, None, 2).fraction == 0
    g = Poly(2, 2, {(1, 1): 1})
    rep = cube_vanishing_fraction(g, None, 2)
    # brute force over all (u, v1, v2)
    bad = 0
    for c in all_points(2, 6):
        bad += cube_sum(g, c[:2], [c[2:4], c[4:]]) != 0
    assert rep.bad == bad and rep.fraction > 0
    assert cube_vanishing_fraction(g, np.zeros(4, dtype=bool), 2).fraction == 0


def test_vanishing_fraction_examples():
    T = Tower.from_polys([Poly.linear(3, [1, 0])])
    assert vanishing_fraction(Poly.linear(3, [0, 1]), T) == Fraction(2, 3)
    assert vanishing_fraction(Poly.constant(3, 2, 1), T) == 1
    assert vanishing_fraction(Poly(3, 2, {(1, 1): 1}), T) == 0
