import math
import random
from fractions import Fraction

import pytest

from heiscalc.core import (
    GroupParams,
    HomogeneousDistance,
    Point,
    VerticalSplitting,
    dilate,
    frame_at,
    group_mul,
    inverse,
    pansu_differential,
    pi_norm,
    pi_p,
)
from heiscalc.errors import DimensionMismatchError, HeisCalcError
from heiscalc.scalars import Poly, SmoothScalar

from conftest import rand_float_point, rand_fraction, rand_point


def test_group_law_golden(h1):
    p = Point.of(h1, [1], [0], 0)
    q = Point.of(h1, [0], [1], 0)
    assert group_mul(p, q).coords() == (1, 1, Fraction(1, 2))


def test_identity_and_inverse(h1):
    p = Point.of(h1, [Fraction(2, 3)], [Fraction(-1, 5)], Fraction(7, 2))
    e = Point.origin(h1)
    assert group_mul(p, e) == p
    assert group_mul(p, inverse(p)) == e
    assert inverse(inverse(p)) == p


def test_inverse_golden(h1):
    assert inverse(Point.of(h1, [1], [2], 3)).coords() == (-1, -2, -3)
    assert inverse(Point.origin(h1)) == Point.origin(h1)


def test_dilation_golden(h1):
    assert dilate(2, Point.of(h1, [1], [1], 1)).coords() == (2, 2, 4)
    p = Point.of(h1, [Fraction(1, 3)], [2], Fraction(-5, 7))
    assert dilate(1, p) == p
    with pytest.raises(HeisCalcError):
        dilate(0, p)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_group_axioms_exact(n):
    rng = random.Random(100 + n)
    params = GroupParams(n)
    e = Point.origin(params)
    for _ in range(200):
        p, q, r = (rand_point(rng, params) for _ in range(3))
        assert group_mul(group_mul(p, q), r) == group_mul(p, group_mul(q, r))
        assert group_mul(p, e) == p and group_mul(e, p) == p
        assert group_mul(p, inverse(p)) == e


@pytest.mark.parametrize("n", [1, 2, 3])
def test_dilation_homomorphism_exact(n):
    rng = random.Random(200 + n)
    params = GroupParams(n)
    for _ in range(100):
        p, q = rand_point(rng, params), rand_point(rng, params)
        lam = Fraction(rng.randint(1, 9), rng.randint(1, 5))
        assert dilate(lam, group_mul(p, q)) == group_mul(dilate(lam, p), dilate(lam, q))


def test_distance_golden(h1):
    d_inf = HomogeneousDistance("infinity")
    d_k = HomogeneousDistance("koranyi")
    assert d_inf(Point.origin(h1), Point.of(h1, [0], [0], 1)) == 2.0
    assert d_k(Point.origin(h1), Point.of(h1, [1], [0], 0)) == 1.0


@pytest.mark.parametrize("kind", ["infinity", "koranyi"])
@pytest.mark.parametrize("n", [1, 2])
def test_distance_invariances(kind, n):
    rng = random.Random(hash((kind, n)) % 2**31)
    params = GroupParams(n)
    d = HomogeneousDistance(kind)
    for _ in range(100):
        p, q, r = (rand_float_point(rng, params) for _ in range(3))
        assert abs(d(group_mul(r, p), group_mul(r, q)) - d(p, q)) <= 1e-12 * max(1.0, d(p, q))
        lam = rng.uniform(0.1, 4.0)
        assert abs(d(dilate(lam, p), dilate(lam, q)) - lam * d(p, q)) <= 1e-12 * max(
            1.0, lam * d(p, q)
        )


@pytest.mark.parametrize("kind", ["infinity", "koranyi"])
def test_rotational_invariance(kind):
    # the norm may only depend on |(x, y)| and t
    rng = random.Random(11)
    params = GroupParams(2)
    d = HomogeneousDistance(kind)
    for _ in range(100):
        p = rand_float_point(rng, params)
        h = list(p.x + p.y)
        # random Givens rotations of the horizontal 2n-vector
        for _ in range(3):
            i, j = rng.sample(range(4), 2)
            a = rng.uniform(0, 2 * math.pi)
            hi, hj = h[i], h[j]
            h[i] = math.cos(a) * hi - math.sin(a) * hj
            h[j] = math.sin(a) * hi + math.cos(a) * hj
        q = Point.of(params, h[:2], h[2:], p.t, exact=False)
        assert abs(d.norm(p) - d.norm(q)) <= 1e-12 * max(1.0, d.norm(p))


def test_bilipschitz_bracket():
    # sampled ratio d_inf/d_K stays inside an empirical bracket
    rng = random.Random(12)
    params = GroupParams(1)
    d_inf, d_k = HomogeneousDistance("infinity"), HomogeneousDistance("koranyi")
    ratios = []
    for _ in range(500):
        p = rand_float_point(rng, params)
        if d_k.norm(p) > 1e-9:
            ratios.append(d_inf.norm(p) / d_k.norm(p))
    assert 0.5 < min(ratios) and max(ratios) < 1.5
    assert max(ratios) <= 1.0 + 1e-12  # for these two norms the ratio never exceeds 1


@pytest.mark.parametrize("n", [1, 2, 3])
def test_pi_p_additivity_exact(n):
    rng = random.Random(300 + n)
    params = GroupParams(n)
    for _ in range(200):
        a, b, p = (rand_point(rng, params) for _ in range(3))
        pab = pi_p(p, group_mul(a, b))
        psum = tuple(u + v for u, v in zip(pi_p(p, a), pi_p(p, b)))
        assert pab == psum


def test_pi_p_trivial(h1):
    p = Point.of(h1, [1], [0], 5)
    assert pi_p(Point.origin(h1), p) == (1, 0)
    assert pi_p(p, Point.origin(h1)) == (0, 0)


@pytest.mark.parametrize("kind", ["infinity", "koranyi"])
def test_metric_lower_bound_sampled(kind):
    # inf d(a,b)/|pi_p(a) - pi_p(b)| stays bounded away from 0
    rng = random.Random(13)
    params = GroupParams(1)
    d = HomogeneousDistance(kind)
    worst = math.inf
    for _ in range(500):
        a, b = rand_float_point(rng, params), rand_float_point(rng, params)
        diff = tuple(u - v for u, v in zip(pi_p(a, a), pi_p(a, b)))
        denom = pi_norm(diff)
        if denom > 1e-9:
            worst = min(worst, d(a, b) / denom)
    assert worst >= 0.99


def test_frame_golden(h1):
    assert frame_at(Point.origin(h1))[0] == (1, 0, 0)
    assert frame_at(Point.of(h1, [0], [2], 0))[0] == (1, 0, -1)
    assert frame_at(Point.of(h1, [3], [0], 0))[1] == (0, 1, Fraction(3, 2))


def test_split_golden(h1):
    s = VerticalSplitting(h1, [1])
    w, v = s.split(Point.of(h1, [1], [1], 0))
    assert v.coords() == (1, 0, 0)
    assert w.coords() == (0, 1, Fraction(1, 2))
    assert group_mul(w, v) == Point.of(h1, [1], [1], 0)
    # p already in W / in V
    pw = Point.of(h1, [0], [Fraction(2, 3)], Fraction(1, 7))
    w2, v2 = s.split(pw)
    assert w2 == pw and v2 == Point.origin(h1)
    pv = Point.of(h1, [Fraction(5, 4)], [0], 0)
    w3, v3 = s.split(pv)
    assert v3 == pv and w3 == Point.origin(h1)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_split_reconstructs(n):
    rng = random.Random(400 + n)
    params = GroupParams(n)
    v_idx = [1] if n == 1 else [1, n + 2]
    s = VerticalSplitting(params, v_idx)
    for _ in range(100):
        p = rand_point(rng, params)
        w, v = s.split(p)
        assert group_mul(w, v) == p
        assert all(w.coords()[i - 1] == 0 for i in s.v_indices)


def test_splitting_rejects_conjugate_pair(h1):
    with pytest.raises(HeisCalcError):
        VerticalSplitting(h1, [1, 2])


def test_pansu_golden(h1):
    dim = h1.dim
    f_t = SmoothScalar.from_poly(Poly.var(dim, 3))
    val = pansu_differential([f_t], Point.of(h1, [1], [0], 0), Point.of(h1, [0], [1], 0))
    assert val == [Fraction(1, 2)]
    f_x = SmoothScalar.from_poly(Poly.var(dim, 1))
    rng = random.Random(5)
    for _ in range(20):
        p, q = rand_point(rng, h1), rand_point(rng, h1)
        assert pansu_differential([f_x], p, q) == [q.x[0]]


def test_pansu_group_additivity(h1):
    rng = random.Random(6)
    dim = h1.dim
    fs = [SmoothScalar.from_poly(Poly.var(dim, 3) + Poly.var(dim, 1) * Poly.var(dim, 2))]
    for _ in range(50):
        p, q, r = (rand_point(rng, h1) for _ in range(3))
        lhs = pansu_differential(fs, p, group_mul(q, r))[0]
        rhs = pansu_differential(fs, p, q)[0] + pansu_differential(fs, p, r)[0]
        assert lhs == rhs


def test_dimension_mismatch_errors(h1, h2):
    with pytest.raises(DimensionMismatchError):
        group_mul(Point.origin(h1), Point.origin(h2))
    with pytest.raises(DimensionMismatchError):
        Point.of(h1, [1, 2], [0], 0)
