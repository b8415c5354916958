import math
import random
from fractions import Fraction

import numpy as np
import pytest

from heiscalc.core import GroupParams, Point, VerticalSplitting
from heiscalc.errors import DegreeMismatchError, MembershipError
from heiscalc.exterior import InvariantForm
from heiscalc.measure import (
    area_factor,
    area_factor_many,
    cnk_estimate,
    euclidean_oracle_integral,
    integrate_lowcodim,
    integrate_lowcodim_spherical,
    integrate_lowdim,
    point_current,
    slice_volume,
    _mc_slice_volume,
)
from heiscalc.quadrature import Box, QuadratureSpec
from heiscalc.scalars import Poly, SmoothScalar
from heiscalc.submanifold import LegendrianPatch, LevelSetPatch

from test_scalars import rand_poly


def scalar(nvars, var):
    return SmoothScalar.from_poly(Poly.var(nvars, var))


@pytest.fixture
def plane(h1):
    return LevelSetPatch(
        h1, [scalar(3, 1)], Box.of([(-1, 1)] * 3), VerticalSplitting(h1, [1]), 1
    )


@pytest.fixture
def tilted(h1):
    return LevelSetPatch(
        h1, [scalar(3, 1) - scalar(3, 2)], Box.of([(-1, 1)] * 3), VerticalSplitting(h1, [1]), 1
    )


SPEC = QuadratureSpec(6, 3)


def test_area_factor_golden(plane, tilted):
    assert abs(area_factor(plane, (0.2, -0.5)) - 1.0) < 1e-14
    assert abs(area_factor(tilted, (0.2, -0.5)) - math.sqrt(2)) < 1e-14


def test_area_factor_at_least_one(h1):
    # Cauchy-Binet: the full wedge norm dominates any single minor
    rng = random.Random(9)
    f = SmoothScalar.from_poly(
        Poly.var(3, 1) + rand_poly(rng, 3, 2, 2) * Poly.var(3, 2)
    )
    patch = LevelSetPatch(
        h1, [f], Box.of([(-0.3, 0.3)] * 3), VerticalSplitting(h1, [1]), 1
    )
    xi = np.array([[rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)] for _ in range(20)])
    pts = patch.solve_graph(xi)
    factors = area_factor_many(patch, pts)
    assert np.all(factors >= 1.0 - 1e-12)


def test_integrate_lowcodim_golden(plane):
    y = Poly.var(3, 2)
    odd = InvariantForm.monomial(plane.params, (2, 3), y)
    sq = InvariantForm.monomial(plane.params, (2, 3), y * y)
    zero_pair = InvariantForm.monomial(plane.params, (1, 3), Fraction(1))
    assert abs(integrate_lowcodim(plane, odd, SPEC).value) < 1e-14
    assert abs(integrate_lowcodim(plane, sq, SPEC).value - 4 / 3) < 1e-13
    assert abs(integrate_lowcodim(plane, zero_pair, SPEC).value) < 1e-15


def test_integrate_lowcodim_checks(plane):
    bad_degree = InvariantForm.monomial(plane.params, (1,), Fraction(1))
    with pytest.raises(DegreeMismatchError):
        integrate_lowcodim(plane, bad_degree, SPEC)
    not_in_j = InvariantForm.monomial(plane.params, (1, 2), Fraction(1))
    with pytest.raises(MembershipError):
        integrate_lowcodim(plane, not_in_j, SPEC)


def test_current_linearity(plane):
    rng = random.Random(10)
    om1 = InvariantForm(
        plane.params,
        2,
        {(1, 3): SmoothScalar.from_poly(rand_poly(rng, 3, 3, 2)),
         (2, 3): SmoothScalar.from_poly(rand_poly(rng, 3, 3, 2))},
    )
    om2 = InvariantForm(
        plane.params,
        2,
        {(2, 3): SmoothScalar.from_poly(rand_poly(rng, 3, 3, 2))},
    )
    a, b = Fraction(2, 3), Fraction(-5, 4)
    lhs = integrate_lowcodim(plane, om1.scale(a) + om2.scale(b), SPEC).value
    rhs = float(a) * integrate_lowcodim(plane, om1, SPEC).value + float(
        b
    ) * integrate_lowcodim(plane, om2, SPEC).value
    assert abs(lhs - rhs) < 1e-10


def test_spherical_scaling(plane):
    y = Poly.var(3, 2)
    om = InvariantForm.monomial(plane.params, (2, 3), y * y)
    base = integrate_lowcodim(plane, om, SPEC)
    sph = integrate_lowcodim_spherical(plane, om, SPEC, 0.874)
    assert sph.value == base.value * 0.874
    assert sph.trace == tuple(v * 0.874 for v in base.trace)


def test_integrate_lowdim_golden(h1):
    z = SmoothScalar.zero(1)
    s = scalar(1, 1)
    curve = LegendrianPatch(h1, [s, z, z], Box.of([(0, 1)]), 1)
    dx = InvariantForm.monomial(h1, (1,), Fraction(1))
    theta = InvariantForm.monomial(h1, (3,), Fraction(1))
    assert abs(integrate_lowdim(curve, dx, SPEC).value - 1.0) < 1e-14
    assert integrate_lowdim(curve, theta, SPEC).value == 0.0


def test_lowdim_representative_independence(h1):
    # forms with a theta factor or a dtheta factor integrate to zero over Legendrians
    rng = random.Random(11)
    z = SmoothScalar.zero(1)
    s = scalar(1, 1)
    curve = LegendrianPatch(h1, [s, z, z], Box.of([(0, 1)]), 1)
    lam_theta = InvariantForm.monomial(h1, (3,), rand_poly(rng, 3, 3, 2))
    assert abs(integrate_lowdim(curve, lam_theta, SPEC).value) < 1e-10


def test_point_current(h1):
    x = InvariantForm.from_scalar(h1, Poly.var(3, 1))
    pts = [
        (Point.of(h1, [1], [0], 0), 1),
        (Point.of(h1, [0], [0], 0), -1),
    ]
    assert point_current(pts, x) == 1.0
    with pytest.raises(DegreeMismatchError):
        point_current(pts, InvariantForm.monomial(h1, (1,), Fraction(1)))


@pytest.mark.parametrize("which", ["plane", "tilted"])
def test_oracle_equivalence_random_forms(which, plane, tilted):
    patch = {"plane": plane, "tilted": tilted}[which]
    rng = random.Random(12)
    for _ in range(4):
        om = InvariantForm(
            patch.params,
            2,
            {
                (1, 3): SmoothScalar.from_poly(rand_poly(rng, 3, 3, 2)),
                (2, 3): SmoothScalar.from_poly(rand_poly(rng, 3, 3, 2)),
            },
        )
        a = integrate_lowcodim(patch, om, SPEC).value
        b = euclidean_oracle_integral(patch, om, SPEC).value
        assert abs(a - b) <= 1e-8 * max(1.0, abs(a))


def test_oracle_linearity(plane):
    rng = random.Random(13)
    om1 = InvariantForm.monomial(plane.params, (2, 3), rand_poly(rng, 3, 3, 2))
    om2 = InvariantForm.monomial(plane.params, (1, 3), rand_poly(rng, 3, 3, 2))
    a, b = 0.375, -1.25
    lhs = euclidean_oracle_integral(
        plane, om1.scale(Fraction(3, 8)) + om2.scale(Fraction(-5, 4)), SPEC
    ).value
    rhs = a * euclidean_oracle_integral(plane, om1, SPEC).value + b * euclidean_oracle_integral(
        plane, om2, SPEC
    ).value
    assert abs(lhs - rhs) < 1e-10
    zero = InvariantForm.zero(plane.params, 2)
    assert euclidean_oracle_integral(plane, zero, SPEC).value == 0.0


# -- the normalization constant ------------------------------------------------


def test_slice_volume_dinf_closed_form(h1):
    split = VerticalSplitting(h1, [1])
    # slice area sqrt(1 - x_p^2), independent of the other center coordinates
    for xp, yp, tp in ((0.0, 0.0, 0.0), (0.5, 0.3, -0.2), (0.8, -0.7, 0.4)):
        v = slice_volume(h1, split, "infinity", (xp, yp, tp), panels=16, order=8)
        assert abs(v - math.sqrt(1 - xp * xp)) < 1e-6


def test_slice_volume_koranyi_suboracle(h1):
    import scipy.special as sp

    split = VerticalSplitting(h1, [1])
    v = slice_volume(h1, split, "koranyi", (0.0, 0.0, 0.0), panels=24, order=12)
    ref = sp.beta(0.25, 1.5) / 4  # int_0^1 sqrt(1 - y^4) dy
    assert abs(v - ref) < 1e-4


def test_cnk_estimator_dinf(h1):
    split = VerticalSplitting(h1, [1])
    rep = cnk_estimate(h1, 1, "infinity", split, grid_level=2, refine_rounds=6, panels=12, order=8)
    assert abs(rep.constant - 1.0) < 1e-2
    assert rep.interval[0] <= rep.constant <= rep.interval[1]
    assert abs(rep.argmax[0]) < 1e-6  # supremum found on the x = 0 slice


def test_cnk_grid_monotone(h1):
    split = VerticalSplitting(h1, [1])

    def sup_on_level(level):
        from heiscalc.measure import _ball_grid

        return max(
            slice_volume(h1, split, "infinity", p, panels=8, order=6)
            for p in _ball_grid(h1, "infinity", level)
        )

    sups = [sup_on_level(level) for level in (0, 1, 2)]
    assert sups[0] <= sups[1] + 1e-15 <= sups[2] + 2e-15


def test_mc_slice_reproducible(h1):
    split = VerticalSplitting(h1, [1])
    v1, e1 = _mc_slice_volume(h1, split, "infinity", (0.0, 0.0, 0.0), 20000, seed=42)
    v2, e2 = _mc_slice_volume(h1, split, "infinity", (0.0, 0.0, 0.0), 20000, seed=42)
    assert v1 == v2 and e1 == e2
    assert abs(v1 - 1.0) < 5 * e1 + 0.02
