import math
from fractions import Fraction

import pytest

from heiscalc.core import GroupParams, VerticalSplitting
from heiscalc.errors import SceneValidationError
from heiscalc.exterior import InvariantForm
from heiscalc.harness import (
    ConvergenceExperiment,
    HeisenbergCurrent,
    IntegralScene,
    StokesScene,
    approx_convergence,
    boundary_current_check,
    oracle_comparison,
    run_scenes,
    shifted_patch,
    stokes_residual,
    validate_scene,
)
from heiscalc.quadrature import Box, QuadratureSpec
from heiscalc.rumin import make_class
from heiscalc.scalars import Bump, Poly, SmoothScalar
from heiscalc.submanifold import LegendrianPatch, LevelSetPatch


def scalar(nvars, var):
    return SmoothScalar.from_poly(Poly.var(nvars, var))


@pytest.fixture
def segment_scene(h1):
    z = SmoothScalar.zero(1)
    seg = LegendrianPatch(h1, [scalar(1, 1), z, z], Box.of([(0, 1)]), 1, "segment")
    form = make_class(InvariantForm.from_scalar(h1, Poly.var(3, 1)))
    return StokesScene("segment", h1, seg, form, QuadratureSpec(6, 3))


@pytest.fixture
def critical_scene(h1):
    chart = Box.of([(Fraction(-9, 10), Fraction(9, 10)), (-1, 1), (0, 1)])
    patch = LevelSetPatch(h1, [scalar(3, 1)], chart, VerticalSplitting(h1, [1]), 1, patch_id="crit")
    bump = SmoothScalar(3, Poly.const(3, 1), Bump((0, 0, 0), Fraction(7, 10)))
    form = make_class(
        InvariantForm(
            h1,
            1,
            {(1,): bump * scalar(3, 3), (2,): bump},
        )
    )
    z = SmoothScalar.zero(1)
    gamma = LegendrianPatch(h1, [z, scalar(1, 1), z], Box.of([(-1, 1)]), 1, "crit-boundary")
    return StokesScene(
        "critical", h1, patch, form, QuadratureSpec(56, 3), boundary_legendrian=gamma
    )


def test_segment_scene_fundamental_theorem(segment_scene):
    r = stokes_residual(segment_scene)
    assert r.regime == "lowdim"
    assert r.lhs.value == pytest.approx(1.0, abs=1e-14)
    assert r.rhs.value == pytest.approx(1.0, abs=1e-14)
    assert r.residual < 1e-14 and r.passed


def test_segment_flip_boundary(segment_scene):
    r = stokes_residual(segment_scene, flip_boundary=True)
    assert r.residual == pytest.approx(2.0, abs=1e-12)
    assert not r.passed


def test_critical_scene(critical_scene):
    r = stokes_residual(critical_scene)
    assert r.regime == "critical"
    assert r.lies_above is True
    assert abs(r.rhs.value) > 0.1
    assert r.residual < 1e-6


def test_critical_scene_flip(critical_scene):
    r = stokes_residual(critical_scene, flip_boundary=True)
    assert r.residual > 1e-2


def test_orientation_coherence(critical_scene):
    base = stokes_residual(critical_scene)
    flipped = stokes_residual(critical_scene.flipped())
    assert flipped.lhs.value == pytest.approx(-base.lhs.value, rel=1e-12, abs=1e-13)
    assert flipped.rhs.value == pytest.approx(-base.rhs.value, rel=1e-12, abs=1e-13)
    assert flipped.residual == pytest.approx(base.residual, abs=1e-12)


def test_boundary_current_check(segment_scene):
    out = boundary_current_check(segment_scene)
    assert out["passed"]
    assert out["boundary_of_current"]["value"] == pytest.approx(1.0, abs=1e-14)
    # currents API entry point computes the same number
    current = HeisenbergCurrent(segment_scene.patch, segment_scene.spec)
    assert current.boundary_apply(segment_scene.form).value == out["boundary_of_current"]["value"]


def test_zero_form_both_sides_zero(segment_scene, h1):
    zero = make_class(InvariantForm.zero(h1, 0))
    scene = StokesScene("zero", h1, segment_scene.patch, zero, segment_scene.spec)
    r = stokes_residual(scene)
    assert r.lhs.value == 0.0 and r.rhs.value == 0.0


def test_degree_mismatch_rejected(segment_scene, h1):
    bad = make_class(InvariantForm.monomial(h1, (1,), Fraction(1)))
    scene = StokesScene("bad", h1, segment_scene.patch, bad, segment_scene.spec)
    with pytest.raises(SceneValidationError):
        validate_scene(scene)


def test_support_containment_rejected(h1, critical_scene):
    # bump overrunning a non-boundary wall is rejected
    big = SmoothScalar(3, Poly.const(3, 1), Bump((0, 0, 0), Fraction(3, 2)))
    form = make_class(InvariantForm(h1, 1, {(2,): big}))
    scene = StokesScene(
        "bad-support",
        h1,
        critical_scene.patch,
        form,
        critical_scene.spec,
        boundary_legendrian=critical_scene.boundary_legendrian,
    )
    with pytest.raises(SceneValidationError):
        validate_scene(scene)


def test_run_scenes_merges_and_flags(segment_scene, critical_scene):
    reports = run_scenes([critical_scene, segment_scene])
    assert [r["scene_id"] for r in reports] == ["critical", "segment"]
    for r in reports:
        assert r["passed"]
        assert r["flip_raises_residual"] is True


def test_shifted_patch(h1):
    patch = LevelSetPatch(
        h1, [scalar(3, 1)], Box.of([(-1, 1)] * 3), VerticalSplitting(h1, [1]), 1
    )
    shifted = shifted_patch(patch, 4)
    assert shifted.fs[0].evaluate((Fraction(1, 4), 0, 0)) == 0
    assert shifted_patch(patch, math.inf) is patch


def test_approx_convergence_plane(h1):
    patch = LevelSetPatch(
        h1, [scalar(3, 1)], Box.of([(-1, 1)] * 3), VerticalSplitting(h1, [1]), 1, patch_id="conv"
    )
    bump = SmoothScalar(3, Poly.const(3, 1), Bump((0, 0, 0), Fraction(3, 4)))
    form = make_class(InvariantForm(h1, 2, {(2, 3): bump}))
    exp = ConvergenceExperiment(
        "conv", patch, form, (4.0, 16.0, 64.0, 256.0), QuadratureSpec(30, 3), 5e-3
    )
    rep = approx_convergence(exp)
    assert rep.decreasing
    assert rep.gaps[-1] < rep.gaps[0]
    assert rep.passed
    # no shift reproduces the base value exactly
    exp0 = ConvergenceExperiment(
        "conv0", patch, form, (math.inf,), QuadratureSpec(30, 3), 1e-12
    )
    rep0 = approx_convergence(exp0)
    assert rep0.gaps == (0.0,)


def test_oracle_comparison_runner(h1):
    patch = LevelSetPatch(
        h1, [scalar(3, 1)], Box.of([(-1, 1)] * 3), VerticalSplitting(h1, [1]), 1
    )
    form = make_class(
        InvariantForm.monomial(h1, (2, 3), Poly.var(3, 2) ** 2 + Poly.const(3, 1))
    )
    scene = IntegralScene("cmp", h1, patch, form, QuadratureSpec(6, 2))
    out = oracle_comparison(scene)
    assert out["passed"] and out["relative_gap"] < 1e-9
