"""End-to-end verification of the Stokes identity and approximation experiments.

A scene bundles a patch with boundary data, a compactly supported test form
of degree dim(S) - 1, and a quadrature spec.  The harness computes

    LHS = [[S]](d_c omega)        RHS = [[boundary S]](omega)

with the induced boundary orientation, and reports both values, their
residual and the refinement traces.  Three regimes are dispatched: low
dimension (Legendrian patch, classical boundary faces), critical codimension
(level-set patch with a parametric Legendrian boundary, d_c = D), and
non-critical low codimension (level-set patch cut by an extra function).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .core import GroupParams
from .errors import HeisCalcError, SceneValidationError
from .exterior import InvariantForm
from .measure import integrate_lowcodim, integrate_lowdim, point_current
from .quadrature import CurrentValue, QuadratureSpec
from .rumin import RuminClass, d_c
from .scalars import SmoothScalar
from .submanifold import (
    LegendrianPatch,
    LevelSetPatch,
    induced_boundary_orientation,
)

DEFAULT_RESIDUAL_TOL = 1e-6


@dataclass(frozen=True)
class StokesScene:
    """One verification job: patch + boundary data + test form + quadrature."""

    scene_id: str
    params: GroupParams
    patch: LevelSetPatch | LegendrianPatch
    form: RuminClass
    spec: QuadratureSpec
    boundary_legendrian: LegendrianPatch | None = None
    distance: str = "infinity"
    tolerance: float = DEFAULT_RESIDUAL_TOL

    @property
    def patch_dim(self) -> int:
        if isinstance(self.patch, LegendrianPatch):
            return self.patch.m
        return self.patch.dim

    def flipped(self) -> "StokesScene":
        patch = self.patch.with_orientation(-self.patch.orientation_sign)
        return replace(self, patch=patch)


@dataclass(frozen=True)
class StokesReport:
    scene_id: str
    lhs: CurrentValue
    rhs: CurrentValue
    residual: float
    tolerance: float
    passed: bool
    regime: str
    boundary_flipped: bool = False
    lies_above: bool | None = None

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "regime": self.regime,
            "lhs": self.lhs.to_json(),
            "rhs": self.rhs.to_json(),
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "boundary_flipped": self.boundary_flipped,
            "lies_above": self.lies_above,
        }


def _constant_current(value: float, levels: int) -> CurrentValue:
    return CurrentValue(value, (value,) * levels, 0.0)


def _scene_regime(scene: StokesScene) -> str:
    if isinstance(scene.patch, LegendrianPatch):
        return "lowdim"
    return "critical" if scene.patch.is_critical() else "noncritical"


def validate_scene(scene: StokesScene) -> None:
    """Scene invariants: degree, regime and compact-support containment."""
    m = scene.patch_dim
    if scene.form.degree != m - 1:
        raise SceneValidationError(
            f"{scene.scene_id}: form degree {scene.form.degree} != dim(S) - 1 = {m - 1}"
        )
    regime = _scene_regime(scene)
    if regime == "critical" and scene.boundary_legendrian is None:
        raise SceneValidationError(
            f"{scene.scene_id}: critical scenes need a parametric Legendrian boundary"
        )
    _check_support(scene)
    if scene.boundary_legendrian is not None:
        from .submanifold import require_legendrian

        try:
            require_legendrian(scene.boundary_legendrian)
        except HeisCalcError as exc:
            raise SceneValidationError(str(exc)) from exc
    if isinstance(scene.patch, LevelSetPatch):
        _check_noncharacteristic(scene.scene_id, scene.patch)


def _check_noncharacteristic(scene_id: str, patch: LevelSetPatch, per_axis: int = 4) -> None:
    """Coarse sweep of the graph: solve failures or degenerate wedges fail the scene."""
    from .measure import area_factor_many
    from .submanifold import _box_grid

    try:
        grid = _box_grid(patch.w_box(), per_axis)
        pts = patch.solve_graph(grid)
        area_factor_many(patch, pts)
    except HeisCalcError as exc:
        raise SceneValidationError(f"{scene_id}: characteristic-point sweep failed: {exc}") from exc
    if patch.boundary_fn is not None:
        # the chart must carve out the f_{k+1} > 0 side of the patch
        cut = patch.boundary_fn.eval_many(pts)
        if cut.min() < -1e-9:
            raise SceneValidationError(
                f"{scene_id}: chart contains points with negative cut function "
                f"(min {cut.min():.3e}); restrict the chart to the positive side"
            )


def _form_bumps(form: InvariantForm):
    return [c.bump for c in form.terms.values() if c.bump is not None]


def _check_support(scene: StokesScene) -> None:
    """Bump support must clear every chart wall except those holding the boundary."""
    bumps = _form_bumps(scene.form.representative)
    if not bumps:
        return  # polynomial test form: the scene owner asserts compact closure
    if isinstance(scene.patch, LegendrianPatch):
        return
    chart = scene.patch.chart
    boundary_walls = _boundary_walls(scene)
    for bump in bumps:
        center = [float(c) for c in bump.center]
        radius = float(bump.radius)
        if not chart.contains(center):
            raise SceneValidationError(f"{scene.scene_id}: bump center outside chart")
        for axis in range(chart.dim):
            lo, hi = chart.axis_interval(axis)
            for wall, side in ((lo, "lo"), (hi, "hi")):
                if (axis, side) in boundary_walls:
                    continue
                if abs(center[axis] - wall) < radius:
                    raise SceneValidationError(
                        f"{scene.scene_id}: bump support reaches chart wall "
                        f"(axis {axis}, {side})"
                    )


def _boundary_walls(scene: StokesScene) -> set[tuple[int, str]]:
    """Chart walls touched by the declared boundary (exempt from support checks)."""
    walls: set[tuple[int, str]] = set()
    pts: list[np.ndarray] = []
    if scene.boundary_legendrian is not None:
        from .submanifold import _box_grid

        grid = _box_grid(scene.boundary_legendrian.box, 5)
        pts = list(scene.boundary_legendrian.eval_many(grid))
    elif isinstance(scene.patch, LevelSetPatch) and scene.patch.boundary_fn is not None:
        from .submanifold import _boundary_samples

        pts = [np.array([float(v) for v in p.coords()]) for p in _boundary_samples(scene.patch)]
    chart = scene.patch.chart if isinstance(scene.patch, LevelSetPatch) else None
    if chart is None:
        return walls
    tol = 1e-9
    for row in pts:
        for axis in range(chart.dim):
            lo, hi = chart.axis_interval(axis)
            if abs(row[axis] - lo) <= tol:
                walls.add((axis, "lo"))
            if abs(row[axis] - hi) <= tol:
                walls.add((axis, "hi"))
    return walls


def stokes_residual(scene: StokesScene, flip_boundary: bool = False) -> StokesReport:
    """Compute both sides of the Stokes identity for one scene."""
    validate_scene(scene)
    regime = _scene_regime(scene)
    omega = scene.form
    d_omega = d_c(omega)
    lies_above = None

    if regime == "lowdim":
        patch: LegendrianPatch = scene.patch
        lhs = integrate_lowdim(patch, d_omega, scene.spec)
        rhs = _lowdim_boundary_value(patch, omega, scene.spec, flip_boundary)
    elif regime == "critical":
        patch = scene.patch
        bo = induced_boundary_orientation(patch, scene.boundary_legendrian)
        lies_above = bo.lies_above
        gamma = bo.boundary_legendrian
        if flip_boundary:
            gamma = gamma.with_orientation(-gamma.orientation_sign)
        lhs = integrate_lowcodim(patch, d_omega, scene.spec)
        rhs = integrate_lowdim(gamma, omega, scene.spec)
    else:
        patch = scene.patch
        bo = induced_boundary_orientation(patch)
        bpatch = bo.boundary_patch
        if flip_boundary:
            bpatch = bpatch.with_orientation(-bpatch.orientation_sign)
        lhs = integrate_lowcodim(patch, d_omega, scene.spec)
        rhs = integrate_lowcodim(bpatch, omega, scene.spec)

    residual = abs(lhs.value - rhs.value)
    return StokesReport(
        scene_id=scene.scene_id,
        lhs=lhs,
        rhs=rhs,
        residual=residual,
        tolerance=scene.tolerance,
        passed=residual < scene.tolerance and not flip_boundary,
        regime=regime,
        boundary_flipped=flip_boundary,
        lies_above=lies_above,
    )


def _lowdim_boundary_value(
    patch: LegendrianPatch, omega: RuminClass, spec: QuadratureSpec, flip: bool
) -> CurrentValue:
    sign = -1 if flip else 1
    pieces = patch.faces()
    if patch.m == 1:
        value = point_current([(p, sign * s) for p, s in pieces], omega)
        return _constant_current(value, spec.levels)
    total = None
    for face, s in pieces:
        val = integrate_lowdim(face, omega, spec)
        scaled = tuple(sign * s * v for v in val.trace)
        total = scaled if total is None else tuple(a + b for a, b in zip(total, scaled))
    return CurrentValue(total[-1], total, abs(total[-1] - total[-2]) if len(total) > 1 else 0.0)


class HeisenbergCurrent:
    """The current of an oriented patch: omega -> integral over the patch."""

    def __init__(self, patch, spec: QuadratureSpec):
        self.patch = patch
        self.spec = spec

    def __call__(self, omega: RuminClass) -> CurrentValue:
        if isinstance(self.patch, LegendrianPatch):
            return integrate_lowdim(self.patch, omega, self.spec)
        return integrate_lowcodim(self.patch, omega, self.spec)

    def boundary_apply(self, omega: RuminClass) -> CurrentValue:
        """The Rumin boundary, by duality with d_c."""
        return self(d_c(omega))


def boundary_current_check(scene: StokesScene) -> dict:
    """The currents formulation: boundary of [[S]] against [[boundary S]].

    Re-routes through the currents API and must reproduce stokes_residual.
    """
    report = stokes_residual(scene)
    current = HeisenbergCurrent(scene.patch, scene.spec)
    via_current = current.boundary_apply(scene.form)
    if via_current.value != report.lhs.value:
        raise HeisCalcError("currents API disagrees with the direct computation")
    return {
        "scene_id": scene.scene_id,
        "boundary_of_current": via_current.to_json(),
        "boundary_current": report.rhs.to_json(),
        "residual": report.residual,
        "passed": report.passed,
    }


# -- oracle comparison scenes ------------------------------------------------------


@dataclass(frozen=True)
class IntegralScene:
    """A boundaryless patch + form + quadrature, for dual-route integration."""

    scene_id: str
    params: GroupParams
    patch: LevelSetPatch
    form: RuminClass
    spec: QuadratureSpec
    distance: str = "infinity"
    tolerance: float = 1e-6


def oracle_comparison(scene: IntegralScene) -> dict:
    """Graph-path Heisenberg integral against the Euclidean pullback oracle."""
    from .measure import euclidean_oracle_integral

    graph = integrate_lowcodim(scene.patch, scene.form, scene.spec)
    euclid = euclidean_oracle_integral(scene.patch, scene.form, scene.spec)
    # relative gap with an absolute floor of 1, so zero-valued integrals are
    # compared absolutely at the same tolerance
    scale = max(abs(graph.value), abs(euclid.value), 1.0)
    rel = abs(graph.value - euclid.value) / scale
    return {
        "scene_id": scene.scene_id,
        "graph": graph.to_json(),
        "euclidean_oracle": euclid.to_json(),
        "relative_gap": rel,
        "tolerance": scene.tolerance,
        "passed": rel < scene.tolerance,
    }


# -- approximation experiments ---------------------------------------------------


@dataclass(frozen=True)
class ConvergenceExperiment:
    """Shifted level sets {f = (1/h, 0, ..., 0)} approximating {f = 0}."""

    experiment_id: str
    patch: LevelSetPatch
    form: RuminClass
    shifts: tuple[float, ...]
    spec: QuadratureSpec
    final_gap_tol: float = 1e-3


@dataclass(frozen=True)
class ConvergenceReport:
    experiment_id: str
    base_value: float
    shift_values: tuple[float, ...]
    gaps: tuple[float, ...]
    final_gap: float
    decreasing: bool
    passed: bool

    def to_json(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "base_value": self.base_value,
            "shift_values": list(self.shift_values),
            "gaps": list(self.gaps),
            "final_gap": self.final_gap,
            "decreasing": self.decreasing,
            "passed": self.passed,
        }


def shifted_patch(patch: LevelSetPatch, h: float) -> LevelSetPatch:
    """The patch with f_1 replaced by f_1 - 1/h (h = inf leaves it unchanged)."""
    hf = float(h)
    if math.isinf(hf):
        return patch
    if hf <= 0:
        raise HeisCalcError("shift parameter must be positive")
    value = Fraction(1, int(round(hf))) if hf.is_integer() else Fraction(1.0 / hf)
    shift = SmoothScalar.const(patch.params.dim, value)
    fs = [patch.fs[0] - shift] + list(patch.fs[1:])
    return LevelSetPatch(
        patch.params,
        fs,
        patch.chart,
        patch.splitting,
        patch.orientation_sign,
        patch.boundary_fn,
        f"{patch.patch_id}@1/{h:g}",
    )


def approx_convergence(exp: ConvergenceExperiment) -> ConvergenceReport:
    """Evaluate the currents of the shifted level sets against the base patch."""
    base = integrate_lowcodim(exp.patch, exp.form, exp.spec).value
    values = []
    for h in exp.shifts:
        values.append(integrate_lowcodim(shifted_patch(exp.patch, h), exp.form, exp.spec).value)
    gaps = tuple(abs(v - base) for v in values)
    decreasing = all(b <= a + 1e-12 for a, b in zip(gaps[1:], gaps[2:])) if len(gaps) > 2 else True
    final = gaps[-1] if gaps else 0.0
    return ConvergenceReport(
        experiment_id=exp.experiment_id,
        base_value=base,
        shift_values=tuple(values),
        gaps=gaps,
        final_gap=final,
        decreasing=decreasing,
        passed=decreasing and final < exp.final_gap_tol,
    )


# -- scene execution -------------------------------------------------------------


def thread_budget() -> int:
    raw = os.environ.get("HEISCALC_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_scenes(scenes: list[StokesScene], check_flip: bool = True) -> list[dict]:
    """Run scenes (possibly in parallel) and merge reports by scene id."""

    def job(scene: StokesScene) -> dict:
        report = stokes_residual(scene)
        out = report.to_json()
        if check_flip:
            flipped = stokes_residual(scene, flip_boundary=True)
            out["flipped_residual"] = flipped.residual
            nondegenerate = abs(report.rhs.value) > 1e-9
            out["flip_raises_residual"] = (
                flipped.residual > 1e-2 if nondegenerate else None
            )
        return out

    workers = thread_budget()
    if workers == 1 or len(scenes) <= 1:
        results = [job(s) for s in scenes]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, scenes))
    return sorted(results, key=lambda r: r["scene_id"])
