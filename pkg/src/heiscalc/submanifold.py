"""Chart descriptions of Heisenberg submanifolds and their oriented boundaries.

Two chart kinds cover the build:

* LevelSetPatch: a low-codimension patch {f_1 = ... = f_k = 0} (optionally
  cut by f_{k+1} > 0) inside an axis-aligned chart box, together with the
  vertical splitting used to parametrize it as an intrinsic graph over W.
* LegendrianPatch: a low-dimension patch given by a parametrization whose
  tangent spaces are horizontal (the contact form pulls back to zero, which
  is checked exactly).

Normals and tangents follow the conventions of the exterior layer: the unit
horizontal normal is the normalized wedge of horizontal gradients times the
patch orientation sign, the tangent is its Hodge dual, and boundary
orientations solve "outward wedge boundary-tangent = patch tangent" (with
-T / +T playing the outward role in the critical codimension, depending on
whether the patch lies above or below its boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from . import ratlinalg
from .core import GroupParams, HomogeneousDistance, Point, VerticalSplitting, group_mul, inverse
from .errors import (
    CharacteristicPointError,
    HeisCalcError,
    InvalidPatchError,
)
from .exterior import MultiVector
from .quadrature import Box
from .scalars import SmoothScalar

CHARACTERISTIC_THRESHOLD = 1e-8
DEFAULT_SOLVE_TOL = 1e-12


def _as_float_array(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    return pts


class LevelSetPatch:
    """A codimension-k patch {f = 0} (and f_{k+1} > 0 if a boundary is present).

    ``splitting`` fixes the horizontal directions V used for the intrinsic
    graph parametrization; the k x k matrix [v_b f_a] must stay invertible
    along the solve (column dominance).
    """

    def __init__(
        self,
        params: GroupParams,
        fs: Sequence[SmoothScalar],
        chart: Box,
        splitting: VerticalSplitting,
        orientation_sign: int = 1,
        boundary_fn: SmoothScalar | None = None,
        patch_id: str = "patch",
    ):
        fs = tuple(fs)
        if not 1 <= len(fs) <= params.n:
            raise InvalidPatchError(f"codimension {len(fs)} outside 1..n")
        if chart.dim != params.dim:
            raise InvalidPatchError("chart box has wrong dimension")
        if splitting.params != params or splitting.k != len(fs):
            raise InvalidPatchError("splitting size must equal the codimension")
        if any(f.nvars != params.dim for f in fs):
            raise InvalidPatchError("defining functions in wrong variable count")
        if orientation_sign not in (1, -1):
            raise InvalidPatchError("orientation sign must be +1 or -1")
        self.params = params
        self.fs = fs
        self.chart = chart
        self.splitting = splitting
        self.orientation_sign = orientation_sign
        self.boundary_fn = boundary_fn
        self.patch_id = patch_id
        # symbolic horizontal gradients, computed once
        h = params.horizontal_dim
        self._grads = [[f.horizontal_derivative(j) for j in range(1, h + 1)] for f in fs]
        self._vgrads = [[self._grads[i][j - 1] for j in splitting.v_indices] for i in range(len(fs))]
        if boundary_fn is not None:
            self._bgrad = [boundary_fn.horizontal_derivative(j) for j in range(1, h + 1)]

    @property
    def codim(self) -> int:
        return len(self.fs)

    @property
    def dim(self) -> int:
        return self.params.dim - self.codim

    def is_critical(self) -> bool:
        return self.codim == self.params.n

    def with_orientation(self, sign: int) -> "LevelSetPatch":
        return LevelSetPatch(
            self.params, self.fs, self.chart, self.splitting, sign, self.boundary_fn, self.patch_id
        )

    # -- pointwise geometry ---------------------------------------------------

    def horizontal_jacobian(self, p: Point) -> list[list]:
        """Rows are the horizontal gradients of the defining functions at p."""
        return [[g.evaluate(p) for g in row] for row in self._grads]

    def gradient_wedge(self, p: Point) -> MultiVector:
        """The (unnormalized) wedge of horizontal gradients at p."""
        rows = self.horizontal_jacobian(p)
        vecs = [MultiVector.from_frame_components(self.params, row) for row in rows]
        out = vecs[0]
        for v in vecs[1:]:
            out = out.wedge(v)
        return out

    def horizontal_normal(self, p: Point) -> MultiVector:
        """Unit horizontal normal times the orientation sign."""
        w = self.gradient_wedge(p)
        if w.norm() < CHARACTERISTIC_THRESHOLD:
            raise CharacteristicPointError(
                f"{self.patch_id}: gradient wedge degenerates at {p.coords()}"
            )
        return w.unit().scale(self.orientation_sign)

    def tangent_vector(self, p: Point) -> tuple[MultiVector, MultiVector]:
        """(t, tau): t = *(normal), tau the unique horizontal part with tau ^ T = t."""
        t = self.horizontal_normal(p).hodge()
        top = self.params.dim
        tau_terms = {}
        for idx, c in t.terms.items():
            if idx[-1] != top:
                raise HeisCalcError("tangent vector has a non-vertical component")
            tau_terms[idx[:-1]] = c
        tau = MultiVector(self.params, t.degree - 1, tau_terms)
        return t, tau

    def tangent_group_basis(self, p: Point) -> list[MultiVector]:
        """Basis of the tangent group: kernel of the horizontal Jacobian, plus T.

        Exact (rational) when the point and coefficients are exact.
        """
        rows = self.horizontal_jacobian(p)
        w = self.gradient_wedge(p)
        if w.norm() < CHARACTERISTIC_THRESHOLD:
            raise CharacteristicPointError(
                f"{self.patch_id}: tangent group undefined at characteristic point"
            )
        exact = all(not isinstance(v, float) for row in rows for v in row)
        if exact:
            kernel = ratlinalg.nullspace([[Fraction(v) for v in row] for row in rows])
        else:
            a = np.array([[float(v) for v in row] for row in rows])
            _, s, vt = np.linalg.svd(a)
            null_mask = np.zeros(a.shape[1], dtype=bool)
            null_mask[len(s) :] = True
            null_mask[: len(s)] |= s < 1e-10 * max(1.0, s[0])
            kernel = [vt[i] for i in range(a.shape[1]) if null_mask[i]]
        basis = [MultiVector.from_frame_components(self.params, list(v)) for v in kernel]
        basis.append(MultiVector.basis(self.params, (self.params.dim,)))
        return basis

    # -- graph parametrization --------------------------------------------------

    def w_box(self) -> Box:
        axes = [i - 1 for i in self.splitting.w_indices] + [self.params.dim - 1]
        return self.chart.project(axes)

    def v_bounds(self) -> list[tuple[float, float]]:
        return [self.chart.axis_interval(i - 1) for i in self.splitting.v_indices]

    def ambient_from(self, xi: np.ndarray, s: np.ndarray) -> np.ndarray:
        """Coordinates of w(xi) * v(s) for stacked W-coordinates and V-values."""
        params = self.params
        n = params.n
        xi = _as_float_array(xi)
        s = _as_float_array(s)
        npts = xi.shape[0]
        coords = np.zeros((npts, params.dim))
        for a, widx in enumerate(self.splitting.w_indices):
            coords[:, widx - 1] = xi[:, a]
        coords[:, -1] = xi[:, -1]
        for b, vidx in enumerate(self.splitting.v_indices):
            coords[:, vidx - 1] = s[:, b]
        # t-component of w * v picks up (,<x_w, y_v> - <x_v, y_w>)/2
        cross = np.zeros(npts)
        w_set = set(self.splitting.w_indices)
        for j in range(1, n + 1):
            xj_w = coords[:, j - 1] if j in w_set else 0.0
            yj_w = coords[:, n + j - 1] if (n + j) in w_set else 0.0
            xj_v = coords[:, j - 1] if j not in w_set else 0.0
            yj_v = coords[:, n + j - 1] if (n + j) not in w_set else 0.0
            cross = cross + xj_w * yj_v - xj_v * yj_w
        coords[:, -1] = coords[:, -1] + 0.5 * cross
        return coords

    def solve_graph(
        self,
        xi: np.ndarray,
        tol: float = DEFAULT_SOLVE_TOL,
        max_iter: int = 60,
    ) -> np.ndarray:
        """Damped Newton solve of f(w(xi) * v(s)) = 0 for s, vectorized over xi.

        Falls back to bisection along V for stubborn points when k = 1.
        Returns ambient coordinates of the graph points.
        """
        xi = _as_float_array(xi)
        k = self.codim
        npts = xi.shape[0]
        s = np.zeros((npts, k))
        vb = self.v_bounds()
        for b, (lo, hi) in enumerate(vb):
            s[:, b] = 0.5 * (lo + hi)

        def residual(sv: np.ndarray) -> np.ndarray:
            pts = self.ambient_from(xi, sv)
            return np.stack([f.eval_many(pts) for f in self.fs], axis=-1)

        def jacobian(sv: np.ndarray) -> np.ndarray:
            pts = self.ambient_from(xi, sv)
            jac = np.empty((npts, k, k))
            for i in range(k):
                for b in range(k):
                    jac[:, i, b] = self._vgrads[i][b].eval_many(pts)
            return jac

        res = residual(s)
        res_norm = np.max(np.abs(res), axis=1)
        for _ in range(max_iter):
            active = res_norm > tol
            if not np.any(active):
                break
            jac = jacobian(s)
            dets = np.abs(np.linalg.det(jac[active]))
            if np.any(dets < 1e-14):
                raise CharacteristicPointError(
                    f"{self.patch_id}: V-Jacobian singular during graph solve"
                )
            step = np.zeros_like(s)
            step[active] = np.linalg.solve(jac[active], res[active][..., None])[..., 0]
            lam = np.ones(npts)
            improved = ~active
            for _ in range(25):
                trial = s - lam[:, None] * step
                tres = residual(trial)
                tnorm = np.max(np.abs(tres), axis=1)
                better = active & ~improved & (tnorm < res_norm)
                s[better] = trial[better]
                res[better] = tres[better]
                res_norm[better] = tnorm[better]
                improved |= better
                if np.all(improved):
                    break
                lam[~improved] *= 0.5
            if not np.all(improved):
                stuck = np.where(~improved)[0]
                if k == 1:
                    for idx in stuck:
                        s[idx, 0] = self._bisect_single(xi[idx], vb[0], tol)
                    res = residual(s)
                    res_norm = np.max(np.abs(res), axis=1)
                else:
                    raise InvalidPatchError(
                        f"{self.patch_id}: graph solve stalled at {len(stuck)} points"
                    )
        if np.any(res_norm > 10 * tol):
            raise InvalidPatchError(f"{self.patch_id}: graph solve did not converge")
        return self.ambient_from(xi, s)

    def _bisect_single(self, xi_row: np.ndarray, bounds: tuple[float, float], tol: float) -> float:
        f = self.fs[0]
        lo, hi = bounds

        def val(sv: float) -> float:
            return float(f.eval_many(self.ambient_from(xi_row[None, :], np.array([[sv]])))[0])

        grid = np.linspace(lo, hi, 65)
        vals = [val(g) for g in grid]
        bracket = None
        for a, b, va, vb_ in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if va == 0.0:
                return float(a)
            if va * vb_ < 0:
                bracket = (a, b, va)
                break
        if bracket is None:
            raise InvalidPatchError(f"{self.patch_id}: no root bracket along V")
        a, b, va = bracket
        for _ in range(200):
            mid = 0.5 * (a + b)
            vm = val(mid)
            if abs(vm) <= tol:
                return mid
            if va * vm < 0:
                b = mid
            else:
                a, va = mid, vm
        return 0.5 * (a + b)


class LegendrianPatch:
    """A low-dimension patch given by a horizontal parametrization.

    ``components`` are the 2n+1 coordinate functions of gamma in the m chart
    parameters (m <= n); ``box`` is the parameter box.
    """

    def __init__(
        self,
        params: GroupParams,
        components: Sequence[SmoothScalar],
        box: Box,
        orientation_sign: int = 1,
        patch_id: str = "legendrian",
    ):
        components = tuple(components)
        if len(components) != params.dim:
            raise InvalidPatchError("parametrization needs one component per coordinate")
        m = box.dim
        if not 1 <= m <= params.n:
            raise InvalidPatchError(f"parameter dimension {m} outside 1..n")
        if any(c.nvars != m for c in components):
            raise InvalidPatchError("components must live in the parameter variables")
        if orientation_sign not in (1, -1):
            raise InvalidPatchError("orientation sign must be +1 or -1")
        self.params = params
        self.components = components
        self.box = box
        self.orientation_sign = orientation_sign
        self.patch_id = patch_id
        self._jac = [
            [c.partial(i) for c in components] for i in range(1, m + 1)
        ]  # _jac[i][coord] = d gamma_coord / d s_i

    @property
    def m(self) -> int:
        return self.box.dim

    def with_orientation(self, sign: int) -> "LegendrianPatch":
        return LegendrianPatch(self.params, self.components, self.box, sign, self.patch_id)

    def eval_many(self, svals: np.ndarray) -> np.ndarray:
        svals = _as_float_array(svals)
        return np.stack([c.eval_many(svals) for c in self.components], axis=-1)

    def point_at(self, svals: Sequence, exact: bool = True) -> Point:
        coords = [c.evaluate(tuple(svals)) for c in self.components]
        if exact and all(not isinstance(v, float) for v in coords):
            return Point.from_coords(self.params, coords, exact=True)
        return Point.from_coords(self.params, [float(v) for v in coords], exact=False)

    def coordinate_tangents_many(self, svals: np.ndarray) -> np.ndarray:
        """(N, m, dim) array of coordinate tangent vectors d gamma / d s_i."""
        svals = _as_float_array(svals)
        out = np.empty((svals.shape[0], self.m, self.params.dim))
        for i in range(self.m):
            for j, poly in enumerate(self._jac[i]):
                out[:, i, j] = poly.eval_many(svals)
        return out

    def theta_pullback_components(self) -> list[SmoothScalar]:
        """Exact pullback of theta along gamma, one SmoothScalar per parameter."""
        n = self.params.n
        out = []
        for i in range(self.m):
            comp = self._jac[i][self.params.dim - 1]
            for j in range(n):
                xj, yj = self.components[j], self.components[n + j]
                dxj, dyj = self._jac[i][j], self._jac[i][n + j]
                comp = comp + (yj * dxj - xj * dyj).scale(Fraction(1, 2))
            out.append(comp)
        return out

    def faces(self) -> list[tuple["LegendrianPatch", int] | tuple[Point, int]]:
        """Oriented boundary pieces of the parameter box.

        For m = 1 these are signed endpoints; for m >= 2 signed (m-1)-parameter
        Legendrian patches (components must be polynomial).
        """
        if self.m == 1:
            lo, hi = self.box.lo[0], self.box.hi[0]
            return [
                (self.point_at((hi,)), self.orientation_sign),
                (self.point_at((lo,)), -self.orientation_sign),
            ]
        out = []
        for i in range(1, self.m + 1):
            axis_sign = -1 if (i - 1) % 2 else 1
            for bound, bsign in ((self.box.hi[i - 1], 1), (self.box.lo[i - 1], -1)):
                comps = [c.substitute_const(i, bound) for c in self.components]
                sub_box = Box(
                    tuple(v for j, v in enumerate(self.box.lo) if j != i - 1),
                    tuple(v for j, v in enumerate(self.box.hi) if j != i - 1),
                )
                face = LegendrianPatch(
                    self.params,
                    comps,
                    sub_box,
                    self.orientation_sign,
                    f"{self.patch_id}:face{i}{'+' if bsign > 0 else '-'}",
                )
                out.append((face, axis_sign * bsign))
        return out


# -- validation and reports ----------------------------------------------------


@dataclass(frozen=True)
class LegendrianReport:
    ok: bool
    failing_components: tuple[int, ...]
    min_tangent_singular_value: float

    def __bool__(self) -> bool:
        return self.ok


def legendrian_validate(patch: LegendrianPatch, samples: int = 5) -> LegendrianReport:
    """Exact pullback-of-theta check plus sampled tangent independence."""
    pull = patch.theta_pullback_components()
    failing = tuple(i + 1 for i, c in enumerate(pull) if not c.is_zero())
    grid = _box_grid(patch.box, samples)
    tangents = patch.coordinate_tangents_many(grid)
    min_sv = math.inf
    for row in tangents:
        sv = np.linalg.svd(row, compute_uv=False)
        min_sv = min(min_sv, float(sv[-1]))
    ok = not failing and min_sv > 1e-10
    return LegendrianReport(ok, failing, min_sv)


def require_legendrian(patch: LegendrianPatch) -> None:
    report = legendrian_validate(patch)
    if not report.ok:
        raise InvalidPatchError(
            f"{patch.patch_id}: not a Legendrian patch "
            f"(theta pullback nonzero in parameters {report.failing_components}, "
            f"min tangent singular value {report.min_tangent_singular_value:.2e})"
        )


def _box_grid(box: Box, per_axis: int) -> np.ndarray:
    axes = [
        np.linspace(float(lo), float(hi), per_axis)
        for lo, hi in zip(box.lo, box.hi)
    ]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=-1)


# -- outward normals and induced boundary orientations ---------------------------


def outward_normal(patch: LevelSetPatch, p: Point) -> MultiVector:
    """Unit outward horizontal normal to the boundary inside the tangent group.

    Only defined in the non-critical case (codimension <= n-1): project the
    horizontal gradient of the cut function onto the kernel of the horizontal
    Jacobian and negate.
    """
    if patch.boundary_fn is None:
        raise InvalidPatchError("patch has no boundary function")
    if patch.codim > patch.params.n - 1:
        raise InvalidPatchError("outward normal requires codimension <= n-1")
    jac = np.array([[float(v) for v in row] for row in patch.horizontal_jacobian(p)])
    g = np.array([float(s.evaluate(p)) for s in patch._bgrad])
    # project g onto ker(jac): g - jac^T (jac jac^T)^{-1} jac g
    gram = jac @ jac.T
    coeffs = np.linalg.solve(gram, jac @ g)
    proj = g - jac.T @ coeffs
    norm = float(np.linalg.norm(proj))
    if norm < CHARACTERISTIC_THRESHOLD:
        raise CharacteristicPointError("outward-normal projection degenerates")
    nu = -proj / norm
    return MultiVector.from_frame_components(patch.params, list(nu))


@dataclass(frozen=True)
class BoundaryOrientation:
    """Induced boundary orientation data.

    Non-critical case: ``boundary_patch`` is the level-set description of the
    boundary with the solved orientation sign and ``nu_at`` the outward
    normal field.  Critical case: ``boundary_legendrian`` carries the solved
    orientation and ``lies_above`` records the side classification.
    """

    kind: str
    boundary_patch: LevelSetPatch | None = None
    nu_at: Callable[[Point], MultiVector] | None = None
    boundary_legendrian: LegendrianPatch | None = None
    lies_above: bool | None = None


def _boundary_samples(patch: LevelSetPatch, per_axis: int = 3) -> list[Point]:
    """Points on the boundary {f = 0, f_{k+1} = 0} via graph solves."""
    bpatch = _boundary_levelset(patch, 1)
    wbox = bpatch.w_box()
    shrink = Box(
        tuple(l + 0.25 * (h - l) for l, h in zip(wbox.lo_f(), wbox.hi_f())),
        tuple(h - 0.25 * (h - l) for l, h in zip(wbox.lo_f(), wbox.hi_f())),
    )
    grid = _box_grid(shrink, per_axis)
    pts = bpatch.solve_graph(grid)
    return [Point.from_coords(patch.params, row, exact=False) for row in pts]


def _boundary_levelset(patch: LevelSetPatch, sign: int) -> LevelSetPatch:
    """The boundary {f_1 = .. = f_k = f_{k+1} = 0} as a level-set patch."""
    if patch.boundary_fn is None:
        raise InvalidPatchError("patch has no boundary function")
    params = patch.params
    used = set(patch.splitting.v_indices)
    # extend V by the admissible direction where the cut function varies most
    ext = None
    best_val = -1.0
    center = Point.from_coords(params, patch.chart.center(), exact=False)
    for j in range(1, params.horizontal_dim + 1):
        partner = j + params.n if j <= params.n else j - params.n
        if j in used or partner in used:
            continue
        v = abs(float(patch._bgrad[j - 1].evaluate(center)))
        if v > best_val:
            best_val, ext = v, j
    if ext is None or best_val < CHARACTERISTIC_THRESHOLD:
        raise InvalidPatchError("no admissible V direction for the boundary splitting")
    split = VerticalSplitting(params, list(patch.splitting.v_indices) + [ext])
    return LevelSetPatch(
        params,
        list(patch.fs) + [patch.boundary_fn],
        patch.chart,
        split,
        sign,
        None,
        patch.patch_id + ":boundary",
    )


def induced_boundary_orientation(
    patch: LevelSetPatch,
    boundary_legendrian: LegendrianPatch | None = None,
    margin: float = 1e-6,
) -> BoundaryOrientation:
    """Solve the boundary orientation induced by the patch orientation.

    Non-critical codimension: find the sign s with nu ^ (s t_b) = t_S on
    boundary samples.  Critical codimension: classify whether the patch lies
    above or below its boundary in the vertical coordinate of W, then solve
    -T ^ tau = t_S (above) or T ^ tau = t_S (below) for the boundary
    tangent orientation.
    """
    params = patch.params
    if patch.codim <= params.n - 1:
        if patch.boundary_fn is None:
            raise InvalidPatchError("patch has no boundary function")
        samples = _boundary_samples(patch)
        bpatch = _boundary_levelset(patch, 1)
        solved_sign = None
        for p in samples:
            t_s, _ = patch.tangent_vector(p)
            nu = outward_normal(patch, p)
            t_b, _ = bpatch.tangent_vector(p)
            cand = nu.wedge(t_b)
            score = float(cand.inner(t_s))
            if abs(score) < 0.9:
                raise InvalidPatchError(
                    f"{patch.patch_id}: boundary orientation solve is degenerate "
                    f"(|<nu ^ t_b, t_S>| = {abs(score):.3f})"
                )
            sign = 1 if score > 0 else -1
            if solved_sign is None:
                solved_sign = sign
            elif solved_sign != sign:
                raise InvalidPatchError(
                    f"{patch.patch_id}: inconsistent boundary orientation across samples"
                )
        oriented = _boundary_levelset(patch, solved_sign)
        return BoundaryOrientation(
            kind="noncritical",
            boundary_patch=oriented,
            nu_at=lambda q: outward_normal(patch, q),
        )

    # critical codimension k = n: the boundary must be supplied parametrically
    if boundary_legendrian is None:
        raise InvalidPatchError(
            "critical-codimension boundaries must be supplied as Legendrian patches"
        )
    require_legendrian(boundary_legendrian)
    lies_above = _classify_side(patch, boundary_legendrian, margin)
    sign_factor = -1 if lies_above else 1

    sgrid = _box_grid(boundary_legendrian.box, 4)
    gamma_pts = boundary_legendrian.eval_many(sgrid)
    tangents = boundary_legendrian.coordinate_tangents_many(sgrid)
    solved_sign = None
    T = MultiVector.basis(params, (params.dim,))
    for row_pt, row_tan in zip(gamma_pts, tangents):
        p = Point.from_coords(params, row_pt, exact=False)
        tau_cand = _frame_wedge(params, p, row_tan).unit().scale(
            boundary_legendrian.orientation_sign
        )
        t_s, _ = patch.tangent_vector(p)
        cand = T.wedge(tau_cand).scale(sign_factor)
        score = float(cand.inner(t_s))
        if abs(score) < 0.9:
            raise InvalidPatchError(
                f"{patch.patch_id}: critical boundary orientation solve is degenerate"
            )
        sign = 1 if score > 0 else -1
        if solved_sign is None:
            solved_sign = sign
        elif solved_sign != sign:
            raise InvalidPatchError(
                f"{patch.patch_id}: inconsistent critical boundary orientation"
            )
    oriented = boundary_legendrian.with_orientation(
        solved_sign * boundary_legendrian.orientation_sign
    )
    return BoundaryOrientation(
        kind="critical", boundary_legendrian=oriented, lies_above=lies_above
    )


def _frame_wedge(params: GroupParams, p: Point, coordinate_tangents: np.ndarray) -> MultiVector:
    """Wedge of coordinate tangent vectors converted to the frame at p."""
    from .core import coordinate_to_frame

    out = None
    for row in coordinate_tangents:
        comps = coordinate_to_frame(p, [float(v) for v in row])
        v = MultiVector.from_frame_components(params, list(comps))
        out = v if out is None else out.wedge(v)
    return out


def _classify_side(
    patch: LevelSetPatch, boundary: LegendrianPatch, margin: float
) -> bool:
    """True if the patch lies above its boundary in the vertical W coordinate."""
    params = patch.params
    split = patch.splitting
    # dense boundary sampling in W coordinates
    sgrid = _box_grid(boundary.box, 33)
    gpts = boundary.eval_many(sgrid)
    gw = np.array(
        [split.w_coords_of(Point.from_coords(params, row, exact=False)) for row in gpts]
    )
    gw_h, gw_t = gw[:, :-1], gw[:, -1]

    wbox = patch.w_box()
    grid = _box_grid(wbox, 7)
    pts = patch.solve_graph(grid)
    signs = set()
    scale = max(1.0, float(np.max(np.abs(gw_t))) if len(gw_t) else 1.0)
    for row in pts:
        w = split.w_coords_of(Point.from_coords(params, row, exact=False))
        wh, wt = np.array(w[:-1], dtype=float), float(w[-1])
        d2 = np.sum((gw_h - wh[None, :]) ** 2, axis=1)
        j = int(np.argmin(d2))
        gap = wt - gw_t[j]
        if abs(gap) <= margin * scale:
            continue
        signs.add(bool(gap > 0))
    if len(signs) != 1:
        raise InvalidPatchError(
            f"{patch.patch_id}: ambiguous above/below classification ({len(signs)} sides seen)"
        )
    return signs.pop()


# -- blow-up diagnostics ---------------------------------------------------------


@dataclass(frozen=True)
class BlowUpReport:
    radii: tuple[float, ...]
    ratios: tuple[float, ...]

    def decreasing_trend(self) -> bool:
        return all(b <= a + 1e-12 for a, b in zip(self.ratios, self.ratios[1:]))


def blow_up_check(
    patch: LevelSetPatch,
    p: Point,
    radii: Sequence[float],
    distance: HomogeneousDistance | None = None,
) -> BlowUpReport:
    """Sampled tangent-group approximation quality around a point of the patch.

    For each radius, samples graph points q at W-offsets of homogeneous size r
    and reports the worst ratio d(q, p . T_p S) / d(p, q); the numerator uses
    the exact reduction of the coset distance to a Euclidean distance from the
    horizontal kernel.
    """
    distance = distance or HomogeneousDistance("infinity")
    params = patch.params
    rows = patch.horizontal_jacobian(p)
    wedge = patch.gradient_wedge(p)
    if wedge.norm() < CHARACTERISTIC_THRESHOLD:
        raise CharacteristicPointError(f"{patch.patch_id}: blow-up at characteristic point")
    jac = np.array([[float(v) for v in row] for row in rows])
    # orthonormal basis of ker(jac) for the Euclidean distance formula
    _, s, vt = np.linalg.svd(jac)
    kernel = vt[jac.shape[0] :]
    pf = p.to_float()
    xi0 = np.array(patch.splitting.w_coords_of(pf), dtype=float)
    wdim = len(xi0)
    ratios = []
    for r in radii:
        offsets = []
        for a in range(wdim - 1):
            for sgn in (+1.0, -1.0):
                off = np.zeros(wdim)
                off[a] = sgn * r
                offsets.append(off)
        for sgn in (+1.0, -1.0):
            off = np.zeros(wdim)
            off[-1] = sgn * r * r
            offsets.append(off)
        diag = np.full(wdim, r / math.sqrt(max(1, wdim - 1)))
        diag[-1] = r * r
        offsets.append(diag)
        xi = xi0[None, :] + np.stack(offsets)
        pts = patch.solve_graph(xi)
        worst = 0.0
        for row in pts:
            q = Point.from_coords(params, row, exact=False)
            z = group_mul(inverse(pf), q)
            zh = np.array(z.coords()[: params.horizontal_dim], dtype=float)
            proj = kernel @ zh if len(kernel) else np.zeros(0)
            num = math.sqrt(max(float(zh @ zh - proj @ proj), 0.0))
            den = distance(pf, q)
            if den > 1e-15:
                worst = max(worst, num / den)
        ratios.append(worst)
    return BlowUpReport(tuple(float(r) for r in radii), tuple(ratios))
