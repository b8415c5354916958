"""Integration of Heisenberg forms over patches, and the C_{n,k} estimator.

Low codimension: currents are evaluated through the intrinsic-graph area
formula; the integrand at a W-sample xi is

    < t_S(Phi(xi)) | omega(Phi(xi)) > * |grad_H f_1 ^ ... ^ grad_H f_k| / Delta

with Delta = |det[v_b f_a]|.  The geometric normalization constant cancels
between the area formula and the current definition, so the returned value
never depends on it; the estimator below exists to validate that constant
empirically (sup over ball centers of vertical-subgroup slice volumes,
inverted).

An independent Euclidean oracle integrates the same form classically: pull
the coordinate expression of the form back along the graph map (finite
differences for the graph Jacobian) and orient by comparing with t_S.

Low dimension: classical pullback integration over Legendrian patches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .core import GroupParams, HomogeneousDistance, VerticalSplitting
from .errors import (
    CharacteristicPointError,
    DegreeMismatchError,
    HeisCalcError,
    MembershipError,
)
from .exterior import (
    InvariantForm,
    MultiIndex,
    complement,
    hodge_sign,
    invariant_to_coordinate,
)
from .quadrature import Box, CurrentValue, QuadratureSpec, integrate
from .rumin import RuminClass, j_membership
from .submanifold import (
    CHARACTERISTIC_THRESHOLD,
    LegendrianPatch,
    LevelSetPatch,
    require_legendrian,
)

ORACLE_FD_STEP = 1e-4
ORACLE_SOLVE_TOL = 5e-14


def _batched_minors(rows: np.ndarray, subsets: list[tuple[int, ...]]) -> dict[tuple, np.ndarray]:
    """Minors of an (N, k, d) stack for each k-subset of 0-based columns."""
    k = rows.shape[1]
    out = {}
    for sub in subsets:
        cols = rows[:, :, sub]
        if k == 1:
            out[sub] = cols[:, 0, 0]
        elif k == 2:
            out[sub] = cols[:, 0, 0] * cols[:, 1, 1] - cols[:, 0, 1] * cols[:, 1, 0]
        else:
            out[sub] = np.linalg.det(cols)
    return out


def _gradients_many(patch: LevelSetPatch, pts: np.ndarray) -> np.ndarray:
    """(N, k, 2n) horizontal Jacobian rows at ambient points."""
    n = pts.shape[0]
    k = patch.codim
    h = patch.params.horizontal_dim
    out = np.empty((n, k, h))
    for i in range(k):
        for j in range(h):
            out[:, i, j] = patch._grads[i][j].eval_many(pts)
    return out


def area_factor_many(patch: LevelSetPatch, pts: np.ndarray) -> np.ndarray:
    """|grad wedge| / Delta at ambient points (vectorized)."""
    h = patch.params.horizontal_dim
    k = patch.codim
    grads = _gradients_many(patch, pts)
    subsets = list(combinations(range(h), k))
    minors = _batched_minors(grads, subsets)
    norm2 = np.zeros(pts.shape[0])
    for m in minors.values():
        norm2 += m * m
    norm = np.sqrt(norm2)
    if np.any(norm < CHARACTERISTIC_THRESHOLD):
        raise CharacteristicPointError(f"{patch.patch_id}: characteristic sample in area factor")
    v_sub = tuple(i - 1 for i in patch.splitting.v_indices)
    delta = np.abs(minors[v_sub])
    if np.any(delta < 1e-12):
        raise CharacteristicPointError(f"{patch.patch_id}: V-determinant degenerates")
    return norm / delta


def area_factor(patch: LevelSetPatch, xi: Sequence) -> float:
    """Jacobian density of the area formula at one W-sample of the graph."""
    xi_arr = np.asarray([list(map(float, xi))])
    pts = patch.solve_graph(xi_arr)
    return float(area_factor_many(patch, pts)[0])


def _tangent_coefficients_many(
    patch: LevelSetPatch, pts: np.ndarray
) -> dict[MultiIndex, np.ndarray]:
    """Coefficients of the unit tangent t_S = *(n_S) at ambient points."""
    params = patch.params
    h = params.horizontal_dim
    k = patch.codim
    grads = _gradients_many(patch, pts)
    subsets = list(combinations(range(h), k))
    minors = _batched_minors(grads, subsets)
    norm2 = np.zeros(pts.shape[0])
    for m in minors.values():
        norm2 += m * m
    norm = np.sqrt(norm2)
    if np.any(norm < CHARACTERISTIC_THRESHOLD):
        raise CharacteristicPointError(f"{patch.patch_id}: characteristic sample")
    out: dict[MultiIndex, np.ndarray] = {}
    for sub, m in minors.items():
        idx = tuple(i + 1 for i in sub)
        sign = hodge_sign(idx, params.dim)
        key = complement(idx, params.dim)
        out[key] = sign * patch.orientation_sign * m / norm
    return out


def _pair_many(
    tangent: dict[MultiIndex, np.ndarray],
    form_terms: dict[MultiIndex, np.ndarray],
    npts: int,
) -> np.ndarray:
    acc = np.zeros(npts)
    for idx, tv in tangent.items():
        fv = form_terms.get(idx)
        if fv is not None:
            acc += tv * fv
    return acc


def _representative(omega) -> InvariantForm:
    return omega.representative if isinstance(omega, RuminClass) else omega


def integrate_lowcodim(
    patch: LevelSetPatch,
    omega,
    spec: QuadratureSpec,
    box: Box | None = None,
) -> CurrentValue:
    """The Heisenberg current of a low-codimension patch applied to omega.

    omega is a RuminClass (or raw form) of degree 2n+1-k in the subspace
    regime; the value is the plain graph integral of the paired density (the
    normalization constant cancels against the area formula).
    """
    rep = _representative(omega)
    if rep.degree != patch.dim:
        raise DegreeMismatchError(
            f"degree {rep.degree} form against a {patch.dim}-dimensional patch"
        )
    if not rep.is_zero() and not j_membership(rep):
        raise MembershipError("integrand is not in the subspace regime")
    domain = box or patch.w_box()

    def integrand(xi: np.ndarray) -> np.ndarray:
        pts = patch.solve_graph(xi)
        tang = _tangent_coefficients_many(patch, pts)
        terms = rep.eval_terms_many(pts)
        paired = _pair_many(tang, terms, pts.shape[0])
        return paired * area_factor_many(patch, pts)

    return integrate(domain, integrand, spec)


def integrate_lowcodim_spherical(
    patch: LevelSetPatch,
    omega,
    spec: QuadratureSpec,
    cnk_constant: float,
    box: Box | None = None,
) -> CurrentValue:
    """The unnormalized spherical-measure integral, given an estimate of the constant."""
    base = integrate_lowcodim(patch, omega, spec, box)
    return CurrentValue(
        base.value * cnk_constant,
        tuple(v * cnk_constant for v in base.trace),
        base.est_error * cnk_constant,
    )


def _frame_components_many(params: GroupParams, pts: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Convert coordinate tangent vectors (N, m, dim) to frame components at pts."""
    n = params.n
    out = vecs.copy()
    x = pts[:, :n]
    y = pts[:, n : 2 * n]
    theta_part = vecs[:, :, 2 * n] + 0.5 * (
        np.einsum("nj,nmj->nm", y, vecs[:, :, :n])
        - np.einsum("nj,nmj->nm", x, vecs[:, :, n : 2 * n])
    )
    out[:, :, 2 * n] = theta_part
    return out


def _wedge_coefficients_many(
    vecs: np.ndarray, dim: int
) -> dict[MultiIndex, np.ndarray]:
    """Wedge of m stacked vectors (N, m, dim): minors over index subsets."""
    m = vecs.shape[1]
    subsets = list(combinations(range(dim), m))
    minors = _batched_minors(vecs, subsets)
    return {tuple(i + 1 for i in sub): val for sub, val in minors.items()}


def integrate_lowdim(
    patch: LegendrianPatch,
    omega,
    spec: QuadratureSpec,
    validate: bool = True,
) -> CurrentValue:
    """Classical pullback integral of (any representative of) omega over a Legendrian."""
    rep = _representative(omega)
    if rep.degree != patch.m:
        raise DegreeMismatchError(
            f"degree {rep.degree} form against an {patch.m}-dimensional patch"
        )
    if validate:
        require_legendrian(patch)
    params = patch.params

    def integrand(svals: np.ndarray) -> np.ndarray:
        pts = patch.eval_many(svals)
        tangents = patch.coordinate_tangents_many(svals)
        frame = _frame_components_many(params, pts, tangents)
        wedge = _wedge_coefficients_many(frame, params.dim)
        terms = rep.eval_terms_many(pts)
        return patch.orientation_sign * _pair_many(wedge, terms, pts.shape[0])

    return integrate(patch.box, integrand, spec)


def point_current(points_with_signs: Sequence, omega) -> float:
    """0-dimensional current: signed sum of the scalar representative's values."""
    rep = _representative(omega)
    if rep.degree != 0:
        raise DegreeMismatchError("point currents apply degree-0 forms")
    coeff = rep.terms.get((), None)
    total = 0.0
    for p, sign in points_with_signs:
        if coeff is not None:
            total += sign * float(coeff.evaluate(p))
    return total


def euclidean_oracle_integral(
    patch: LevelSetPatch,
    omega,
    spec: QuadratureSpec,
    box: Box | None = None,
    fd_step: float = ORACLE_FD_STEP,
) -> CurrentValue:
    """Classical integral of omega over the graph, as an independent oracle.

    Pulls the coordinate expression of the form back along the graph map; the
    graph Jacobian comes from fourth-order finite differences of independent
    root solves.  The orientation matches the one induced by t_S: the sign of
    the frame inner product between the parametrization wedge and t_S (which
    is constant on a connected non-characteristic patch) multiplies the
    integrand.
    """
    rep = _representative(omega)
    if rep.degree != patch.dim:
        raise DegreeMismatchError("oracle degree mismatch")
    coord_form = invariant_to_coordinate(rep)
    params = patch.params
    domain = box or patch.w_box()
    wdim = domain.dim

    def integrand(xi: np.ndarray) -> np.ndarray:
        npts = xi.shape[0]
        shifts = []
        for i in range(wdim):
            for c in (-2.0, -1.0, 1.0, 2.0):
                shifted = xi.copy()
                shifted[:, i] += c * fd_step
                shifts.append(shifted)
        stacked = np.concatenate([xi] + shifts, axis=0)
        solved = patch.solve_graph(stacked, tol=ORACLE_SOLVE_TOL)
        pts = solved[:npts]
        tangents = np.empty((npts, wdim, params.dim))
        for i in range(wdim):
            base = npts * (1 + 4 * i)
            m2 = solved[base : base + npts]
            m1 = solved[base + npts : base + 2 * npts]
            p1 = solved[base + 2 * npts : base + 3 * npts]
            p2 = solved[base + 3 * npts : base + 4 * npts]
            tangents[:, i, :] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * fd_step)
        coord_wedge = _wedge_coefficients_many(tangents, params.dim)
        cterms = coord_form.eval_terms_many(pts)
        value = _pair_many(coord_wedge, cterms, npts)
        # orientation correction relative to t_S
        frame = _frame_components_many(params, pts, tangents)
        frame_wedge = _wedge_coefficients_many(frame, params.dim)
        tang = _tangent_coefficients_many(patch, pts)
        align = _pair_many(tang, frame_wedge, npts)
        if np.any(np.abs(align) < 1e-10):
            raise CharacteristicPointError("oracle orientation comparison degenerates")
        return value * np.sign(align)

    return integrate(domain, integrand, spec)


# -- the normalization constant ------------------------------------------------


@dataclass(frozen=True)
class CnkReport:
    """sup-of-slice-volume search result; the constant is the reciprocal."""

    constant: float
    interval: tuple[float, float]
    sup_volume: float
    argmax: tuple[float, ...]
    distance: str
    grid_level: int
    refine_rounds: int
    mc_volume: float | None
    mc_stderr: float | None
    seed: int

    def to_json(self) -> dict:
        return {
            "constant": self.constant,
            "interval": list(self.interval),
            "sup_volume": self.sup_volume,
            "argmax": list(self.argmax),
            "distance": self.distance,
            "grid_level": self.grid_level,
            "refine_rounds": self.refine_rounds,
            "mc_volume": self.mc_volume,
            "mc_stderr": self.mc_stderr,
            "seed": self.seed,
        }


def _norm_many(kind: str, h2: np.ndarray, zt: np.ndarray) -> np.ndarray:
    if kind == "infinity":
        return np.maximum(np.sqrt(h2), 2.0 * np.sqrt(np.abs(zt)))
    return (h2 * h2 + 16.0 * zt * zt) ** 0.25


class _SliceGeometry:
    """Vectorized evaluation of |p^{-1} q| for q in the vertical subgroup W."""

    def __init__(self, params: GroupParams, splitting: VerticalSplitting, kind: str):
        self.params = params
        self.split = splitting
        self.kind = kind
        self.n = params.n

    def _z_parts(self, p: np.ndarray, wh: np.ndarray, tau: np.ndarray):
        """Horizontal squared norm (independent of tau) and z_t for stacked samples."""
        n = self.n
        dim = self.params.dim
        q = np.zeros((wh.shape[0], dim))
        for a, widx in enumerate(self.split.w_indices):
            q[:, widx - 1] = wh[:, a]
        q[:, -1] = tau
        zx = q[:, :n] - p[:n]
        zy = q[:, n : 2 * n] - p[n : 2 * n]
        h2 = np.sum(zx * zx, axis=1) + np.sum(zy * zy, axis=1)
        cross = 0.5 * (q[:, :n] @ p[n : 2 * n] - q[:, n : 2 * n] @ p[:n])
        zt = q[:, -1] - p[-1] + cross
        return h2, zt

    def column_heights(self, p: np.ndarray, wh: np.ndarray, tol: float = 1e-13) -> np.ndarray:
        """Lebesgue measure of {tau : |p^{-1} w(wh, tau)| < 1} per column.

        The vertical coordinate enters the norm only through |z_t|, so each
        column is an interval centered at z_t = 0; its half-length is found
        by bracketed bisection on the norm.
        """
        npts = wh.shape[0]
        h2, _ = self._z_parts(p, wh, np.zeros(npts))
        base = _norm_many(self.kind, h2, np.zeros(npts))
        inside = base < 1.0
        heights = np.zeros(npts)
        if not np.any(inside):
            return heights
        lo = np.zeros(npts)
        hi = np.full(npts, 0.26)  # |z_t| < 1/4 for both shipped norms at radius 1
        grow = _norm_many(self.kind, h2, hi) < 1.0
        while np.any(grow & inside):
            hi[grow] *= 2.0
            grow = (_norm_many(self.kind, h2, hi) < 1.0) & inside
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            good = _norm_many(self.kind, h2, mid) < 1.0
            lo = np.where(good, mid, lo)
            hi = np.where(good, hi, mid)
            if np.max(hi - lo) < tol:
                break
        heights[inside] = 2.0 * lo[inside]
        return heights


def _slice_support_interval(geom: _SliceGeometry, p: np.ndarray, axis_center: float) -> tuple[float, float] | None:
    """Support of the single horizontal W coordinate (2n - k = 1 case only)."""

    def inside(y: float) -> bool:
        h2, _ = geom._z_parts(p, np.array([[y]]), np.zeros(1))
        return bool(h2[0] < 1.0)

    lo, hi = axis_center - 1.5, axis_center + 1.5
    ys = np.linspace(lo, hi, 257)
    flags = [inside(float(y)) for y in ys]
    if not any(flags):
        return None
    first = flags.index(True)
    last = len(flags) - 1 - flags[::-1].index(True)

    def bisect(a: float, b: float) -> float:
        fa = inside(a)
        for _ in range(80):
            m = 0.5 * (a + b)
            if inside(m) == fa:
                a = m
            else:
                b = m
        return 0.5 * (a + b)

    left = ys[first] if first == 0 else bisect(float(ys[first - 1]), float(ys[first]))
    right = ys[last] if last == len(ys) - 1 else bisect(float(ys[last + 1]), float(ys[last]))
    return (min(left, right), max(left, right))


def slice_volume(
    params: GroupParams,
    splitting: VerticalSplitting,
    kind: str,
    p: Sequence[float],
    panels: int = 24,
    order: int = 12,
) -> float:
    """Lebesgue volume of W intersected with the unit ball around p.

    One horizontal W dimension: graded composite Gauss panels toward the
    support endpoints (the column height has square-root behaviour there).
    Higher W dimensions: midpoint tensor grid.
    """
    geom = _SliceGeometry(params, splitting, kind)
    p = np.asarray([float(v) for v in p])
    whdim = len(splitting.w_indices)
    if whdim == 1:
        c = p[splitting.w_indices[0] - 1]
        support = _slice_support_interval(geom, p, float(c))
        if support is None:
            return 0.0
        a, b = support
        if b - a < 1e-14:
            return 0.0
        breaks = _graded_breakpoints(a, b, panels)
        x1, w1 = np.polynomial.legendre.leggauss(order)
        total = 0.0
        for s0, s1 in zip(breaks[:-1], breaks[1:]):
            mid, half = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
            ys = (mid + half * x1)[:, None]
            hs = geom.column_heights(p, ys)
            total += float(np.dot(w1 * half, hs))
        return total
    # general case: midpoint grid per horizontal axis
    grid_n = max(8, panels)
    axes = []
    for widx in splitting.w_indices:
        c = p[widx - 1]
        axes.append(np.linspace(c - 1.0, c + 1.0, grid_n, endpoint=False) + 1.0 / grid_n)
    grids = np.meshgrid(*axes, indexing="ij")
    wh = np.stack([g.reshape(-1) for g in grids], axis=-1)
    heights = geom.column_heights(p, wh)
    cell = math.prod((2.0 / grid_n) for _ in splitting.w_indices)
    return float(np.sum(heights) * cell)


def _graded_breakpoints(a: float, b: float, panels: int) -> list[float]:
    """Panel breakpoints geometrically refined toward both endpoints."""
    depth = max(2, panels // 2)
    left = [a + (b - a) * 0.5 ** (depth - j) * 0.5 for j in range(depth)]
    pts = [a] + left + [0.5 * (a + b)]
    right = [b - (x - a) for x in pts[1:-1]]
    return sorted(set(pts + right[::-1] + [b]))


def _ball_grid(params: GroupParams, kind: str, level: int) -> list[tuple[float, ...]]:
    """Nested dyadic probe points of the unit ball (corner-aligned, so grids nest)."""
    dim = params.dim
    step = 2.0**-level
    axis = np.arange(-1.0, 1.0 + 1e-12, step)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    dist = HomogeneousDistance(kind)
    out = []
    n = params.n
    from .core import Point

    for row in pts:
        norm = dist.norm(Point.from_coords(params, [float(v) for v in row], exact=False))
        if norm < 1.0:
            out.append(tuple(float(v) for v in row))
    return out


def cnk_estimate(
    params: GroupParams,
    k: int,
    kind: str,
    splitting: VerticalSplitting,
    grid_level: int = 2,
    refine_rounds: int = 10,
    panels: int = 24,
    order: int = 12,
    mc_samples: int = 0,
    seed: int = 0,
) -> CnkReport:
    """Estimate the normalization constant for (n, k) and a distance kind.

    Inner slice volumes are deterministic quadratures; the outer maximization
    scans a nested dyadic grid of the unit ball and then locally refines
    around the best center with shrinking steps.  The reported interval is a
    resolution heuristic, not a rigorous enclosure.
    """
    if splitting.k != k or splitting.params != params:
        raise HeisCalcError("splitting inconsistent with (n, k)")
    if grid_level < 1 or panels < 2 or refine_rounds < 1:
        raise HeisCalcError("budget too small to bracket the supremum")

    def vol(p: Sequence[float]) -> float:
        return slice_volume(params, splitting, kind, p, panels, order)

    best_p, best_v = None, -1.0
    for p in _ball_grid(params, kind, grid_level):
        v = vol(p)
        if v > best_v:
            best_p, best_v = p, v

    step = 2.0**-grid_level
    dim = params.dim
    last_gain = 0.0
    dist = HomogeneousDistance(kind)
    from .core import Point

    for _ in range(refine_rounds):
        step *= 0.5
        improved = False
        for axis in range(dim):
            for sgn in (-1.0, 1.0):
                cand = list(best_p)
                cand[axis] += sgn * step
                if dist.norm(Point.from_coords(params, cand, exact=False)) >= 1.0:
                    continue
                v = vol(cand)
                if v > best_v:
                    last_gain = v - best_v
                    best_p, best_v = tuple(cand), v
                    improved = True
        if not improved:
            last_gain = 0.0

    # slice-resolution heuristic: compare against a finer inner quadrature
    fine = slice_volume(params, splitting, kind, best_p, panels * 2, order)
    delta = abs(fine - best_v) + last_gain + 1e-12
    sup = max(best_v, fine)
    interval = (1.0 / (sup + delta), 1.0 / max(sup - delta, 1e-12))

    mc_vol = mc_err = None
    if mc_samples > 0:
        mc_vol, mc_err = _mc_slice_volume(params, splitting, kind, best_p, mc_samples, seed)
    return CnkReport(
        constant=1.0 / sup,
        interval=interval,
        sup_volume=sup,
        argmax=tuple(best_p),
        distance=kind,
        grid_level=grid_level,
        refine_rounds=refine_rounds,
        mc_volume=mc_vol,
        mc_stderr=mc_err,
        seed=seed,
    )


def distance_independence_report(
    patch: LevelSetPatch,
    omega,
    spec: QuadratureSpec,
    cnk_reports: dict[str, CnkReport],
) -> dict:
    """Spherical-path values per distance, plus the normalized current.

    The spherical-path integral is the graph value scaled by the estimated
    constant; dividing by the same constant cancels by construction, so the
    normalized value is carried through unscaled and its bit-identity across
    distances is asserted in the report.
    """
    graph = integrate_lowcodim(patch, omega, spec)
    per_distance = {}
    for kind, rep in cnk_reports.items():
        per_distance[kind] = {
            "cnk_estimate": rep.constant,
            "spherical_value": graph.value * rep.constant,
            "normalized_value": graph.value,
        }
    values = [d["normalized_value"] for d in per_distance.values()]
    return {
        "graph": graph.to_json(),
        "per_distance": per_distance,
        "normalized_bit_identical": all(v == values[0] for v in values),
    }


def _mc_slice_volume(
    params: GroupParams,
    splitting: VerticalSplitting,
    kind: str,
    p: Sequence[float],
    samples: int,
    seed: int,
) -> tuple[float, float]:
    """Monte Carlo check of one slice volume (counter-based generator, fixed seed)."""
    geom = _SliceGeometry(params, splitting, kind)
    pa = np.asarray([float(v) for v in p])
    whdim = len(splitting.w_indices)
    rng = np.random.Generator(np.random.Philox(seed))
    lo, hi = [], []
    for widx in splitting.w_indices:
        c = pa[widx - 1]
        lo.append(c - 1.0)
        hi.append(c + 1.0)
    # vertical extent: center the box on the zero of z_t, half-height 0.3
    _, zt0 = geom._z_parts(pa, pa[None, [w - 1 for w in splitting.w_indices]], np.zeros(1))
    tau_c = float(-zt0[0])
    lo.append(tau_c - 0.3)
    hi.append(tau_c + 0.3)
    lo_arr, hi_arr = np.array(lo), np.array(hi)
    pts = rng.uniform(lo_arr, hi_arr, size=(samples, whdim + 1))
    h2, zt = geom._z_parts(pa, pts[:, :whdim], pts[:, whdim])
    hits = _norm_many(kind, h2, zt) < 1.0
    frac = float(np.mean(hits))
    box_vol = float(np.prod(hi_arr - lo_arr))
    stderr = box_vol * math.sqrt(max(frac * (1 - frac), 1e-12) / samples)
    return box_vol * frac, stderr
