"""Scene file ingestion: strict TOML schema -> harness objects.

Scene files are human-authored TOML; unknown keys anywhere are rejected.
Numbers that must stay exact (polynomial coefficients, chart bounds, bump
data) are written as expression strings or rational strings like "7/10".

Top-level ``kind`` selects the payload: "stokes" (patch + form +
quadrature), "convergence" (adds [experiment]), or "form" (group + form
only, for dc-apply).
"""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

from ._tomlreader import load_toml
from .core import GroupParams, VerticalSplitting
from .errors import SceneParseError, SceneValidationError
from .exterior import InvariantForm
from .harness import ConvergenceExperiment, IntegralScene, StokesScene
from .quadrature import Box, QuadratureSpec
from .rumin import RuminClass, make_class
from .scalars import (
    Bump,
    Poly,
    SmoothScalar,
    coordinate_names,
    parameter_names,
    parse_poly,
)
from .submanifold import LegendrianPatch, LevelSetPatch


def _take(doc: dict, allowed: set[str], context: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise SceneParseError(f"{context}: unknown keys {sorted(unknown)}")


def _req(doc: dict, key: str, context: str):
    if key not in doc:
        raise SceneParseError(f"{context}: missing key {key!r}")
    return doc[key]


def _rational(value, context: str) -> Fraction:
    try:
        if isinstance(value, bool):
            raise ValueError
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(value)
        if isinstance(value, str):
            return Fraction(value)
    except (ValueError, ZeroDivisionError):
        pass
    raise SceneParseError(f"{context}: cannot read {value!r} as a rational number")


def _bounds(raw, dim: int, context: str) -> Box:
    if not isinstance(raw, list) or len(raw) != dim:
        raise SceneParseError(f"{context}: expected {dim} [lo, hi] pairs")
    lo, hi = [], []
    for i, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise SceneParseError(f"{context}: entry {i} is not an [lo, hi] pair")
        lo.append(_rational(pair[0], context))
        hi.append(_rational(pair[1], context))
    return Box(tuple(lo), tuple(hi))


def parse_scene_text(text: str, default_id: str = "scene") -> dict:
    doc = load_toml(text)
    if not isinstance(doc, dict):
        raise SceneParseError("scene file is not a table")
    doc.setdefault("id", default_id)
    doc.setdefault("kind", "stokes")
    return doc


def _group(doc: dict) -> GroupParams:
    g = _req(doc, "group", "scene")
    _take(g, {"n"}, "[group]")
    n = _req(g, "n", "[group]")
    if not isinstance(n, int) or n < 1:
        raise SceneParseError("[group]: n must be a positive integer")
    return GroupParams(n)


def _distance_kind(doc: dict) -> str:
    d = doc.get("distance", {"kind": "infinity"})
    _take(d, {"kind"}, "[distance]")
    kind = d.get("kind", "infinity")
    if kind not in ("infinity", "koranyi"):
        raise SceneParseError(f"[distance]: unknown kind {kind!r}")
    return kind


def _quadrature(doc: dict) -> QuadratureSpec:
    q = doc.get("quadrature", {})
    _take(q, {"order", "levels"}, "[quadrature]")
    return QuadratureSpec(int(q.get("order", 4)), int(q.get("levels", 3)))


def _scalar(expr, params_dim: int, names: dict, context: str) -> SmoothScalar:
    if not isinstance(expr, str):
        raise SceneParseError(f"{context}: polynomial must be a string expression")
    try:
        return SmoothScalar.from_poly(parse_poly(expr, params_dim, names))
    except Exception as exc:
        raise SceneParseError(f"{context}: {exc}") from None


def _legendrian(doc: dict, params: GroupParams, patch_id: str) -> LegendrianPatch:
    _take(doc, {"kind", "components", "box", "orientation"}, "[patch]")
    comps_raw = _req(doc, "components", "[patch]")
    if not isinstance(comps_raw, list) or len(comps_raw) != params.dim:
        raise SceneParseError(f"[patch]: need {params.dim} components")
    box = _bounds(_req(doc, "box", "[patch]"), _box_len(doc["box"]), "[patch].box")
    m = box.dim
    names = parameter_names(m)
    comps = [_scalar(c, m, names, "[patch].components") for c in comps_raw]
    sign = int(doc.get("orientation", 1))
    return LegendrianPatch(params, comps, box, sign, patch_id)


def _box_len(raw) -> int:
    if not isinstance(raw, list):
        raise SceneParseError("box must be a list of pairs")
    return len(raw)


def _levelset(doc: dict, params: GroupParams, patch_id: str) -> tuple[LevelSetPatch, LegendrianPatch | None]:
    allowed = {
        "kind",
        "functions",
        "chart",
        "orientation",
        "v_directions",
        "boundary_function",
        "boundary_curve",
    }
    _take(doc, allowed, "[patch]")
    names = coordinate_names(params)
    fs_raw = _req(doc, "functions", "[patch]")
    if not isinstance(fs_raw, list) or not fs_raw:
        raise SceneParseError("[patch]: functions must be a nonempty list")
    fs = [_scalar(f, params.dim, names, "[patch].functions") for f in fs_raw]
    chart = _bounds(_req(doc, "chart", "[patch]"), params.dim, "[patch].chart")
    v_dirs = _req(doc, "v_directions", "[patch]")
    if not isinstance(v_dirs, list):
        raise SceneParseError("[patch]: v_directions must be a list of frame indices")
    splitting = VerticalSplitting(params, [int(v) for v in v_dirs])
    sign = int(doc.get("orientation", 1))
    boundary_fn = None
    if "boundary_function" in doc:
        boundary_fn = _scalar(doc["boundary_function"], params.dim, names, "[patch].boundary_function")
    patch = LevelSetPatch(params, fs, chart, splitting, sign, boundary_fn, patch_id)
    boundary = None
    if "boundary_curve" in doc:
        bc = doc["boundary_curve"]
        _take(bc, {"components", "box", "orientation"}, "[patch.boundary_curve]")
        bc = dict(bc)
        bc["kind"] = "legendrian"
        boundary = _legendrian(bc, params, patch_id + ":boundary-curve")
    return patch, boundary


def _form(doc: dict, params: GroupParams) -> RuminClass:
    f = _req(doc, "form", "scene")
    _take(f, {"degree", "terms", "bump"}, "[form]")
    degree = _req(f, "degree", "[form]")
    if not isinstance(degree, int) or degree < 0:
        raise SceneParseError("[form]: degree must be a nonnegative integer")
    names = coordinate_names(params)
    bump = None
    if "bump" in f:
        b = f["bump"]
        _take(b, {"center", "radius"}, "[form.bump]")
        center_raw = _req(b, "center", "[form.bump]")
        if not isinstance(center_raw, list) or len(center_raw) != params.dim:
            raise SceneParseError(f"[form.bump]: center needs {params.dim} entries")
        center = [_rational(c, "[form.bump].center") for c in center_raw]
        radius = _rational(_req(b, "radius", "[form.bump]"), "[form.bump].radius")
        bump = SmoothScalar(params.dim, Poly.const(params.dim, 1), Bump(center, radius))
    terms_raw = _req(f, "terms", "[form]")
    if not isinstance(terms_raw, list):
        raise SceneParseError("[form]: terms must be a list")
    terms: dict[tuple, SmoothScalar] = {}
    for i, item in enumerate(terms_raw):
        if not isinstance(item, dict):
            raise SceneParseError(f"[form].terms[{i}]: expected an inline table")
        _take(item, {"indices", "coeff"}, f"[form].terms[{i}]")
        idx = tuple(int(v) for v in _req(item, "indices", f"[form].terms[{i}]"))
        if len(idx) != degree:
            raise SceneParseError(f"[form].terms[{i}]: index count != degree")
        coeff = _scalar(_req(item, "coeff", f"[form].terms[{i}]"), params.dim, names, f"[form].terms[{i}]")
        if bump is not None:
            coeff = coeff * bump
        terms[idx] = terms[idx] + coeff if idx in terms else coeff
    rep = InvariantForm(params, degree, terms)
    return make_class(rep)


def build_stokes_scene(doc: dict) -> StokesScene:
    allowed = {"id", "kind", "group", "distance", "patch", "form", "quadrature", "tolerances"}
    _take(doc, allowed, "scene")
    params = _group(doc)
    patch_doc = _req(doc, "patch", "scene")
    patch_kind = _req(patch_doc, "kind", "[patch]")
    scene_id = doc["id"]
    if patch_kind == "levelset":
        patch, boundary = _levelset(patch_doc, params, scene_id)
    elif patch_kind == "legendrian":
        patch, boundary = _legendrian(patch_doc, params, scene_id), None
    else:
        raise SceneParseError(f"[patch]: unknown kind {patch_kind!r}")
    form = _form(doc, params)
    spec = _quadrature(doc)
    tol = doc.get("tolerances", {})
    _take(tol, {"residual"}, "[tolerances]")
    residual_tol = float(tol.get("residual", 1e-6))
    return StokesScene(
        scene_id=scene_id,
        params=params,
        patch=patch,
        form=form,
        spec=spec,
        boundary_legendrian=boundary,
        distance=_distance_kind(doc),
        tolerance=residual_tol,
    )


def build_convergence_experiment(doc: dict) -> ConvergenceExperiment:
    allowed = {"id", "kind", "group", "distance", "patch", "form", "quadrature", "experiment", "tolerances"}
    _take(doc, allowed, "scene")
    params = _group(doc)
    patch_doc = _req(doc, "patch", "scene")
    if _req(patch_doc, "kind", "[patch]") != "levelset":
        raise SceneParseError("convergence experiments need a levelset patch")
    patch, boundary = _levelset(patch_doc, params, doc["id"])
    if boundary is not None or patch.boundary_fn is not None:
        raise SceneValidationError("convergence experiments use boundaryless patches")
    form = _form(doc, params)
    spec = _quadrature(doc)
    exp = _req(doc, "experiment", "scene")
    _take(exp, {"shifts", "final_gap"}, "[experiment]")
    shifts_raw = _req(exp, "shifts", "[experiment]")
    if not isinstance(shifts_raw, list) or not shifts_raw:
        raise SceneParseError("[experiment]: shifts must be a nonempty list")
    shifts = tuple(float(h) for h in shifts_raw)
    final_gap = float(exp.get("final_gap", 1e-3))
    return ConvergenceExperiment(
        experiment_id=doc["id"],
        patch=patch,
        form=form,
        shifts=shifts,
        spec=spec,
        final_gap_tol=final_gap,
    )


def build_integral_scene(doc: dict) -> IntegralScene:
    allowed = {"id", "kind", "group", "distance", "patch", "form", "quadrature", "tolerances"}
    _take(doc, allowed, "scene")
    params = _group(doc)
    patch_doc = _req(doc, "patch", "scene")
    if _req(patch_doc, "kind", "[patch]") != "levelset":
        raise SceneParseError("integral scenes need a levelset patch")
    patch, boundary = _levelset(patch_doc, params, doc["id"])
    if boundary is not None or patch.boundary_fn is not None:
        raise SceneValidationError("integral scenes use boundaryless patches")
    tol = doc.get("tolerances", {})
    _take(tol, {"relative"}, "[tolerances]")
    return IntegralScene(
        scene_id=doc["id"],
        params=params,
        patch=patch,
        form=_form(doc, params),
        spec=_quadrature(doc),
        distance=_distance_kind(doc),
        tolerance=float(tol.get("relative", 1e-6)),
    )


def build_form_only(doc: dict) -> tuple[GroupParams, RuminClass]:
    allowed = {"id", "kind", "group", "form"}
    _take(doc, allowed, "scene")
    params = _group(doc)
    return params, _form(doc, params)


def load_scene_file(path: str | Path):
    """Parse a scene file and build the object its ``kind`` declares."""
    p = Path(path)
    doc = parse_scene_text(p.read_text(), default_id=p.stem)
    kind = doc.get("kind", "stokes")
    if kind == "stokes":
        return build_stokes_scene(doc)
    if kind == "convergence":
        return build_convergence_experiment(doc)
    if kind == "integral":
        return build_integral_scene(doc)
    if kind == "form":
        return build_form_only(doc)
    raise SceneParseError(f"unknown scene kind {kind!r}")
