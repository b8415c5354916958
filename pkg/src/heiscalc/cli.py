"""Command-line front end.

Subcommands: rumin-table, dc-apply, stokes-verify, cnk-estimate,
approx-convergence, validate-scene.  Reports are JSON written atomically
(temp file + rename); exit codes: 0 all assertions pass, 1 an assertion
failed, 2 invalid input.  Reports carry the seed and config and contain no
timestamps, so identical invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import replace
from pathlib import Path

from .core import GroupParams, VerticalSplitting
from .errors import HeisCalcError, SceneParseError, SceneValidationError
from .exterior import form_to_obj
from .harness import (
    ConvergenceExperiment,
    IntegralScene,
    StokesScene,
    approx_convergence,
    oracle_comparison,
    run_scenes,
)
from .measure import cnk_estimate
from .quadrature import QuadratureSpec
from .rumin import d_c, dimension_table
from .scenefile import load_scene_file

EXIT_PASS = 0
EXIT_ASSERTION = 1
EXIT_INVALID = 2


def _write_json(payload: dict, out: Path | None, name: str) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    target = out / name
    fd, tmp = tempfile.mkstemp(dir=out, prefix=".tmp-", suffix=".json")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _apply_overrides(scene: StokesScene, args) -> StokesScene:
    if args.levels is not None:
        scene = replace(scene, spec=QuadratureSpec(scene.spec.order, args.levels))
    if args.tol is not None:
        scene = replace(scene, tolerance=args.tol)
    return scene


def cmd_rumin_table(args) -> int:
    table = dimension_table(GroupParams(args.n))
    payload = {
        "subcommand": "rumin-table",
        "n": args.n,
        "dimensions": {str(k): v for k, v in table.items()},
        "seed": args.seed,
    }
    _write_json(payload, args.out, f"rumin-table-n{args.n}.json")
    return EXIT_PASS


def cmd_dc_apply(args) -> int:
    loaded = load_scene_file(args.scene)
    if not isinstance(loaded, tuple):
        raise SceneParseError("dc-apply expects a scene with kind = \"form\"")
    params, omega = loaded
    result = d_c(omega)
    payload = {
        "subcommand": "dc-apply",
        "scene": Path(args.scene).name,
        "input": form_to_obj(omega.representative),
        "input_degree": omega.degree,
        "result": form_to_obj(result.representative),
        "result_degree": result.degree,
        "regime": result.regime,
        "seed": args.seed,
    }
    _write_json(payload, args.out, f"dc-apply-{Path(args.scene).stem}.json")
    return EXIT_PASS


def cmd_stokes_verify(args) -> int:
    scenes = []
    comparisons = []
    for path in args.scene:
        loaded = load_scene_file(path)
        if isinstance(loaded, StokesScene):
            scenes.append(_apply_overrides(loaded, args))
        elif isinstance(loaded, IntegralScene):
            comparisons.append(loaded)
        else:
            raise SceneParseError(f"{path}: not a stokes or integral scene")
    reports = run_scenes(scenes) if scenes else []
    for scene in comparisons:
        reports.append(oracle_comparison(scene))
    ok = all(r.get("passed", False) for r in reports)
    ok = ok and all(r.get("flip_raises_residual") in (True, None) for r in reports)
    payload = {
        "subcommand": "stokes-verify",
        "seed": args.seed,
        "passed": ok,
        "reports": reports,
    }
    _write_json(payload, args.out, "stokes-verify.json")
    return EXIT_PASS if ok else EXIT_ASSERTION


def cmd_cnk_estimate(args) -> int:
    params = GroupParams(args.n)
    splitting = VerticalSplitting(params, args.v)
    report = cnk_estimate(
        params,
        args.k,
        args.distance,
        splitting,
        grid_level=args.grid_level,
        refine_rounds=args.refine_rounds,
        panels=args.panels,
        order=args.order,
        mc_samples=args.mc,
        seed=args.seed,
    )
    payload = {
        "subcommand": "cnk-estimate",
        "n": args.n,
        "k": args.k,
        "seed": args.seed,
        "report": report.to_json(),
    }
    _write_json(payload, args.out, f"cnk-n{args.n}-k{args.k}-{args.distance}.json")
    return EXIT_PASS


def cmd_approx_convergence(args) -> int:
    loaded = load_scene_file(args.scene)
    if not isinstance(loaded, ConvergenceExperiment):
        raise SceneParseError("approx-convergence expects a scene with kind = \"convergence\"")
    report = approx_convergence(loaded)
    payload = {
        "subcommand": "approx-convergence",
        "seed": args.seed,
        "report": report.to_json(),
    }
    _write_json(payload, args.out, f"convergence-{report.experiment_id}.json")
    if args.csv is not None:
        _write_csv(report, args.csv)
    return EXIT_PASS if report.passed else EXIT_ASSERTION


def _write_csv(report, path: Path) -> None:
    lines = ["shift_index,value,gap"]
    for i, (v, g) in enumerate(zip(report.shift_values, report.gaps)):
        lines.append(f"{i},{v!r},{g!r}")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".csv")
    with os.fdopen(fd, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def cmd_validate_scene(args) -> int:
    loaded = load_scene_file(args.scene)
    if isinstance(loaded, StokesScene):
        from .harness import validate_scene

        validate_scene(loaded)
    payload = {
        "subcommand": "validate-scene",
        "scene": Path(args.scene).name,
        "valid": True,
        "seed": args.seed,
    }
    _write_json(payload, args.out, f"validate-{Path(args.scene).stem}.json")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heiscalc",
        description="Heisenberg-group calculus: Rumin forms, submanifold integration, Stokes verification",
    )
    parser.add_argument("--out", type=Path, default=None, help="report output directory")
    parser.add_argument("--seed", type=int, default=0, help="seed recorded in reports")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rumin-table", help="Heisenberg form space dimensions")
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(fn=cmd_rumin_table)

    p = sub.add_parser("dc-apply", help="apply the Rumin differential to a form scene")
    p.add_argument("--scene", required=True)
    p.set_defaults(fn=cmd_dc_apply)

    p = sub.add_parser("stokes-verify", help="verify the Stokes identity on scenes")
    p.add_argument("--scene", action="append", required=True)
    p.add_argument("--tol", type=float, default=None, help="residual tolerance override")
    p.add_argument("--levels", type=int, default=None, help="refinement level override")
    p.set_defaults(fn=cmd_stokes_verify)

    p = sub.add_parser("cnk-estimate", help="estimate the normalization constant")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--distance", choices=("infinity", "koranyi"), default="infinity")
    p.add_argument("--v", type=int, nargs="+", required=True, help="frame indices spanning V")
    p.add_argument("--grid-level", type=int, default=2)
    p.add_argument("--refine-rounds", type=int, default=10)
    p.add_argument("--panels", type=int, default=24)
    p.add_argument("--order", type=int, default=12)
    p.add_argument("--mc", type=int, default=0, help="Monte Carlo cross-check samples")
    p.set_defaults(fn=cmd_cnk_estimate)

    p = sub.add_parser("approx-convergence", help="shifted level-set convergence experiment")
    p.add_argument("--scene", required=True)
    p.add_argument("--csv", type=Path, default=None, help="write the gap trace as CSV")
    p.set_defaults(fn=cmd_approx_convergence)

    p = sub.add_parser("validate-scene", help="strict scene validation")
    p.add_argument("--scene", required=True)
    p.set_defaults(fn=cmd_validate_scene)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (SceneParseError, SceneValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except HeisCalcError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    raise SystemExit(main())
