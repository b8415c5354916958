from pathlib import Path

import pytest

from heiscalc._tomlreader import loads
from heiscalc.errors import SceneParseError, SceneValidationError
from heiscalc.harness import (
    ConvergenceExperiment,
    IntegralScene,
    StokesScene,
    stokes_residual,
    validate_scene,
)
from heiscalc.scenefile import load_scene_file, parse_scene_text, build_stokes_scene

SCENES = Path(__file__).resolve().parents[1] / "src" / "heiscalc" / "scenes"


def test_toml_reader_subset():
    doc = loads(
        """
# comment
title = "hello \\"quoted\\""
count = 3
ratio = -2.5e-1
flag = true

[table]
items = [1, 2,
         3]
nested = {a = 1, b = "x"}

[table.sub]
deep = [[1, 2], [3, 4]]
"""
    )
    assert doc["title"] == 'hello "quoted"'
    assert doc["count"] == 3 and doc["ratio"] == -0.25 and doc["flag"] is True
    assert doc["table"]["items"] == [1, 2, 3]
    assert doc["table"]["nested"] == {"a": 1, "b": "x"}
    assert doc["table"]["sub"]["deep"] == [[1, 2], [3, 4]]


@pytest.mark.parametrize(
    "text",
    [
        'a = "unterminated',
        "a = 1\na = 2",
        "[t]\n[t]\nx = 1" if False else "a = @",
        "[[array]]\nx = 1",
        "a = 1 trailing",
    ],
)
def test_toml_reader_rejects(text):
    with pytest.raises(SceneParseError):
        loads(text)


def test_all_shipped_scenes_parse():
    names = sorted(p.name for p in SCENES.glob("*.toml"))
    assert len(names) >= 20
    for name in names:
        load_scene_file(SCENES / name)


def test_scene_kinds():
    assert isinstance(load_scene_file(SCENES / "stokes_h1_segment.toml"), StokesScene)
    assert isinstance(load_scene_file(SCENES / "integral_h1_plane.toml"), IntegralScene)
    assert isinstance(
        load_scene_file(SCENES / "convergence_h1_plane.toml"), ConvergenceExperiment
    )
    params, form = load_scene_file(SCENES / "form_tdx.toml")
    assert form.degree == 1


def test_unknown_keys_rejected():
    text = (SCENES / "stokes_h1_segment.toml").read_text() + "\nmystery = 1\n"
    with pytest.raises(SceneParseError):
        build_stokes_scene(parse_scene_text(text))
    bad_patch = text.replace("orientation = 1", "orientation = 1\nwibble = 2", 1)
    with pytest.raises(SceneParseError):
        build_stokes_scene(parse_scene_text(bad_patch))


def test_missing_and_bad_values():
    with pytest.raises(SceneParseError):
        build_stokes_scene(parse_scene_text('kind = "stokes"\n[group]\nn = 0'))
    with pytest.raises(SceneParseError):
        build_stokes_scene(
            parse_scene_text(
                'kind = "stokes"\n[group]\nn = 1\n[patch]\nkind = "levelset"\n'
                'functions = ["q + 1"]\nchart = [[-1,1],[-1,1],[-1,1]]\nv_directions = [1]\n'
                "[form]\ndegree = 0\nterms = []\n"
            )
        )


@pytest.mark.parametrize(
    "name",
    ["neg_characteristic", "neg_nonlegendrian_boundary", "neg_degree_mismatch"],
)
def test_negative_fixtures_rejected(name):
    scene = load_scene_file(SCENES / f"{name}.toml")
    with pytest.raises(SceneValidationError):
        validate_scene(scene)
    with pytest.raises(SceneValidationError):
        stokes_residual(scene)
