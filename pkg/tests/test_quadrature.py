import numpy as np
import pytest

from heiscalc.errors import HeisCalcError
from heiscalc.quadrature import Box, CurrentValue, QuadratureSpec, integrate


def test_box_basics():
    b = Box.of([(0, 1), (-1, 1)])
    assert b.dim == 2
    assert b.volume() == 2.0
    assert b.contains((0.5, 0.0)) and not b.contains((2.0, 0.0))
    assert b.project([1]).dim == 1
    with pytest.raises(HeisCalcError):
        Box.of([(1, 0)])


def test_polynomial_exactness_xy():
    box = Box.of([(0, 1), (0, 1)])
    val = integrate(box, lambda p: p[:, 0] * p[:, 1], QuadratureSpec(4, 1))
    assert abs(val.value - 0.25) < 1e-14


def test_polynomial_exactness_x9():
    box = Box.of([(0, 1)])
    val = integrate(box, lambda p: p[:, 0] ** 9, QuadratureSpec(5, 1))
    assert abs(val.value - 0.1) < 1e-14


def test_refinement_trace_cauchy():
    box = Box.of([(0.0, 3.0)])
    val = integrate(box, lambda p: np.sin(p[:, 0]), QuadratureSpec(3, 5))
    diffs = [abs(a - b) for a, b in zip(val.trace, val.trace[1:])]
    assert all(d2 <= d1 + 1e-15 for d1, d2 in zip(diffs, diffs[1:]))
    assert val.est_error == abs(val.trace[-1] - val.trace[-2])
    assert abs(val.value - (1 - np.cos(3.0))) < 1e-10


def test_nonfinite_rejected():
    box = Box.of([(0, 1)])
    with pytest.raises(HeisCalcError):
        integrate(box, lambda p: 1.0 / (p[:, 0] - p[:, 0]), QuadratureSpec(3, 1))


def test_deterministic_bits():
    box = Box.of([(0, 1), (0, 1)])
    fn = lambda p: np.exp(p[:, 0]) * np.cos(3 * p[:, 1])
    a = integrate(box, fn, QuadratureSpec(6, 3))
    b = integrate(box, fn, QuadratureSpec(6, 3))
    assert a.value == b.value and a.trace == b.trace


def test_spec_validation():
    with pytest.raises(HeisCalcError):
        QuadratureSpec(1, 3)
    with pytest.raises(HeisCalcError):
        QuadratureSpec(4, 0)
    cv = CurrentValue(1.0, (1.0,), 0.0)
    assert cv.to_json() == {"value": 1.0, "trace": [1.0], "est_error": 0.0}
