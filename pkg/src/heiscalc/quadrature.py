"""Tensor Gauss-Legendre quadrature over boxes with dyadic refinement.

Level 1 integrates over the whole box with one tensor rule; level L splits
every axis into 2^(L-1) equal cells.  Cells are visited in lexicographic
order and each accumulation uses exactly rounded summation (math.fsum), so
reported values are reproducible bit-for-bit regardless of evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import HeisCalcError


@dataclass(frozen=True)
class Box:
    """An axis-aligned box; bounds may be rational or float."""

    lo: tuple
    hi: tuple

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise HeisCalcError("box bounds of different lengths")
        if any(float(a) > float(b) for a, b in zip(self.lo, self.hi)):
            raise HeisCalcError("box with lo > hi")

    @staticmethod
    def of(bounds: Sequence[Sequence]) -> "Box":
        return Box(tuple(b[0] for b in bounds), tuple(b[1] for b in bounds))

    @property
    def dim(self) -> int:
        return len(self.lo)

    def lo_f(self) -> np.ndarray:
        return np.array([float(v) for v in self.lo])

    def hi_f(self) -> np.ndarray:
        return np.array([float(v) for v in self.hi])

    def center(self) -> tuple:
        return tuple((a + b) / 2 for a, b in zip(self.lo_f(), self.hi_f()))

    def volume(self) -> float:
        return float(np.prod(self.hi_f() - self.lo_f()))

    def contains(self, point: Sequence, tol: float = 0.0) -> bool:
        return all(
            float(a) - tol <= float(v) <= float(b) + tol
            for v, a, b in zip(point, self.lo, self.hi)
        )

    def axis_interval(self, i: int) -> tuple[float, float]:
        return float(self.lo[i]), float(self.hi[i])

    def project(self, axes: Sequence[int]) -> "Box":
        return Box(tuple(self.lo[i] for i in axes), tuple(self.hi[i] for i in axes))


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor Gauss-Legendre rule: nodes per axis and dyadic refinement depth."""

    order: int = 4
    levels: int = 3

    def __post_init__(self):
        if self.order < 2:
            raise HeisCalcError("quadrature order must be >= 2")
        if self.levels < 1:
            raise HeisCalcError("refinement levels must be >= 1")

    def to_json(self) -> dict:
        return {"order": self.order, "levels": self.levels}


@dataclass(frozen=True)
class CurrentValue:
    """A current evaluation: final value plus its refinement history."""

    value: float
    trace: tuple[float, ...]
    est_error: float

    def to_json(self) -> dict:
        return {"value": self.value, "trace": list(self.trace), "est_error": self.est_error}


_GAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def gauss_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    rule = _GAUSS_CACHE.get(order)
    if rule is None:
        rule = np.polynomial.legendre.leggauss(order)
        _GAUSS_CACHE[order] = rule
    return rule


def level_nodes(box: Box, order: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    """All nodes and weights of one refinement level (tensor over dyadic cells)."""
    d = box.dim
    cells_per_axis = 2 ** (level - 1)
    lo, hi = box.lo_f(), box.hi_f()
    h = (hi - lo) / cells_per_axis
    x1, w1 = gauss_rule(order)

    axis_vals = []
    axis_wts = []
    for i in range(d):
        starts = lo[i] + h[i] * np.arange(cells_per_axis)
        nodes = starts[:, None] + (x1[None, :] + 1.0) * (h[i] / 2.0)
        axis_vals.append(nodes.reshape(-1))
        axis_wts.append(np.tile(w1 * (h[i] / 2.0), cells_per_axis))

    grids = np.meshgrid(*axis_vals, indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=-1)
    wgrids = np.meshgrid(*axis_wts, indexing="ij")
    wts = np.ones(pts.shape[0])
    for wg in wgrids:
        wts = wts * wg.reshape(-1)
    return pts, wts


def integrate(box: Box, fn: Callable[[np.ndarray], np.ndarray], spec: QuadratureSpec) -> CurrentValue:
    """Integrate a vectorized integrand over a box.

    The per-level reduction uses math.fsum, whose exactly rounded result does
    not depend on summation order, so reports are bit-reproducible.
    """
    if box.dim == 0:
        val = float(fn(np.zeros((1, 0)))[0])
        return CurrentValue(val, (val,) * spec.levels, 0.0)
    trace = []
    for level in range(1, spec.levels + 1):
        pts, wts = level_nodes(box, spec.order, level)
        vals = np.asarray(fn(pts), dtype=float)
        if vals.shape != (pts.shape[0],):
            raise HeisCalcError("integrand returned wrong shape")
        if not np.all(np.isfinite(vals)):
            raise HeisCalcError("non-finite integrand value")
        trace.append(math.fsum(wts * vals))
    est = abs(trace[-1] - trace[-2]) if len(trace) > 1 else 0.0
    return CurrentValue(trace[-1], tuple(trace), est)


def integrate_callable(
    box: Box, fn: Callable[[np.ndarray], np.ndarray], order: int = 4, levels: int = 3
) -> CurrentValue:
    return integrate(box, fn, QuadratureSpec(order, levels))
