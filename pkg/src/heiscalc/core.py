"""Heisenberg group structure: points, dilations, frame, distances, projections.

Points live in exponential coordinates p = (x, y, t) with x, y in R^n and
t in R.  Two numeric modes are supported: exact (components are Fractions,
closed under all group operations) and float (IEEE doubles, used by the
quadrature layer).  Every operation is a pure function of immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import DimensionMismatchError, HeisCalcError

Scalar = Fraction | float


@dataclass(frozen=True)
class GroupParams:
    """The group H^n.  Ambient dimension is 2n+1, homogeneous dimension 2n+2."""

    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("n must be a positive integer")

    @property
    def dim(self) -> int:
        return 2 * self.n + 1

    @property
    def homogeneous_dim(self) -> int:
        return 2 * self.n + 2

    @property
    def horizontal_dim(self) -> int:
        return 2 * self.n


def _coerce(values: Iterable, exact: bool) -> tuple:
    if exact:
        return tuple(Fraction(v) for v in values)
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class Point:
    """Group element in exponential coordinates.

    ``exact`` selects the numeric mode: True stores Fractions, False doubles.
    """

    params: GroupParams
    x: tuple
    y: tuple
    t: Scalar
    exact: bool = True

    @staticmethod
    def of(params: GroupParams, x: Sequence, y: Sequence, t, exact: bool = True) -> "Point":
        if len(x) != params.n or len(y) != params.n:
            raise DimensionMismatchError(
                f"expected {params.n} x- and y-components, got {len(x)}, {len(y)}"
            )
        if exact:
            return Point(params, _coerce(x, True), _coerce(y, True), Fraction(t), True)
        return Point(params, _coerce(x, False), _coerce(y, False), float(t), False)

    @staticmethod
    def origin(params: GroupParams, exact: bool = True) -> "Point":
        zero = Fraction(0) if exact else 0.0
        return Point.of(params, [zero] * params.n, [zero] * params.n, zero, exact)

    @staticmethod
    def from_coords(params: GroupParams, coords: Sequence, exact: bool = True) -> "Point":
        if len(coords) != params.dim:
            raise DimensionMismatchError(
                f"expected {params.dim} coordinates, got {len(coords)}"
            )
        n = params.n
        return Point.of(params, coords[:n], coords[n : 2 * n], coords[2 * n], exact)

    def coords(self) -> tuple:
        return self.x + self.y + (self.t,)

    def to_float(self) -> "Point":
        if not self.exact:
            return self
        return Point.of(self.params, self.x, self.y, self.t, exact=False)


def _check_compatible(p: Point, q: Point) -> None:
    if p.params != q.params:
        raise DimensionMismatchError("points belong to different groups")
    if p.exact != q.exact:
        raise DimensionMismatchError("points have different numeric modes")


def group_mul(p: Point, q: Point) -> Point:
    """p * q = (x+x', y+y', t+t' + (<x,y'> - <x',y>)/2)."""
    _check_compatible(p, q)
    half = Fraction(1, 2) if p.exact else 0.5
    x = tuple(a + b for a, b in zip(p.x, q.x))
    y = tuple(a + b for a, b in zip(p.y, q.y))
    cross = sum(a * b for a, b in zip(p.x, q.y)) - sum(a * b for a, b in zip(q.x, p.y))
    return Point(p.params, x, y, p.t + q.t + half * cross, p.exact)


def inverse(p: Point) -> Point:
    return Point(p.params, tuple(-v for v in p.x), tuple(-v for v in p.y), -p.t, p.exact)


def dilate(lam, p: Point) -> Point:
    """Anisotropic dilation (x, y, t) -> (lam x, lam y, lam^2 t), lam > 0."""
    lam = Fraction(lam) if p.exact else float(lam)
    if lam <= 0:
        raise HeisCalcError("dilation factor must be positive")
    return Point(
        p.params,
        tuple(lam * v for v in p.x),
        tuple(lam * v for v in p.y),
        lam * lam * p.t,
        p.exact,
    )


class HomogeneousDistance:
    """A left-invariant homogeneous rotationally invariant distance.

    ``kind`` is "infinity" (max of the horizontal norm and 2 sqrt|t|) or
    "koranyi" (fourth root of |(x,y)|^4 + 16 t^2).
    """

    KINDS = ("infinity", "koranyi")

    def __init__(self, kind: str = "infinity"):
        if kind not in self.KINDS:
            raise HeisCalcError(f"unknown distance kind {kind!r}")
        self.kind = kind

    def norm(self, p: Point) -> float:
        h2 = float(sum(v * v for v in p.x) + sum(v * v for v in p.y))
        t = float(p.t)
        if self.kind == "infinity":
            return max(math.sqrt(h2), 2.0 * math.sqrt(abs(t)))
        return (h2 * h2 + 16.0 * t * t) ** 0.25

    def __call__(self, p: Point, q: Point) -> float:
        return self.norm(group_mul(inverse(p), q))

    def ball_contains(self, center: Point, radius: float, q: Point) -> bool:
        return self(center, q) < radius

    def __repr__(self) -> str:
        return f"HomogeneousDistance({self.kind!r})"


def frame_at(p: Point) -> list[tuple]:
    """Coordinate vectors of X_1..X_n, Y_1..Y_n, T at p.

    X_j = e_{x_j} - (y_j/2) e_t,  Y_j = e_{y_j} + (x_j/2) e_t,  T = e_t.
    """
    n = p.params.n
    dim = p.params.dim
    half = Fraction(1, 2) if p.exact else 0.5
    zero = Fraction(0) if p.exact else 0.0
    one = Fraction(1) if p.exact else 1.0
    vectors = []
    for j in range(n):
        v = [zero] * dim
        v[j] = one
        v[2 * n] = -half * p.y[j]
        vectors.append(tuple(v))
    for j in range(n):
        v = [zero] * dim
        v[n + j] = one
        v[2 * n] = half * p.x[j]
        vectors.append(tuple(v))
    v = [zero] * dim
    v[2 * n] = one
    vectors.append(tuple(v))
    return vectors


def coordinate_to_frame(p: Point, vector: Sequence) -> tuple:
    """Components of a coordinate tangent vector in the frame at p.

    The horizontal components equal the (x, y) components of the vector; the
    T-component is the contact form applied to the vector.
    """
    n = p.params.n
    if len(vector) != p.params.dim:
        raise DimensionMismatchError("tangent vector has wrong length")
    half = Fraction(1, 2) if p.exact and not any(isinstance(v, float) for v in vector) else 0.5
    ut = vector[2 * n]
    theta_of_v = ut + half * (
        sum(p.y[j] * vector[j] for j in range(n))
        - sum(p.x[j] * vector[n + j] for j in range(n))
    )
    return tuple(vector[: 2 * n]) + (theta_of_v,)


def pi_p(p: Point, q: Point) -> tuple:
    """Horizontal projection of q at base point p.

    Returns the 2n frame coefficients of sum x_j(q) X_j(p) + y_j(q) Y_j(p);
    the coefficients do not depend on p since the frame is orthonormal.
    """
    _check_compatible(p, q)
    return q.x + q.y


def pi_norm(coeffs: Sequence) -> float:
    return math.sqrt(float(sum(v * v for v in coeffs)))


class VerticalSplitting:
    """Orthogonal splitting H^n = W . V with V spanned by frame directions.

    ``v_indices`` are 1-based indices into (X_1..X_n, Y_1..Y_n); V may not
    contain a conjugate pair (j, j+n) since such a pair does not span an
    abelian horizontal subalgebra.  W is spanned by the remaining horizontal
    directions together with T.
    """

    def __init__(self, params: GroupParams, v_indices: Sequence[int]):
        idx = tuple(sorted(v_indices))
        if len(set(idx)) != len(idx):
            raise HeisCalcError("duplicate V direction")
        for i in idx:
            if not 1 <= i <= params.horizontal_dim:
                raise HeisCalcError(f"V direction {i} outside 1..{params.horizontal_dim}")
        for i in idx:
            partner = i + params.n if i <= params.n else i - params.n
            if partner in idx:
                raise HeisCalcError("V contains a conjugate pair and is not abelian")
        self.params = params
        self.v_indices = idx
        self.w_indices = tuple(
            i for i in range(1, params.horizontal_dim + 1) if i not in idx
        )

    @property
    def k(self) -> int:
        return len(self.v_indices)

    @property
    def w_dim(self) -> int:
        return self.params.dim - self.k

    def v_point(self, coeffs: Sequence, exact: bool = True) -> Point:
        """exp(sum coeffs_a v_a) as a group element."""
        n = self.params.n
        zero = Fraction(0) if exact else 0.0
        coords = [zero] * self.params.dim
        for c, i in zip(coeffs, self.v_indices):
            coords[i - 1] = Fraction(c) if exact else float(c)
        return Point.from_coords(self.params, coords, exact)

    def w_point(self, w_coords: Sequence, exact: bool = True) -> Point:
        """Point of W from its (2n+1-k) coordinates: the non-V horizontal ones, then t."""
        zero = Fraction(0) if exact else 0.0
        coords = [zero] * self.params.dim
        for c, i in zip(w_coords[:-1], self.w_indices):
            coords[i - 1] = Fraction(c) if exact else float(c)
        coords[-1] = Fraction(w_coords[-1]) if exact else float(w_coords[-1])
        return Point.from_coords(self.params, coords, exact)

    def w_coords_of(self, p: Point) -> tuple:
        coords = p.coords()
        return tuple(coords[i - 1] for i in self.w_indices) + (p.t,)

    def split(self, p: Point) -> tuple[Point, Point]:
        """Unique (w, v) with w in W, v in V and w * v = p.

        The V-coordinates of p are the coordinates of v because group
        multiplication is additive on horizontal components; then w = p * v^{-1}.
        """
        v = self.v_point([p.coords()[i - 1] for i in self.v_indices], p.exact)
        w = group_mul(p, inverse(v))
        return w, v


def pansu_differential(fs: Sequence, p: Point, q: Point) -> list:
    """P-differential of a C^1_H map at p applied to q.

    d_H f_p(q) = sum_i x_i(q) X_i f(p) + y_i(q) Y_i f(p), one value per
    component of ``fs``.  Each component must expose horizontal_derivative(j)
    returning a scalar function with evaluate(point).
    """
    n = p.params.n
    out = []
    for f in fs:
        val = None
        for j in range(1, 2 * n + 1):
            coeff = q.coords()[j - 1]
            term = coeff * f.horizontal_derivative(j).evaluate(p)
            val = term if val is None else val + term
        out.append(val)
    return out
