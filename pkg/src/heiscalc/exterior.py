"""Exterior algebra over the left-invariant (co)frame of H^n.

Basis conventions: indices 1..2n+1 name the frame W_1..W_{2n+1} =
(X_1..X_n, Y_1..Y_n, T) and the dual coframe theta_1..theta_{2n}, theta.
A MultiIndex is a strictly increasing tuple of such indices.  Forms carry
SmoothScalar coefficients; multivectors carry numbers.

The positive volume element is X_1 ^ ... ^ X_n ^ Y_1 ^ ... ^ Y_n ^ T, i.e.
the basis wedge of (1, 2, ..., 2n+1); all Hodge signs follow from it.

d(theta_i) = 0 for i <= 2n and d(theta) = -sum_j theta_j ^ theta_{j+n},
frozen here once; a round-trip test re-derives it from the coordinate
expression of theta.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .core import GroupParams, Point
from .errors import DegreeMismatchError, HeisCalcError
from .scalars import Poly, SmoothScalar

MultiIndex = tuple[int, ...]


def merge_sign(i: MultiIndex, j: MultiIndex) -> tuple[int, MultiIndex] | None:
    """Sign and sorted union of two disjoint sorted index tuples; None if they overlap."""
    if set(i) & set(j):
        return None
    merged = []
    sign = 1
    a, b = 0, 0
    while a < len(i) or b < len(j):
        if b >= len(j) or (a < len(i) and i[a] < j[b]):
            merged.append(i[a])
            a += 1
        else:
            # j[b] jumps over the remaining entries of i
            if (len(i) - a) % 2 == 1:
                sign = -sign
            merged.append(j[b])
            b += 1
    return sign, tuple(merged)


def complement(i: MultiIndex, dim: int) -> MultiIndex:
    s = set(i)
    return tuple(k for k in range(1, dim + 1) if k not in s)


def hodge_sign(i: MultiIndex, dim: int) -> int:
    res = merge_sign(i, complement(i, dim))
    assert res is not None
    return res[0]


def index_subsets(dim: int, k: int) -> list[MultiIndex]:
    """All strictly increasing k-tuples from 1..dim, lexicographically."""
    from itertools import combinations

    return [tuple(c) for c in combinations(range(1, dim + 1), k)]


class InvariantForm:
    """A k-form in the invariant coframe with SmoothScalar coefficients."""

    __slots__ = ("params", "degree", "terms")

    def __init__(self, params: GroupParams, degree: int, terms: dict | None = None):
        if terms and not 0 <= degree <= params.dim:
            raise HeisCalcError(f"degree {degree} outside 0..{params.dim}")
        self.params = params
        self.degree = degree
        clean: dict[MultiIndex, SmoothScalar] = {}
        for idx, coeff in (terms or {}).items():
            key = tuple(int(v) for v in idx)
            if len(key) != degree or list(key) != sorted(set(key)):
                raise HeisCalcError(f"bad multi-index {key} for degree {degree}")
            if any(not 1 <= v <= params.dim for v in key):
                raise HeisCalcError(f"index out of range in {key}")
            if key in clean:
                coeff = clean[key] + coeff
            if not coeff.is_zero():
                clean[key] = coeff
            elif key in clean:
                del clean[key]
        self.terms = clean

    # -- constructors --------------------------------------------------------

    @staticmethod
    def zero(params: GroupParams, degree: int) -> "InvariantForm":
        return InvariantForm(params, degree, {})

    @staticmethod
    def monomial(params: GroupParams, indices: Sequence[int], coeff) -> "InvariantForm":
        idx = tuple(indices)
        if isinstance(coeff, Poly):
            coeff = SmoothScalar.from_poly(coeff)
        elif not isinstance(coeff, SmoothScalar):
            coeff = SmoothScalar.const(params.dim, coeff)
        return InvariantForm(params, len(idx), {idx: coeff})

    @staticmethod
    def from_scalar(params: GroupParams, coeff) -> "InvariantForm":
        return InvariantForm.monomial(params, (), coeff)

    # -- linear structure ------------------------------------------------------

    def _check(self, other: "InvariantForm") -> None:
        if self.params != other.params:
            raise HeisCalcError("forms on different groups")
        if self.degree != other.degree:
            raise DegreeMismatchError("forms of different degree")

    def __add__(self, other: "InvariantForm") -> "InvariantForm":
        self._check(other)
        terms = dict(self.terms)
        for idx, c in other.terms.items():
            terms[idx] = terms[idx] + c if idx in terms else c
        return InvariantForm(self.params, self.degree, terms)

    def __neg__(self) -> "InvariantForm":
        return InvariantForm(self.params, self.degree, {i: -c for i, c in self.terms.items()})

    def __sub__(self, other: "InvariantForm") -> "InvariantForm":
        return self + (-other)

    def scale(self, factor) -> "InvariantForm":
        return InvariantForm(
            self.params, self.degree, {i: c.scale(factor) for i, c in self.terms.items()}
        )

    def mul_scalar(self, s: SmoothScalar) -> "InvariantForm":
        return InvariantForm(
            self.params, self.degree, {i: c * s for i, c in self.terms.items()}
        )

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, InvariantForm):
            return NotImplemented
        return (self - other).is_zero() if self.degree == other.degree else False

    def __hash__(self):
        raise TypeError("InvariantForm is unhashable")

    def __repr__(self) -> str:
        if not self.terms:
            return f"0 (degree {self.degree})"
        bits = [f"[{','.join(map(str, i))}]: {c!r}" for i, c in sorted(self.terms.items())]
        return " + ".join(bits)

    # -- multiplicative structure ----------------------------------------------

    def wedge(self, other: "InvariantForm") -> "InvariantForm":
        if self.params != other.params:
            raise HeisCalcError("forms on different groups")
        deg = self.degree + other.degree
        if deg > self.params.dim:
            return InvariantForm.zero(self.params, deg)
        out: dict[MultiIndex, SmoothScalar] = {}
        for i1, c1 in self.terms.items():
            for i2, c2 in other.terms.items():
                res = merge_sign(i1, i2)
                if res is None:
                    continue
                sign, key = res
                term = (c1 * c2).scale(sign)
                out[key] = out[key] + term if key in out else term
        return InvariantForm(self.params, deg, out)

    # -- structure maps ----------------------------------------------------------

    def horizontal_decompose(self) -> tuple["InvariantForm", "InvariantForm"]:
        """Split as lambda = h1part + thetapart ^ theta (theta index = 2n+1)."""
        top = self.params.dim
        h1: dict[MultiIndex, SmoothScalar] = {}
        th: dict[MultiIndex, SmoothScalar] = {}
        for idx, c in self.terms.items():
            if idx and idx[-1] == top:
                th[idx[:-1]] = c
            else:
                h1[idx] = c
        return (
            InvariantForm(self.params, self.degree, h1),
            InvariantForm(self.params, self.degree - 1, th),
        )

    def is_horizontal(self) -> bool:
        top = self.params.dim
        return all(top not in idx for idx in self.terms)

    def exterior_derivative(self) -> "InvariantForm":
        """d in the invariant coframe.

        d(c theta^I) = sum_i (W_i c) theta_i ^ theta^I + (T c) theta ^ theta^I
        + c d(theta^I), where d(theta^I) is nonzero only when theta^I ends in
        theta, contributing (-1)^(k-1) theta^(I') ^ dtheta.
        """
        params = self.params
        n = params.n
        top = params.dim
        out = InvariantForm.zero(params, self.degree + 1)
        if self.degree + 1 > top:
            return out
        acc: dict[MultiIndex, SmoothScalar] = {}

        def add(key: MultiIndex, coeff: SmoothScalar) -> None:
            if key in acc:
                acc[key] = acc[key] + coeff
            else:
                acc[key] = coeff

        for idx, c in self.terms.items():
            for i in range(1, 2 * n + 1):
                dc = c.horizontal_derivative(i)
                if dc.is_zero():
                    continue
                res = merge_sign((i,), idx)
                if res is None:
                    continue
                sign, key = res
                add(key, dc.scale(sign))
            tc = c.t_derivative()
            if not tc.is_zero():
                res = merge_sign((top,), idx)
                if res is not None:
                    sign, key = res
                    add(key, tc.scale(sign))
            if idx and idx[-1] == top:
                body = idx[:-1]
                lead = -1 if (len(idx) - 1) % 2 else 1  # (-1)^(k-1)
                for j in range(1, n + 1):
                    res = merge_sign(body, (j, n + j))
                    if res is None:
                        continue
                    sign, key = res
                    add(key, c.scale(-lead * sign))
        return InvariantForm(params, self.degree + 1, acc)

    # -- evaluation ------------------------------------------------------------------

    def coefficients_at(self, p: Point) -> dict[MultiIndex, object]:
        return {idx: c.evaluate(p) for idx, c in self.terms.items()}

    def eval_terms_many(self, pts: np.ndarray) -> dict[MultiIndex, np.ndarray]:
        return {idx: c.eval_many(pts) for idx, c in self.terms.items()}


def dtheta(params: GroupParams) -> InvariantForm:
    """d of the contact form: -sum_j theta_j ^ theta_{j+n} (frozen convention)."""
    n = params.n
    terms = {
        (j, n + j): SmoothScalar.const(params.dim, Fraction(-1)) for j in range(1, n + 1)
    }
    return InvariantForm(params, 2, terms)


def theta_form(params: GroupParams) -> InvariantForm:
    return InvariantForm.monomial(params, (params.dim,), Fraction(1))


def volume_form(params: GroupParams) -> InvariantForm:
    return InvariantForm.monomial(params, tuple(range(1, params.dim + 1)), Fraction(1))


class MultiVector:
    """A k-vector in the frame basis with numeric (rational or float) coefficients."""

    __slots__ = ("params", "degree", "terms")

    def __init__(self, params: GroupParams, degree: int, terms: dict | None = None):
        self.params = params
        self.degree = degree
        clean: dict[MultiIndex, object] = {}
        for idx, coeff in (terms or {}).items():
            key = tuple(int(v) for v in idx)
            if len(key) != degree or list(key) != sorted(set(key)):
                raise HeisCalcError(f"bad multi-index {key} for degree {degree}")
            if any(not 1 <= v <= params.dim for v in key):
                raise HeisCalcError(f"index out of range in {key}")
            if key in clean:
                coeff = clean[key] + coeff
            if coeff != 0:
                clean[key] = coeff
            elif key in clean:
                del clean[key]
        self.terms = clean

    @staticmethod
    def zero(params: GroupParams, degree: int) -> "MultiVector":
        return MultiVector(params, degree, {})

    @staticmethod
    def basis(params: GroupParams, indices: Sequence[int]) -> "MultiVector":
        return MultiVector(params, len(tuple(indices)), {tuple(indices): Fraction(1)})

    @staticmethod
    def from_frame_components(params: GroupParams, coeffs: Sequence) -> "MultiVector":
        """Degree-1 vector from its 2n+1 (or 2n horizontal) frame components."""
        terms = {(i + 1,): c for i, c in enumerate(coeffs) if c != 0}
        return MultiVector(params, 1, terms)

    def _check(self, other: "MultiVector") -> None:
        if self.params != other.params:
            raise HeisCalcError("multivectors on different groups")
        if self.degree != other.degree:
            raise DegreeMismatchError("multivectors of different degree")

    def __add__(self, other: "MultiVector") -> "MultiVector":
        self._check(other)
        terms = dict(self.terms)
        for idx, c in other.terms.items():
            terms[idx] = terms.get(idx, 0) + c
        return MultiVector(self.params, self.degree, terms)

    def __neg__(self) -> "MultiVector":
        return MultiVector(self.params, self.degree, {i: -c for i, c in self.terms.items()})

    def __sub__(self, other: "MultiVector") -> "MultiVector":
        return self + (-other)

    def scale(self, factor) -> "MultiVector":
        return MultiVector(
            self.params, self.degree, {i: factor * c for i, c in self.terms.items()}
        )

    def wedge(self, other: "MultiVector") -> "MultiVector":
        if self.params != other.params:
            raise HeisCalcError("multivectors on different groups")
        deg = self.degree + other.degree
        if deg > self.params.dim:
            return MultiVector.zero(self.params, deg)
        out: dict[MultiIndex, object] = {}
        for i1, c1 in self.terms.items():
            for i2, c2 in other.terms.items():
                res = merge_sign(i1, i2)
                if res is None:
                    continue
                sign, key = res
                out[key] = out.get(key, 0) + sign * c1 * c2
        return MultiVector(self.params, deg, out)

    def hodge(self) -> "MultiVector":
        """The Hodge dual: v ^ *v = |v|^2 vol on basis elements."""
        dim = self.params.dim
        out = {}
        for idx, c in self.terms.items():
            out_key = complement(idx, dim)
            sign = hodge_sign(idx, dim)
            out[out_key] = out.get(out_key, 0) + sign * c
        return MultiVector(self.params, dim - self.degree, out)

    def inner(self, other: "MultiVector"):
        """Frame inner product (the basis of index wedges is orthonormal)."""
        self._check(other)
        return sum(
            (c * other.terms[i] for i, c in self.terms.items() if i in other.terms),
            Fraction(0) if self._exact() and other._exact() else 0.0,
        )

    def _exact(self) -> bool:
        return all(not isinstance(c, float) for c in self.terms.values())

    def norm_sq(self):
        return sum((c * c for c in self.terms.values()), Fraction(0) if self._exact() else 0.0)

    def norm(self) -> float:
        return float(self.norm_sq()) ** 0.5

    def unit(self) -> "MultiVector":
        n = self.norm()
        if n == 0:
            raise HeisCalcError("cannot normalize the zero multivector")
        return MultiVector(
            self.params, self.degree, {i: float(c) / n for i, c in self.terms.items()}
        )

    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        if not isinstance(other, MultiVector):
            return NotImplemented
        return self.params == other.params and self.degree == other.degree and (
            (self - other).is_zero()
        )

    def __hash__(self):
        raise TypeError("MultiVector is unhashable")

    def __repr__(self) -> str:
        if not self.terms:
            return f"0 (degree {self.degree})"
        bits = [f"W[{','.join(map(str, i))}]*{c}" for i, c in sorted(self.terms.items())]
        return " + ".join(bits)


def form_to_obj(form: InvariantForm) -> dict:
    """Canonical serialization: degree plus sorted terms with Poly payloads."""
    from .scalars import poly_to_obj

    terms = []
    for idx in sorted(form.terms):
        coeff = form.terms[idx]
        item = {"indices": list(idx), "coeff": poly_to_obj(coeff.base)}
        if coeff.bump is not None:
            b = coeff.bump
            item["bump"] = {
                "center": [str(c) for c in b.center],
                "radius": str(b.radius),
                "den_pow": b.den_pow,
                "exp_pow": b.exp_pow,
            }
        terms.append(item)
    return {"degree": form.degree, "terms": terms}


def pair(v: MultiVector, omega: InvariantForm, p: Point):
    """<v | omega> at p: dual-basis contraction of equal degrees."""
    if v.degree != omega.degree:
        raise DegreeMismatchError(
            f"pairing degree {v.degree} vector with degree {omega.degree} form"
        )
    total = None
    for idx, c in v.terms.items():
        co = omega.terms.get(idx)
        if co is None:
            continue
        term = c * co.evaluate(p)
        total = term if total is None else total + term
    if total is None:
        return Fraction(0) if v._exact() else 0.0
    return total


# -- coordinate coframe (dx_1..dx_n, dy_1..dy_n, dt) and conversions ---------


class CoordinateForm:
    """A form written in the coordinate coframe; index 2n+1 means dt.

    Only what the invariant <-> coordinate conversion boundary and pullbacks
    need: linear structure, wedge, and the flat exterior derivative.
    """

    __slots__ = ("params", "degree", "terms")

    def __init__(self, params: GroupParams, degree: int, terms: dict | None = None):
        self.params = params
        self.degree = degree
        clean: dict[MultiIndex, SmoothScalar] = {}
        for idx, coeff in (terms or {}).items():
            key = tuple(int(v) for v in idx)
            if key in clean:
                coeff = clean[key] + coeff
            if not coeff.is_zero():
                clean[key] = coeff
            elif key in clean:
                del clean[key]
        self.terms = clean

    @staticmethod
    def zero(params: GroupParams, degree: int) -> "CoordinateForm":
        return CoordinateForm(params, degree, {})

    @staticmethod
    def monomial(params: GroupParams, indices: Sequence[int], coeff) -> "CoordinateForm":
        if isinstance(coeff, Poly):
            coeff = SmoothScalar.from_poly(coeff)
        elif not isinstance(coeff, SmoothScalar):
            coeff = SmoothScalar.const(params.dim, coeff)
        return CoordinateForm(params, len(tuple(indices)), {tuple(indices): coeff})

    def __add__(self, other: "CoordinateForm") -> "CoordinateForm":
        terms = dict(self.terms)
        for idx, c in other.terms.items():
            terms[idx] = terms[idx] + c if idx in terms else c
        return CoordinateForm(self.params, self.degree, terms)

    def __neg__(self) -> "CoordinateForm":
        return CoordinateForm(self.params, self.degree, {i: -c for i, c in self.terms.items()})

    def __sub__(self, other: "CoordinateForm") -> "CoordinateForm":
        return self + (-other)

    def scale(self, factor) -> "CoordinateForm":
        return CoordinateForm(
            self.params, self.degree, {i: c.scale(factor) for i, c in self.terms.items()}
        )

    def wedge(self, other: "CoordinateForm") -> "CoordinateForm":
        deg = self.degree + other.degree
        if deg > self.params.dim:
            return CoordinateForm.zero(self.params, deg)
        out: dict[MultiIndex, SmoothScalar] = {}
        for i1, c1 in self.terms.items():
            for i2, c2 in other.terms.items():
                res = merge_sign(i1, i2)
                if res is None:
                    continue
                sign, key = res
                term = (c1 * c2).scale(sign)
                out[key] = out[key] + term if key in out else term
        return CoordinateForm(self.params, deg, out)

    def exterior_derivative(self) -> "CoordinateForm":
        """Flat d: the coordinate coframe is closed."""
        out: dict[MultiIndex, SmoothScalar] = {}
        for idx, c in self.terms.items():
            for i in range(1, self.params.dim + 1):
                dc = c.partial(i)
                if dc.is_zero():
                    continue
                res = merge_sign((i,), idx)
                if res is None:
                    continue
                sign, key = res
                term = dc.scale(sign)
                out[key] = out[key] + term if key in out else term
        return CoordinateForm(self.params, self.degree + 1, out)

    def is_zero(self) -> bool:
        return not self.terms

    def eval_terms_many(self, pts: np.ndarray) -> dict[MultiIndex, np.ndarray]:
        return {idx: c.eval_many(pts) for idx, c in self.terms.items()}


def theta_coordinate(params: GroupParams) -> CoordinateForm:
    """theta = dt + (1/2) sum_j (y_j dx_j - x_j dy_j)."""
    n = params.n
    dim = params.dim
    out = CoordinateForm.monomial(params, (dim,), Fraction(1))
    for j in range(1, n + 1):
        out = out + CoordinateForm.monomial(
            params, (j,), Poly.var(dim, n + j).scale(Fraction(1, 2))
        )
        out = out + CoordinateForm.monomial(
            params, (n + j,), Poly.var(dim, j).scale(Fraction(-1, 2))
        )
    return out


def dt_invariant(params: GroupParams) -> InvariantForm:
    """dt = theta - (1/2) sum_j (y_j theta_j - x_j theta_{j+n})."""
    n = params.n
    dim = params.dim
    out = InvariantForm.monomial(params, (dim,), Fraction(1))
    for j in range(1, n + 1):
        out = out + InvariantForm.monomial(
            params, (j,), Poly.var(dim, n + j).scale(Fraction(-1, 2))
        )
        out = out + InvariantForm.monomial(
            params, (n + j,), Poly.var(dim, j).scale(Fraction(1, 2))
        )
    return out


def coordinate_to_invariant(form: CoordinateForm) -> InvariantForm:
    """Substitute dx_i -> theta_i, dt -> theta - (1/2) sum (y_j theta_j - x_j theta_{j+n})."""
    params = form.params
    dim = params.dim
    basis_images = [
        InvariantForm.monomial(params, (i,), Fraction(1)) for i in range(1, dim)
    ] + [dt_invariant(params)]
    out = InvariantForm.zero(params, form.degree)
    for idx, c in form.terms.items():
        piece = InvariantForm.from_scalar(params, c)
        for i in idx:
            piece = piece.wedge(basis_images[i - 1])
        out = out + piece
    return out


def invariant_to_coordinate(form: InvariantForm) -> CoordinateForm:
    """Substitute theta_i -> dx_i/dy_i, theta -> its coordinate expression."""
    params = form.params
    dim = params.dim
    basis_images = [
        CoordinateForm.monomial(params, (i,), Fraction(1)) for i in range(1, dim)
    ] + [theta_coordinate(params)]
    out = CoordinateForm.zero(params, form.degree)
    for idx, c in form.terms.items():
        piece = CoordinateForm.monomial(params, (), c)
        for i in idx:
            piece = piece.wedge(basis_images[i - 1])
        out = out + piece
    return out
