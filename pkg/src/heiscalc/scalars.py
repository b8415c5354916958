"""Coefficient functions: sparse rational polynomials, optionally bump-damped.

A :class:`Poly` is a sparse multivariate polynomial over Q in the 2n+1 group
coordinates (or in chart parameters, for parametrized patches).  A
:class:`SmoothScalar` is a Poly optionally multiplied by a compactly
supported radial factor

    u^(-den_pow) * exp(-exp_pow / u),    u(p) = 1 - |p - center|^2 / radius^2

on {u > 0} and zero outside.  This family is closed under coordinate and
horizontal derivatives: differentiating multiplies by a rational function
whose only poles sit on the support sphere, which the representation absorbs
into (den_pow, polynomial numerator).  Products of two bump factors with the
same support add their exp_pow, so the family is closed under products too.

Coordinate indices are 1-based throughout (1..n are x_j, n+1..2n are y_j,
2n+1 is t), matching the frame indices used by the exterior layer.
"""

from __future__ import annotations

import ast
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import GroupParams, Point
from .errors import HeisCalcError, IncompatibleBumpError

# Evaluation this close to the support sphere returns exactly 0; the true
# function and all derivatives vanish to infinite order there, and the
# rational prefactor would otherwise overflow.
U_CUTOFF = 2e-9


def _monomial_key(exps: tuple) -> tuple:
    return (sum(exps), exps)


class Poly:
    """Sparse polynomial over Q; terms map exponent tuples to coefficients."""

    __slots__ = ("nvars", "terms", "_compiled")

    def __init__(self, nvars: int, terms: dict | None = None):
        self.nvars = nvars
        clean: dict[tuple, Fraction] = {}
        for exps, coeff in (terms or {}).items():
            c = Fraction(coeff)
            if c == 0:
                continue
            e = tuple(int(v) for v in exps)
            if len(e) != nvars or any(v < 0 for v in e):
                raise HeisCalcError(f"bad exponent vector {e} for {nvars} variables")
            clean[e] = clean.get(e, Fraction(0)) + c
        self.terms = {e: c for e, c in clean.items() if c != 0}
        self._compiled = None

    # -- constructors -------------------------------------------------------

    @staticmethod
    def zero(nvars: int) -> "Poly":
        return Poly(nvars)

    @staticmethod
    def const(nvars: int, value) -> "Poly":
        return Poly(nvars, {(0,) * nvars: Fraction(value)})

    @staticmethod
    def var(nvars: int, index: int) -> "Poly":
        """The coordinate polynomial for the 1-based variable ``index``."""
        if not 1 <= index <= nvars:
            raise HeisCalcError(f"variable index {index} outside 1..{nvars}")
        e = [0] * nvars
        e[index - 1] = 1
        return Poly(nvars, {tuple(e): Fraction(1)})

    # -- ring operations ----------------------------------------------------

    def _check(self, other: "Poly") -> None:
        if self.nvars != other.nvars:
            raise HeisCalcError("polynomials in different variable counts")

    def __add__(self, other: "Poly") -> "Poly":
        self._check(other)
        terms = dict(self.terms)
        for e, c in other.terms.items():
            terms[e] = terms.get(e, Fraction(0)) + c
        return Poly(self.nvars, terms)

    def __neg__(self) -> "Poly":
        return Poly(self.nvars, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other: "Poly") -> "Poly":
        self._check(other)
        out: dict[tuple, Fraction] = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, Fraction(0)) + c1 * c2
        return Poly(self.nvars, out)

    def scale(self, factor) -> "Poly":
        f = Fraction(factor)
        return Poly(self.nvars, {e: f * c for e, c in self.terms.items()})

    def __pow__(self, k: int) -> "Poly":
        if k < 0:
            raise HeisCalcError("negative polynomial power")
        out = Poly.const(self.nvars, 1)
        base = self
        while k:
            if k & 1:
                out = out * base
            base = base * base
            k >>= 1
        return out

    def partial(self, index: int) -> "Poly":
        """Exact partial derivative in the 1-based variable ``index``."""
        i = index - 1
        out: dict[tuple, Fraction] = {}
        for e, c in self.terms.items():
            if e[i] == 0:
                continue
            e2 = list(e)
            e2[i] -= 1
            key = tuple(e2)
            out[key] = out.get(key, Fraction(0)) + c * e[i]
        return Poly(self.nvars, out)

    def substitute_const(self, index: int, value) -> "Poly":
        """Fix the 1-based variable ``index`` to an exact value and drop it."""
        i = index - 1
        v = Fraction(value)
        out: dict[tuple, Fraction] = {}
        for e, c in self.terms.items():
            key = e[:i] + e[i + 1 :]
            out[key] = out.get(key, Fraction(0)) + c * v ** e[i]
        return Poly(self.nvars - 1, out)

    def compose(self, args: Sequence["Poly"]) -> "Poly":
        """Substitute variable i by args[i-1]; all args share one variable space."""
        if len(args) != self.nvars:
            raise HeisCalcError("compose needs one polynomial per variable")
        nv = args[0].nvars
        out = Poly.zero(nv)
        for e, c in self.terms.items():
            term = Poly.const(nv, c)
            for arg, p in zip(args, e):
                if p:
                    term = term * arg**p
            out = out + term
        return out

    # -- queries ------------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def total_degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.nvars == other.nvars and self.terms == other.terms

    def __hash__(self) -> int:
        return hash((self.nvars, frozenset(self.terms.items())))

    def sorted_terms(self) -> list[tuple[tuple, Fraction]]:
        """Terms in graded lexicographic order (the canonical serialization order)."""
        return sorted(self.terms.items(), key=lambda item: _monomial_key(item[0]))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        parts = []
        for e, c in self.sorted_terms():
            mono = "*".join(
                f"v{i+1}" + (f"^{p}" if p > 1 else "")
                for i, p in enumerate(e)
                if p > 0
            )
            parts.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(parts)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, coords: Sequence):
        """Exact value at a rational point; float if any coordinate is float."""
        total = None
        for e, c in self.terms.items():
            term = c
            for v, p in zip(coords, e):
                if p:
                    term = term * v**p
            total = term if total is None else total + term
        if total is None:
            return Fraction(0) if not any(isinstance(v, float) for v in coords) else 0.0
        return total

    def _compile(self):
        if self._compiled is None:
            coeffs = np.array([float(c) for _, c in self.sorted_terms()])
            exps = np.array([e for e, _ in self.sorted_terms()], dtype=np.int64)
            self._compiled = (coeffs, exps)
        return self._compiled

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized evaluation at an (N, nvars) float array.

        All monomials are evaluated at once per chunk through per-variable
        power tables and a fancy-index gather; chunking caps peak memory.
        """
        pts = np.asarray(pts, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.nvars:
            raise HeisCalcError("point array has wrong shape")
        npts = pts.shape[0]
        if not self.terms:
            return np.zeros(npts)
        coeffs, exps = self._compile()
        nterms = len(coeffs)
        out = np.empty(npts)
        chunk = max(1024, min(npts, 4_000_000 // max(nterms, 1)))
        max_pows = exps.max(axis=0)
        for start in range(0, npts, chunk):
            block = pts[start : start + chunk]
            acc = np.repeat(coeffs[:, None], block.shape[0], axis=1)
            for i in range(self.nvars):
                mp = int(max_pows[i])
                if mp == 0:
                    continue
                pows = np.empty((mp + 1, block.shape[0]))
                pows[0] = 1.0
                for p in range(1, mp + 1):
                    pows[p] = pows[p - 1] * block[:, i]
                acc *= pows[exps[:, i]]
            out[start : start + chunk] = acc.sum(axis=0)
        return out


class Bump:
    """Support metadata of the radial factor; the polynomial part lives in base."""

    __slots__ = ("center", "radius", "den_pow", "exp_pow")

    def __init__(self, center: Sequence, radius, den_pow: int = 0, exp_pow: int = 1):
        self.center = tuple(Fraction(c) for c in center)
        self.radius = Fraction(radius)
        if self.radius <= 0:
            raise HeisCalcError("bump radius must be positive")
        if den_pow < 0 or exp_pow < 1:
            raise HeisCalcError("bad bump powers")
        self.den_pow = int(den_pow)
        self.exp_pow = int(exp_pow)

    def same_support(self, other: "Bump") -> bool:
        return self.center == other.center and self.radius == other.radius

    def u_poly(self, nvars: int) -> Poly:
        """u = 1 - sum (p_i - c_i)^2 / radius^2 as an exact polynomial."""
        if len(self.center) != nvars:
            raise HeisCalcError("bump center has wrong dimension")
        u = Poly.const(nvars, 1)
        inv_r2 = Fraction(1) / (self.radius * self.radius)
        for i, c in enumerate(self.center, start=1):
            d = Poly.var(nvars, i) + Poly.const(nvars, -c)
            u = u - (d * d).scale(inv_r2)
        return u

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Bump)
            and self.center == other.center
            and self.radius == other.radius
            and self.den_pow == other.den_pow
            and self.exp_pow == other.exp_pow
        )

    def __repr__(self) -> str:
        return (
            f"Bump(center={self.center}, radius={self.radius}, "
            f"den_pow={self.den_pow}, exp_pow={self.exp_pow})"
        )


class SmoothScalar:
    """base(p) / u(p)^den_pow * exp(-exp_pow/u(p)) on the bump support, else 0.

    Without a bump the value is just base(p).  Closed under +, *, scaling and
    all partial derivatives; sums require equal supports (a polynomial plus a
    bump-damped function leaves the family, which poly_arith reports as an
    incompatible-bump error).
    """

    __slots__ = ("nvars", "base", "bump")

    def __init__(self, nvars: int, base: Poly, bump: Bump | None = None):
        if base.nvars != nvars:
            raise HeisCalcError("base polynomial has wrong variable count")
        self.nvars = nvars
        self.base = base
        self.bump = None if (bump is not None and base.is_zero()) else bump
        if bump is not None and len(bump.center) != nvars:
            raise HeisCalcError("bump center has wrong dimension")

    # -- constructors -------------------------------------------------------

    @staticmethod
    def from_poly(poly: Poly) -> "SmoothScalar":
        return SmoothScalar(poly.nvars, poly)

    @staticmethod
    def const(nvars: int, value) -> "SmoothScalar":
        return SmoothScalar(nvars, Poly.const(nvars, value))

    @staticmethod
    def zero(nvars: int) -> "SmoothScalar":
        return SmoothScalar(nvars, Poly.zero(nvars))

    @staticmethod
    def bump_profile(nvars: int, center: Sequence, radius) -> "SmoothScalar":
        """The standard profile exp(-1/(1 - r^2)) supported in the given ball."""
        return SmoothScalar(nvars, Poly.const(nvars, 1), Bump(center, radius))

    def is_zero(self) -> bool:
        return self.base.is_zero()

    def is_plain(self) -> bool:
        return self.bump is None

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other: "SmoothScalar") -> None:
        if self.nvars != other.nvars:
            raise HeisCalcError("scalars in different variable counts")

    def __add__(self, other: "SmoothScalar") -> "SmoothScalar":
        self._check(other)
        if self.is_zero():
            return other
        if other.is_zero():
            return self
        if self.bump is None and other.bump is None:
            return SmoothScalar(self.nvars, self.base + other.base)
        if self.bump is None or other.bump is None:
            raise IncompatibleBumpError("cannot add a plain polynomial and a bump-damped scalar")
        a, b = self.bump, other.bump
        if not a.same_support(b) or a.exp_pow != b.exp_pow:
            raise IncompatibleBumpError("bump supports or profiles differ")
        m = max(a.den_pow, b.den_pow)
        u = a.u_poly(self.nvars)
        base = self.base * u ** (m - a.den_pow) + other.base * u ** (m - b.den_pow)
        return SmoothScalar(self.nvars, base, Bump(a.center, a.radius, m, a.exp_pow))

    def __neg__(self) -> "SmoothScalar":
        return SmoothScalar(self.nvars, -self.base, self.bump)

    def __sub__(self, other: "SmoothScalar") -> "SmoothScalar":
        return self + (-other)

    def __mul__(self, other: "SmoothScalar") -> "SmoothScalar":
        self._check(other)
        if self.bump is None and other.bump is None:
            return SmoothScalar(self.nvars, self.base * other.base)
        if self.bump is None or other.bump is None:
            plain, damped = (self, other) if self.bump is None else (other, self)
            return SmoothScalar(self.nvars, plain.base * damped.base, damped.bump)
        a, b = self.bump, other.bump
        if not a.same_support(b):
            raise IncompatibleBumpError("cannot multiply scalars with different bump supports")
        bump = Bump(a.center, a.radius, a.den_pow + b.den_pow, a.exp_pow + b.exp_pow)
        return SmoothScalar(self.nvars, self.base * other.base, bump)

    def scale(self, factor) -> "SmoothScalar":
        return SmoothScalar(self.nvars, self.base.scale(factor), self.bump)

    def mul_poly(self, poly: Poly) -> "SmoothScalar":
        return SmoothScalar(self.nvars, self.base * poly, self.bump)

    # -- derivatives ---------------------------------------------------------

    def partial(self, index: int) -> "SmoothScalar":
        """Exact partial derivative in the 1-based coordinate ``index``."""
        if self.bump is None:
            return SmoothScalar(self.nvars, self.base.partial(index))
        bp = self.bump
        u = bp.u_poly(self.nvars)
        du = u.partial(index)
        # d/dp [ b u^-m e^(-s/u) ] = [ b' u^2 - m b u' u + s b u' ] u^-(m+2) e^(-s/u)
        base = (
            self.base.partial(index) * u * u
            - self.base.scale(bp.den_pow) * du * u
            + self.base.scale(bp.exp_pow) * du
        )
        return SmoothScalar(
            self.nvars, base, Bump(bp.center, bp.radius, bp.den_pow + 2, bp.exp_pow)
        )

    def substitute_const(self, index: int, value) -> "SmoothScalar":
        """Partial evaluation; only supported for plain polynomial scalars."""
        if self.bump is not None:
            raise HeisCalcError("cannot substitute into a bump-damped scalar")
        return SmoothScalar(self.nvars - 1, self.base.substitute_const(index, value))

    def horizontal_derivative(self, j: int) -> "SmoothScalar":
        """Apply the left-invariant field W_j (1 <= j <= 2n) symbolically.

        X_j = d/dx_j - (y_j/2) d/dt and Y_j = d/dy_j + (x_j/2) d/dt; only
        meaningful when the variables are the 2n+1 group coordinates.
        """
        nvars = self.nvars
        if nvars % 2 == 0:
            raise HeisCalcError("horizontal derivative needs 2n+1 group coordinates")
        n = (nvars - 1) // 2
        if not 1 <= j <= 2 * n:
            raise HeisCalcError(f"horizontal index {j} outside 1..{2*n}")
        dt = self.partial(nvars)
        if j <= n:
            coeff = Poly.var(nvars, n + j).scale(Fraction(-1, 2))
            return self.partial(j) + dt.mul_poly(coeff)
        coeff = Poly.var(nvars, j - n).scale(Fraction(1, 2))
        return self.partial(j) + dt.mul_poly(coeff)

    def t_derivative(self) -> "SmoothScalar":
        return self.partial(self.nvars)

    # -- evaluation ----------------------------------------------------------

    def evaluate(self, point):
        """Value at a Point or coordinate sequence.

        Pure polynomials at rational points evaluate exactly; anything
        involving the bump factor evaluates in floating point.
        """
        coords = point.coords() if isinstance(point, Point) else tuple(point)
        if len(coords) != self.nvars:
            raise HeisCalcError("point has wrong dimension")
        if self.bump is None:
            return self.base.evaluate(coords)
        bp = self.bump
        u = float(bp.u_poly(self.nvars).evaluate(tuple(float(c) for c in coords)))
        if u <= U_CUTOFF:
            return 0.0
        b = float(self.base.evaluate(tuple(float(c) for c in coords)))
        return b * u ** (-bp.den_pow) * math.exp(-bp.exp_pow / u)

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        vals = self.base.eval_many(pts)
        if self.bump is None:
            return vals
        bp = self.bump
        u = bp.u_poly(self.nvars).eval_many(pts)
        out = np.zeros(pts.shape[0])
        mask = u > U_CUTOFF
        if np.any(mask):
            um = u[mask]
            out[mask] = vals[mask] * um ** (-bp.den_pow) * np.exp(-bp.exp_pow / um)
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, SmoothScalar):
            return NotImplemented
        if self.is_zero() and other.is_zero():
            return self.nvars == other.nvars
        return self.nvars == other.nvars and self.base == other.base and self.bump == other.bump

    def __hash__(self) -> int:
        return hash((self.nvars, self.base, repr(self.bump)))

    def __repr__(self) -> str:
        if self.bump is None:
            return f"SmoothScalar({self.base!r})"
        return f"SmoothScalar({self.base!r}, {self.bump!r})"


def poly_arith(a: SmoothScalar, b: SmoothScalar, op: str, factor=None) -> SmoothScalar:
    """Ring arithmetic dispatch: op in {"add", "mul", "scale"}."""
    if op == "add":
        return a + b
    if op == "mul":
        return a * b
    if op == "scale":
        if factor is None:
            raise HeisCalcError("scale needs a factor")
        return a.scale(factor)
    raise HeisCalcError(f"unknown op {op!r}")


# -- naming and parsing ------------------------------------------------------


def coordinate_names(params: GroupParams) -> dict[str, int]:
    """Maps coordinate names to 1-based indices; x/y alias x1/y1 when n = 1."""
    n = params.n
    names = {}
    for j in range(1, n + 1):
        names[f"x{j}"] = j
        names[f"y{j}"] = n + j
    names["t"] = 2 * n + 1
    if n == 1:
        names["x"] = 1
        names["y"] = 2
    return names


def parameter_names(m: int) -> dict[str, int]:
    names = {f"s{i}": i for i in range(1, m + 1)}
    if m == 1:
        names["s"] = 1
    return names


def parse_poly(src: str, nvars: int, names: dict[str, int]) -> Poly:
    """Parse an expression like "3/2*x1*t^2 - y2" into an exact Poly.

    Grammar: +, -, *, integer powers (^ or **), integer literals and integer
    ratios.  Anything else (floats, calls, other names) is rejected.
    """
    try:
        tree = ast.parse(src.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise HeisCalcError(f"cannot parse polynomial {src!r}: {exc}") from None

    def build(node) -> Poly:
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Add):
                return build(node.left) + build(node.right)
            if isinstance(node.op, ast.Sub):
                return build(node.left) - build(node.right)
            if isinstance(node.op, ast.Mult):
                return build(node.left) * build(node.right)
            if isinstance(node.op, ast.Div):
                denom = build(node.right)
                if denom.total_degree() != 0 or denom.is_zero():
                    raise HeisCalcError(f"in {src!r}: division only by nonzero constants")
                c = denom.terms[(0,) * nvars]
                return build(node.left).scale(Fraction(1) / c)
            if isinstance(node.op, ast.Pow):
                exp = node.right
                if not (isinstance(exp, ast.Constant) and isinstance(exp.value, int) and exp.value >= 0):
                    raise HeisCalcError(f"in {src!r}: powers must be nonnegative integers")
                return build(node.left) ** exp.value
            raise HeisCalcError(f"in {src!r}: unsupported operator")
        if isinstance(node, ast.UnaryOp):
            if isinstance(node.op, ast.USub):
                return -build(node.operand)
            if isinstance(node.op, ast.UAdd):
                return build(node.operand)
            raise HeisCalcError(f"in {src!r}: unsupported unary operator")
        if isinstance(node, ast.Constant):
            if isinstance(node.value, int):
                return Poly.const(nvars, node.value)
            raise HeisCalcError(f"in {src!r}: only integer literals are allowed")
        if isinstance(node, ast.Name):
            idx = names.get(node.id)
            if idx is None:
                raise HeisCalcError(f"in {src!r}: unknown variable {node.id!r}")
            return Poly.var(nvars, idx)
        raise HeisCalcError(f"in {src!r}: unsupported syntax")

    return build(tree)


# -- canonical serialization --------------------------------------------------


def poly_to_obj(poly: Poly) -> list[dict]:
    return [
        {"exponents": list(e), "num": str(c.numerator), "den": str(c.denominator)}
        for e, c in poly.sorted_terms()
    ]


def poly_from_obj(obj: Sequence[dict], nvars: int) -> Poly:
    terms = {}
    for item in obj:
        e = tuple(int(v) for v in item["exponents"])
        c = Fraction(int(item["num"]), int(item["den"]))
        terms[e] = terms.get(e, Fraction(0)) + c
    return Poly(nvars, terms)
