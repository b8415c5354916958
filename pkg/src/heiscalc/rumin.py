"""The Rumin complex on H^n.

Degrees k <= n are quotient classes modulo I^k = {lambda ^ theta + mu ^ dtheta};
degrees k >= n+1 are the subspaces J^k = {lambda : lambda ^ theta = lambda ^
dtheta = 0}.  The canonical quotient representative is the horizontal part
projected onto the orthogonal complement of Image(L: Lambda^{k-2} h_1 ->
Lambda^k h_1) under the frame inner product ("Lefschetz-primitive" normal
form); the projection matrices are exact rationals.

The unified differential d_c is the exterior derivative away from the middle
degree and the second-order operator

    D(alpha) = d(alpha - theta ^ L^{-1}((d alpha)_h1))

from degree n to n+1.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from . import ratlinalg
from .core import GroupParams
from .errors import DegreeMismatchError, HeisCalcError, MembershipError
from .exterior import (
    InvariantForm,
    MultiIndex,
    dtheta,
    index_subsets,
    merge_sign,
    theta_form,
)
from .scalars import SmoothScalar


def _wedge_dtheta_indices(idx: MultiIndex, n: int) -> list[tuple[int, MultiIndex]]:
    """Index expansion of theta^idx ^ dtheta = -sum_j theta^idx ^ theta_j ^ theta_{j+n}."""
    out = []
    for j in range(1, n + 1):
        res = merge_sign(idx, (j, n + j))
        if res is not None:
            sign, key = res
            out.append((-sign, key))
    return out


class LefschetzTable:
    """Exact matrices of L(lambda) = lambda ^ dtheta on horizontal forms.

    Built once per n and shared read-only: per-degree matrices in the sorted
    subset basis of Lambda^k h_1, the inverse at k = n-1, and the primitive
    projectors used by the quotient normal form.
    """

    _cache: dict[int, "LefschetzTable"] = {}

    def __init__(self, params: GroupParams):
        self.params = params
        n = params.n
        h = 2 * n
        self.bases = {k: index_subsets(h, k) for k in range(0, h + 1)}
        self.pos = {k: {idx: i for i, idx in enumerate(b)} for k, b in self.bases.items()}
        self.matrices: dict[int, ratlinalg.Mat] = {}
        for k in range(0, h - 1):
            rows = len(self.bases[k + 2])
            cols = len(self.bases[k])
            m = [[Fraction(0)] * cols for _ in range(rows)]
            for c, idx in enumerate(self.bases[k]):
                for sign, key in _wedge_dtheta_indices(idx, n):
                    m[self.pos[k + 2][key]][c] += sign
            self.matrices[k] = m
        mid = self.matrices[n - 1]
        if len(mid) != len(mid[0]):
            raise HeisCalcError("Lefschetz matrix at n-1 is not square")
        self.inverse_mid = ratlinalg.inverse(mid)
        self.primitive_projectors: dict[int, ratlinalg.Mat] = {}
        for k in range(0, n + 1):
            dim_k = len(self.bases[k])
            if k < 2:
                self.primitive_projectors[k] = ratlinalg.identity(dim_k)
            else:
                self.primitive_projectors[k] = ratlinalg.orthogonal_complement_projector(
                    self.matrices[k - 2]
                )

    @classmethod
    def for_group(cls, params: GroupParams) -> "LefschetzTable":
        table = cls._cache.get(params.n)
        if table is None:
            table = cls(params)
            cls._cache[params.n] = table
        return table


def _apply_matrix(
    m: ratlinalg.Mat,
    form: InvariantForm,
    in_basis: list[MultiIndex],
    out_basis: list[MultiIndex],
) -> InvariantForm:
    """Coefficient-wise application of an exact matrix to a horizontal form."""
    params = form.params
    out_terms: dict[MultiIndex, SmoothScalar] = {}
    in_pos = {idx: i for i, idx in enumerate(in_basis)}
    for idx, coeff in form.terms.items():
        col = in_pos.get(idx)
        if col is None:
            raise HeisCalcError(f"form term {idx} outside the horizontal basis")
        for r, row in enumerate(m):
            entry = row[col]
            if entry == 0:
                continue
            term = coeff.scale(entry)
            key = out_basis[r]
            out_terms[key] = out_terms[key] + term if key in out_terms else term
    deg = len(out_basis[0]) if out_basis else 0
    return InvariantForm(params, deg, out_terms)


def lefschetz(form: InvariantForm) -> InvariantForm:
    """L(lambda) = lambda ^ dtheta (the form must be horizontal)."""
    if not form.is_horizontal():
        raise HeisCalcError("Lefschetz operator acts on horizontal forms")
    return form.wedge(dtheta(form.params))


def lefschetz_inverse(form: InvariantForm) -> InvariantForm:
    """Inverse of L: Lambda^{n-1} h_1 -> Lambda^{n+1} h_1 on degree n+1 input."""
    params = form.params
    n = params.n
    if form.degree != n + 1:
        raise DegreeMismatchError("Lefschetz inverse needs a degree n+1 form")
    if not form.is_horizontal():
        raise HeisCalcError("Lefschetz inverse acts on horizontal forms")
    table = LefschetzTable.for_group(params)
    return _apply_matrix(table.inverse_mid, form, table.bases[n + 1], table.bases[n - 1])


def j_membership(form: InvariantForm) -> bool:
    """Exact test of lambda ^ theta = 0 and lambda ^ dtheta = 0 (degree >= n+1)."""
    params = form.params
    if form.degree < params.n + 1:
        raise DegreeMismatchError("J-membership only applies in degrees >= n+1")
    return form.wedge(theta_form(params)).is_zero() and form.wedge(dtheta(params)).is_zero()


@dataclass(frozen=True)
class RuminClass:
    """A Heisenberg form: quotient class (k <= n) or J^k element (k >= n+1).

    ``representative`` is the canonical representative in the quotient regime
    and the form itself in the subspace regime.
    """

    params: GroupParams
    degree: int
    representative: InvariantForm

    @property
    def regime(self) -> str:
        return "quotient" if self.degree <= self.params.n else "subspace"

    def is_zero(self) -> bool:
        return self.representative.is_zero()

    def __eq__(self, other) -> bool:
        if not isinstance(other, RuminClass):
            return NotImplemented
        return (
            self.params == other.params
            and self.degree == other.degree
            and self.representative == other.representative
        )


def quotient_normal_form(form: InvariantForm) -> RuminClass:
    """Canonical representative: horizontal part, Lefschetz-primitive projection."""
    params = form.params
    n = params.n
    if form.degree > n:
        raise DegreeMismatchError("quotient regime only applies in degrees <= n")
    h1, _ = form.horizontal_decompose()
    table = LefschetzTable.for_group(params)
    k = form.degree
    rep = _apply_matrix(table.primitive_projectors[k], h1, table.bases[k], table.bases[k])
    rep = InvariantForm(params, k, rep.terms)
    return RuminClass(params, k, rep)


def make_class(form: InvariantForm) -> RuminClass:
    """Wrap an arbitrary form as a Heisenberg form of its degree."""
    params = form.params
    if form.degree <= params.n:
        return quotient_normal_form(form)
    if not j_membership(form):
        raise MembershipError(
            f"degree {form.degree} form is not in the subspace regime (J) "
        )
    return RuminClass(params, form.degree, form)


def rumin_D(alpha: RuminClass) -> RuminClass:
    """The second-order middle differential D(alpha) = d(alpha - theta ^ L^{-1}((d alpha)_h1))."""
    params = alpha.params
    n = params.n
    if alpha.degree != n:
        raise DegreeMismatchError("D acts on degree n classes")
    rep = alpha.representative
    d_rep = rep.exterior_derivative()
    d_h1, _ = d_rep.horizontal_decompose()
    ell = lefschetz_inverse(d_h1)
    corrected = rep - theta_form(params).wedge(ell)
    result = corrected.exterior_derivative()
    if not j_membership(result):
        raise MembershipError("D produced a form outside J^{n+1}; this is a bug")
    return RuminClass(params, n + 1, result)


def d_c(omega: RuminClass) -> RuminClass:
    """The Rumin differential: d with renormalization off the middle degree, D at it."""
    params = omega.params
    n = params.n
    k = omega.degree
    if k == n:
        return rumin_D(omega)
    d_rep = omega.representative.exterior_derivative()
    if k < n:
        return quotient_normal_form(d_rep)
    if not j_membership(d_rep):
        raise MembershipError("d left the subspace regime; this is a bug")
    return RuminClass(params, k + 1, d_rep)


# -- dimension bookkeeping ----------------------------------------------------


def _expand_in_basis(idx_terms: dict[MultiIndex, Fraction], basis_pos: dict) -> ratlinalg.Vec:
    v = [Fraction(0)] * len(basis_pos)
    for idx, c in idx_terms.items():
        v[basis_pos[idx]] += c
    return v


def _wedge_index(idx: MultiIndex, extra: MultiIndex) -> dict[MultiIndex, Fraction]:
    res = merge_sign(idx, extra)
    if res is None:
        return {}
    sign, key = res
    return {key: Fraction(sign)}


def dim_quotient(params: GroupParams, k: int) -> int:
    """dim(Lambda^k h / I^k) by exact rank of the generator span of I^k."""
    dim = params.dim
    n = params.n
    if k == 0:
        return 1
    basis_k = index_subsets(dim, k)
    pos = {idx: i for i, idx in enumerate(basis_k)}
    rows: ratlinalg.Mat = []
    for lam in index_subsets(dim, k - 1):
        rows.append(_expand_in_basis(_wedge_index(lam, (dim,)), pos))
    if k >= 2:
        for mu in index_subsets(dim, k - 2):
            acc: dict[MultiIndex, Fraction] = {}
            for j in range(1, n + 1):
                for idx, c in _wedge_index(mu, (j, n + j)).items():
                    acc[idx] = acc.get(idx, Fraction(0)) - c
            rows.append(_expand_in_basis(acc, pos))
    return comb(dim, k) - ratlinalg.rank(rows)


def dim_J(params: GroupParams, k: int) -> int:
    """dim J^k as the nullity of lambda -> (lambda ^ theta, lambda ^ dtheta)."""
    dim = params.dim
    n = params.n
    basis_k = index_subsets(dim, k)
    basis_t = index_subsets(dim, k + 1) if k + 1 <= dim else []
    basis_d = index_subsets(dim, k + 2) if k + 2 <= dim else []
    pos_t = {idx: i for i, idx in enumerate(basis_t)}
    pos_d = {idx: i for i, idx in enumerate(basis_d)}
    rows = []
    for r in range(len(basis_t) + len(basis_d)):
        rows.append([Fraction(0)] * len(basis_k))
    for c, lam in enumerate(basis_k):
        for idx, val in _wedge_index(lam, (dim,)).items():
            rows[pos_t[idx]][c] += val
        for j in range(1, n + 1):
            for idx, val in _wedge_index(lam, (j, n + j)).items():
                rows[len(basis_t) + pos_d[idx]][c] -= val
    if not rows:
        return comb(dim, k)
    return comb(dim, k) - ratlinalg.rank(rows)


def dimension_table(params: GroupParams) -> dict[int, int]:
    """degree -> dim Omega^k_H for k = 0 .. 2n+1."""
    out = {}
    for k in range(0, params.dim + 1):
        out[k] = dim_quotient(params, k) if k <= params.n else dim_J(params, k)
    return out
