"""Exact linear algebra over the rationals.

Small dense matrices only (the largest that occur are a few hundred rows).
Matrices are lists of lists of :class:`fractions.Fraction`; vectors are lists.
Everything here is pure and allocation-happy, which is fine at these sizes —
the point is exactness, not speed.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Mat = list[list[Fraction]]
Vec = list[Fraction]

ZERO = Fraction(0)
ONE = Fraction(1)


def mat(rows: Sequence[Sequence]) -> Mat:
    return [[Fraction(v) for v in row] for row in rows]


def identity(n: int) -> Mat:
    return [[ONE if i == j else ZERO for j in range(n)] for i in range(n)]


def transpose(a: Mat) -> Mat:
    return [list(col) for col in zip(*a)] if a else []


def matmul(a: Mat, b: Mat) -> Mat:
    bt = transpose(b)
    return [[sum((x * y for x, y in zip(row, col)), ZERO) for col in bt] for row in a]


def matvec(a: Mat, v: Vec) -> Vec:
    return [sum((x * y for x, y in zip(row, v)), ZERO) for row in a]


def rref(a: Mat) -> tuple[Mat, list[int]]:
    """Reduced row echelon form; returns (R, pivot column indices)."""
    r = [row[:] for row in a]
    if not r:
        return r, []
    nrows, ncols = len(r), len(r[0])
    pivots: list[int] = []
    lead = 0
    for col in range(ncols):
        if lead >= nrows:
            break
        piv = next((i for i in range(lead, nrows) if r[i][col] != 0), None)
        if piv is None:
            continue
        r[lead], r[piv] = r[piv], r[lead]
        inv = ONE / r[lead][col]
        r[lead] = [v * inv for v in r[lead]]
        for i in range(nrows):
            if i != lead and r[i][col] != 0:
                f = r[i][col]
                r[i] = [vi - f * vl for vi, vl in zip(r[i], r[lead])]
        pivots.append(col)
        lead += 1
    return r, pivots


def rank(a: Mat) -> int:
    return len(rref(a)[1])


def nullspace(a: Mat) -> list[Vec]:
    """Basis of the right nullspace of a (possibly empty list)."""
    if not a:
        return []
    ncols = len(a[0])
    r, pivots = rref(a)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        v = [ZERO] * ncols
        v[f] = ONE
        for i, p in enumerate(pivots):
            v[p] = -r[i][f]
        basis.append(v)
    return basis


def solve(a: Mat, b: Vec) -> Vec | None:
    """One solution of a x = b, or None if inconsistent."""
    if not a:
        return [] if all(v == 0 for v in b) else None
    ncols = len(a[0])
    aug = [row[:] + [bv] for row, bv in zip(a, b)]
    r, pivots = rref(aug)
    for row in r:
        if all(v == 0 for v in row[:-1]) and row[-1] != 0:
            return None
    x = [ZERO] * ncols
    for i, p in enumerate(pivots):
        if p == ncols:
            return None
        x[p] = r[i][-1]
    return x


def inverse(a: Mat) -> Mat:
    n = len(a)
    aug = [row[:] + identity(n)[i] for i, row in enumerate(a)]
    r, pivots = rref(aug)
    if pivots != list(range(n)):
        raise ValueError("matrix is singular")
    return [row[n:] for row in r]


def det(a: Mat) -> Fraction:
    """Determinant by fraction-free (Bareiss) elimination."""
    n = len(a)
    if n == 0:
        return ONE
    m = [row[:] for row in a]
    sign = 1
    prev = ONE
    for k in range(n - 1):
        if m[k][k] == 0:
            piv = next((i for i in range(k + 1, n) if m[i][k] != 0), None)
            if piv is None:
                return ZERO
            m[k], m[piv] = m[piv], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) / prev
            m[i][k] = ZERO
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def orthogonal_complement_projector(columns: Mat) -> Mat:
    """Projector onto the orthogonal complement of the column span.

    ``columns`` is given as an m x r matrix whose columns span the subspace;
    uses the standard inner product, P = I - A (A^T A)^{-1} A^T.  Requires the
    columns to be linearly independent.
    """
    if not columns or not columns[0]:
        m = len(columns)
        return identity(m)
    at = transpose(columns)
    gram = matmul(at, columns)
    ginv = inverse(gram)
    p = matmul(columns, matmul(ginv, at))
    m = len(columns)
    return [[(ONE if i == j else ZERO) - p[i][j] for j in range(m)] for i in range(m)]
