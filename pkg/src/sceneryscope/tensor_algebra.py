"""Moment matrix construction and the Kronecker-power solves.

The matrix M holds transition probabilities M[t, d] = P^t(0, d) for
t = 1..r, d = 0..m.  Once M has full column rank, its left inverse
turns time-gap moment vectors into distance-indexed moment tensors:
Q^k = (M^+)^{(x)k} p^k, applied mode by mode so the r^k x (m+1)^k
Kronecker matrix is never materialized.

Double precision is fine for small k but the mode-wise error grows
like cond(M)^k, which is why the reconstruction-facing path evaluates
single entries of the same solve in exact rational arithmetic
(:func:`solve_Q_entry_exact`); there the left inverse is exact and the
factorized chain costs O(k s^2) per entry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, RankNotReached
from .lattice_walk import IncrementLaw, rational_rows, step_distribution


@dataclass
class MomentMatrix:
    """r x (m+1) moment matrix with its pseudo-inverse and conditioning."""

    law: IncrementLaw
    m: int
    r: int
    matrix: np.ndarray
    pinv: np.ndarray
    singular_values: np.ndarray
    rank: int
    rank_tol: float

    _exact_pinv: tuple | None = field(default=None, repr=False)
    _chain_cache: dict = field(default_factory=dict, repr=False)

    @property
    def condition(self) -> float:
        sv = self.singular_values
        return float(sv[0] / sv[self.rank - 1])

    @property
    def full_rank(self) -> bool:
        return self.rank == self.m + 1


def build_M(law: IncrementLaw, m: int, r: int, rank_tol: float = 1e-10) -> MomentMatrix:
    """Assemble M[t, d] = P^t(0, d) from the cached transition rows.

    The result is not rank-validated; use :func:`choose_r` for a matrix
    guaranteed to have full column rank.
    """
    if r < m + 1:
        raise ValueError("need r >= m + 1 rows")
    mat = np.empty((r, m + 1))
    for t in range(1, r + 1):
        row = step_distribution(law, t)
        for d in range(m + 1):
            mat[t - 1, d] = row.prob(d)
    u, sv, vt = np.linalg.svd(mat, full_matrices=False)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    kept = slice(0, rank)
    pinv = (vt[kept].T / sv[kept]) @ u[:, kept].T
    return MomentMatrix(law, m, r, mat, pinv, sv, rank, rank_tol)


def choose_r(law: IncrementLaw, m: int, rank_tol: float = 1e-10,
             r_cap: int = 128) -> MomentMatrix:
    """Smallest r <= r_cap giving numerical rank m + 1.

    Existence is a property of symmetric aperiodic walks; hitting the
    cap means the tolerance is too strict or m too large for double
    precision, reported as :class:`RankNotReached`.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if not 0.0 < rank_tol < 1.0:
        raise ValueError("rank_tol must lie in (0, 1)")
    for r in range(m + 1, r_cap + 1):
        mm = build_M(law, m, r, rank_tol)
        if mm.full_rank:
            resid = np.max(np.abs(mm.pinv @ mm.matrix - np.eye(m + 1)))
            if resid > 1e-8:
                continue
            return mm
    raise RankNotReached(f"no r <= {r_cap} reaches rank {m + 1} at tol {rank_tol}")


def srw_submatrix_check(m: int, times: Sequence[int]) -> bool:
    """Nonsingularity of a square submatrix of the even-time SRW matrix.

    Uses the simple-walk entries P^t(0, z) = C(2t, t - z) / 4^t for the
    m + 1 distinct times given.  Returns True when |det| exceeds 1e-14
    times the product of row norms.
    """
    times = tuple(int(t) for t in times)
    if len(times) != m + 1:
        raise ValueError("need exactly m + 1 times")
    if len(set(times)) != len(times):
        raise ValueError("times must be distinct")
    if min(times) < 1:
        raise ValueError("times must be positive")
    sub = np.array([[math.comb(2 * t, t - z) / 4.0 ** t if z <= t else 0.0
                     for z in range(m + 1)] for t in times])
    scale = float(np.prod(np.linalg.norm(sub, axis=1)))
    return abs(float(np.linalg.det(sub))) > 1e-14 * scale


@dataclass(frozen=True)
class QTensor:
    """Distance-indexed moment tensor with complete index set [0..m]^k."""

    k: int
    m: int
    values: np.ndarray

    def entry(self, d: Sequence[int]) -> float:
        return float(self.values[tuple(int(x) for x in d)])

    def to_json(self) -> dict:
        flat = {}
        for idx in np.ndindex(*self.values.shape):
            key = "(" + ",".join(str(int(i)) for i in idx) + ")"
            flat[key] = float(self.values[idx])
        return {"k": self.k, "m": self.m, "entries": flat}


def solve_Q(M: MomentMatrix, k: int, p) -> QTensor:
    """Apply the left inverse mode-wise to an order-k moment vector.

    ``p`` is an ndarray of shape (r,)*k (or flat of length r^k), or any
    object exposing ``values``/``k``/``r``.  Each mode contraction
    multiplies by M.pinv, which equals multiplying by the Kronecker
    power of the pseudo-inverse.
    """
    if hasattr(p, "values") and hasattr(p, "k"):
        if p.k != k or p.r != M.r:
            raise DimensionMismatch(
                f"vector of order {p.k}, gap bound {p.r} against k={k}, r={M.r}")
        arr = np.asarray(p.values, dtype=float)
    else:
        arr = np.asarray(p, dtype=float)
    if arr.size != M.r ** k:
        raise DimensionMismatch(f"expected {M.r ** k} entries, got {arr.size}")
    out = arr.reshape((M.r,) * k)
    for mode in range(k):
        out = np.moveaxis(np.tensordot(M.pinv, out, axes=([1], [mode])), 0, mode)
    return QTensor(k, M.m, out)


# -- exact rational route -------------------------------------------------


def exact_pinv(M: MomentMatrix) -> tuple[tuple[Fraction, ...], ...]:
    """Left inverse (M^T M)^{-1} M^T in exact rational arithmetic.

    Valid whenever M has full column rank over the rationals, which the
    numerical rank check already certifies.  The result satisfies
    pinv @ M == I exactly.
    """
    if M._exact_pinv is not None:
        return M._exact_pinv
    rows = rational_rows(M.law, M.r)
    n, r = M.m + 1, M.r
    mat = [[rows[t].get(d, Fraction(0)) for d in range(n)] for t in range(1, r + 1)]
    gram = [[sum(mat[t][i] * mat[t][j] for t in range(r)) for j in range(n)]
            for i in range(n)]
    aug = [gram[i][:] + [Fraction(1 if i == j else 0) for j in range(n)]
           for i in range(n)]
    for col in range(n):
        piv = next((i for i in range(col, n) if aug[i][col] != 0), None)
        if piv is None:
            raise RankNotReached("moment matrix is exactly rank deficient")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv_p = Fraction(1) / aug[col][col]
        aug[col] = [x * inv_p for x in aug[col]]
        for i in range(n):
            if i != col and aug[i][col] != 0:
                f = aug[i][col]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[col])]
    ginv = [row[n:] for row in aug]
    pinv = tuple(tuple(sum(ginv[i][j] * mat[t][j] for j in range(n))
                       for t in range(r)) for i in range(n))
    for i in range(n):
        for j in range(n):
            want = Fraction(1 if i == j else 0)
            got = sum(pinv[i][t] * mat[t][j] for t in range(r))
            if got != want:
                raise RankNotReached("exact left inverse failed verification")
    M._exact_pinv = pinv
    return pinv


def _chain_matrix(M: MomentMatrix, sites: tuple[int, ...], d: int):
    """C^{(d)}[i, j] = sum_t pinv[d, t] P^t(0, sites[j] - sites[i]), exact."""
    key = (sites, d)
    cached = M._chain_cache.get(key)
    if cached is not None:
        return cached
    pinv = exact_pinv(M)
    rows = rational_rows(M.law, M.r)
    s = len(sites)
    mat = [[sum(pinv[d][t - 1] * rows[t].get(sites[j] - sites[i], Fraction(0))
                for t in range(1, M.r + 1)) for j in range(s)] for i in range(s)]
    M._chain_cache[key] = mat
    return mat


def solve_Q_entry_exact(M: MomentMatrix, sites: Sequence[int],
                        means: Sequence[Fraction], d: Sequence[int]) -> Fraction:
    """Single entry Q^k_d of the left-inverse solve, exactly.

    Identical to applying (M^+)^{(x)k} to the order-k moment vector of a
    scenery whose deviating sites are ``sites`` with function means
    ``means``: the sum over time gaps factorizes through one contracted
    matrix per distance, so the entry costs O(k s^2) rational products.
    """
    sites = tuple(int(z) for z in sites)
    if len(means) != len(sites):
        raise DimensionMismatch("one mean per site required")
    if any(not 0 <= dj <= M.m for dj in d):
        raise DimensionMismatch(f"distance outside [0, {M.m}]: {tuple(d)}")
    v = [x if isinstance(x, Fraction) else Fraction(x) for x in means]
    vec = v[:]
    s = len(sites)
    for dj in reversed(tuple(int(x) for x in d)):
        C = _chain_matrix(M, sites, dj)
        vec = [v[i] * sum(C[i][j] * vec[j] for j in range(s)) for i in range(s)]
    return sum(vec, Fraction(0))
