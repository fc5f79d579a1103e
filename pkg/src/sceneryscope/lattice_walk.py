"""Symmetric aperiodic step distributions on the integer lattice.

Provides validated increment laws, exact t-step transition rows by
convolution, return probabilities u_n, and the squared-return weights
w(m, n) = sum_{k=m+1}^n u_k^2 that drive the block estimators.

Transition rows are exact convolution powers.  Return probabilities are
taken from the convolution rows for small n; past ``_U_CONV_CAP`` they
are evaluated through the characteristic function on a uniform grid
dense enough that the aliasing error is below 1e-17, which keeps the
values exact at double precision without storing megabyte-sized rows.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

import numpy as np

from .errors import Asymmetric, NotNormalized, Periodic

_NORM_TOL = 1e-12
_SYM_TOL = 1e-12

# rows cached densely up to here; larger t assembled from dyadic anchors
_SMALL_T_CAP = 512
# return probabilities switch from convolution to spectral past here
_U_CONV_CAP = 2048
# aliasing control: exp(-ALIAS_LOG) bounds the wrap-around mass
_ALIAS_LOG = 41.5


@dataclass(frozen=True)
class IncrementLaw:
    """Finite-support symmetric aperiodic step distribution.

    ``offsets`` are sorted and paired with ``probs``; construction goes
    through :func:`validate`, which checks normalization, symmetry and
    aperiodicity.
    """

    offsets: tuple[int, ...]
    probs: tuple[float, ...]

    @property
    def radius(self) -> int:
        return max(abs(z) for z in self.offsets)

    @property
    def support_probs(self) -> dict[int, float]:
        return dict(zip(self.offsets, self.probs))

    def prob(self, z: int) -> float:
        try:
            return self.probs[self.offsets.index(z)]
        except ValueError:
            return 0.0

    def to_json(self) -> dict:
        return {"q": {str(z): p for z, p in zip(self.offsets, self.probs)}}


def law_violations(raw_law: Mapping[int, float]) -> list[str]:
    """Return the codes of every admissibility condition ``raw_law`` fails."""
    if not raw_law:
        return ["not_normalized"]
    out = []
    probs = list(raw_law.values())
    if min(probs) < 0 or abs(sum(probs) - 1.0) > _NORM_TOL:
        out.append("not_normalized")
    for z, p in raw_law.items():
        if abs(p - raw_law.get(-z, 0.0)) > _SYM_TOL:
            out.append("asymmetric")
            break
    if "not_normalized" not in out and _period(raw_law) != 1:
        out.append("periodic")
    return out


def _period(raw_law: Mapping[int, float]) -> int:
    """gcd of the self-convolution powers with positive mass at 0.

    For finite support of radius R the horizon 2R + 2 is enough to
    expose the period: a symmetric law always returns in two steps, so
    the period is 1 or 2, and an aperiodic law admits an odd return of
    length at most 2R.
    """
    offsets = sorted(raw_law)
    radius = max(abs(z) for z in offsets)
    if radius == 0:
        return 1
    dense = np.zeros(2 * radius + 1)
    for z, p in raw_law.items():
        dense[z + radius] = p
    cur = np.array([1.0])
    g = 0
    for n in range(1, 2 * radius + 3):
        cur = np.convolve(cur, dense)
        if cur[n * radius] > 0.0:
            g = math.gcd(g, n)
            if g == 1:
                return 1
    return g if g else 0


def validate(raw_law: Mapping[int, float]) -> IncrementLaw:
    """Validate a raw offset -> probability map into an :class:`IncrementLaw`.

    Raises the exception class named after the first violated condition;
    the exception carries the full violation list.
    """
    raw = {int(z): float(p) for z, p in raw_law.items()}
    bad = law_violations(raw)
    if bad:
        cls = {"not_normalized": NotNormalized, "asymmetric": Asymmetric,
               "periodic": Periodic}[bad[0]]
        raise cls(f"increment law violates: {', '.join(bad)}", tuple(bad))
    items = sorted((z, p) for z, p in raw.items() if p > 0.0)
    return IncrementLaw(tuple(z for z, _ in items), tuple(p for _, p in items))


class TransitionRow:
    """One row P^t(0, .) of the transition semigroup, stored densely."""

    __slots__ = ("t", "radius", "dense")

    def __init__(self, t: int, dense: np.ndarray):
        self.t = t
        self.dense = dense
        self.radius = (len(dense) - 1) // 2
        self.dense.setflags(write=False)

    def prob(self, d: int) -> float:
        if abs(d) > self.radius:
            return 0.0
        return float(self.dense[self.radius + d])

    def support(self) -> Iterable[int]:
        return range(-self.radius, self.radius + 1)

    def as_dict(self) -> dict[int, float]:
        return {d: self.prob(d) for d in self.support() if self.prob(d) != 0.0}

    def mass(self) -> float:
        return float(self.dense.sum())


class _LawTables:
    """Per-law caches: small rows, dyadic anchors, u and w arrays.

    Readers always see fully built immutable snapshots; every extension
    happens under the lock.
    """

    @staticmethod
    def _symmetrize(row: np.ndarray) -> np.ndarray:
        # the true row is symmetric; averaging with the mirror removes the
        # summation-order asymmetry of the float convolution
        out = 0.5 * (row + row[::-1])
        return out

    def __init__(self, law: IncrementLaw):
        self.law = law
        self.lock = threading.RLock()
        radius = law.radius
        dense = np.zeros(2 * radius + 1)
        for z, p in zip(law.offsets, law.probs):
            dense[z + radius] = p
        self.q_dense = dense
        self.small: list[np.ndarray] = [np.array([1.0])]
        self.anchors: dict[int, np.ndarray] = {}
        self.big: dict[int, np.ndarray] = {}
        self.u = np.array([1.0])
        self.w2 = np.array([0.0])

    # -- rows ----------------------------------------------------------

    def _extend_small(self, t: int) -> None:
        while len(self.small) <= t:
            self.small.append(self._symmetrize(np.convolve(self.small[-1], self.q_dense)))

    def _anchor(self, p: int) -> np.ndarray:
        row = self.anchors.get(p)
        if row is None:
            if p <= _SMALL_T_CAP:
                self._extend_small(p)
                row = self.small[p]
            else:
                half = self._anchor(p // 2)
                row = self._symmetrize(np.convolve(half, half))
            self.anchors[p] = row
        return row

    def row(self, t: int) -> np.ndarray:
        with self.lock:
            if t <= _SMALL_T_CAP:
                self._extend_small(t)
                return self.small[t]
            cached = self.big.get(t)
            if cached is not None:
                return cached
            out = None
            rem = t
            p = 1
            while rem:
                if rem & 1:
                    a = self._anchor(p)
                    out = a if out is None else self._symmetrize(np.convolve(out, a))
                rem >>= 1
                p <<= 1
            if len(self.big) > 32:
                self.big.clear()
            self.big[t] = out
            return out

    # -- return probabilities ------------------------------------------

    def ensure_u(self, nmax: int) -> None:
        with self.lock:
            if len(self.u) > nmax:
                return
            nmax = max(nmax, 2 * (len(self.u) - 1), 16)
            conv_top = min(nmax, _U_CONV_CAP)
            u = np.empty(nmax + 1)
            u[: len(self.u)] = self.u
            start = len(self.u)
            if start <= conv_top:
                cur = self.row(start - 1).copy()
                for n in range(start, conv_top + 1):
                    cur = np.convolve(cur, self.q_dense)
                    u[n] = cur[(len(cur) - 1) // 2]
                start = conv_top + 1
            if start <= nmax:
                u[start:] = self._u_spectral(start, nmax)
            self.u = u
            self.w2 = np.concatenate([[0.0], np.cumsum(u[1:] ** 2)])

    def _u_spectral(self, n0: int, nmax: int) -> np.ndarray:
        radius = self.law.radius
        if radius == 0:
            return np.ones(nmax - n0 + 1)
        K = int(np.ceil(radius * np.sqrt(2.0 * _ALIAS_LOG * nmax))) + 8
        x = 2.0 * np.pi * np.arange(K) / K
        offs = np.array(self.law.offsets)
        prb = np.array(self.law.probs)
        psi = (prb[:, None] * np.cos(np.outer(offs, x))).sum(axis=0)
        chunk = max(64, min(1024, (1 << 23) // K))
        powers = np.empty((K, chunk))
        powers[:, 0] = 1.0
        for c in range(1, chunk):
            powers[:, c] = powers[:, c - 1] * psi
        step = powers[:, chunk - 1] * psi
        out = np.empty(nmax - n0 + 1)
        state = psi ** int(n0) / K
        k = n0
        while k <= nmax:
            c = min(chunk, nmax + 1 - k)
            out[k - n0 : k - n0 + c] = state @ powers[:, :c]
            k += c
            if k <= nmax:
                state = state * step
        return out


_TABLES: dict[IncrementLaw, _LawTables] = {}
_TABLES_LOCK = threading.Lock()


def _tables(law: IncrementLaw) -> _LawTables:
    with _TABLES_LOCK:
        tab = _TABLES.get(law)
        if tab is None:
            tab = _TABLES[law] = _LawTables(law)
        return tab


def step_distribution(law: IncrementLaw, t: int) -> TransitionRow:
    """Exact t-fold self-convolution of the step distribution; t = 0 is
    the point mass at zero."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    return TransitionRow(t, _tables(law).row(t))


def transition_prob(law: IncrementLaw, t: int, d: int) -> float:
    """P^t(0, d), looked up from the cached row."""
    return step_distribution(law, t).prob(d)


def return_probability(law: IncrementLaw, n: int) -> float:
    """u_n = P^n(0, 0)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    tab = _tables(law)
    tab.ensure_u(n)
    return float(tab.u[n])


def return_probabilities(law: IncrementLaw, nmax: int) -> np.ndarray:
    """Read-only view of (u_0, ..., u_nmax)."""
    tab = _tables(law)
    tab.ensure_u(nmax)
    out = tab.u[: nmax + 1]
    out.setflags(write=False)
    return out


def weight(law: IncrementLaw, m: int, n: int) -> float:
    """w(m, n) = sum_{k=m+1}^n u_k^2; additive over adjacent ranges."""
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    tab = _tables(law)
    tab.ensure_u(n)
    return float(tab.w2[n] - tab.w2[m])


def weight_cumulative(law: IncrementLaw, nmax: int) -> np.ndarray:
    """Array W with W[n] = w(0, n), so w(m, n) = W[n] - W[m]."""
    tab = _tables(law)
    tab.ensure_u(nmax)
    out = tab.w2[: nmax + 1]
    out.setflags(write=False)
    return out


def rational_rows(law: IncrementLaw, tmax: int) -> list[dict[int, Fraction]]:
    """Transition rows P^t(0, .) for t = 0..tmax in exact rational arithmetic.

    Inputs are binary floats, so ``Fraction(p)`` reproduces them exactly;
    everything downstream is exact.  Intended for the moment-matrix left
    inverse, where double precision loses too much to cancellation.
    """
    q = {z: Fraction(p) for z, p in zip(law.offsets, law.probs)}
    rows: list[dict[int, Fraction]] = [{0: Fraction(1)}]
    for _ in range(tmax):
        prev = rows[-1]
        nxt: dict[int, Fraction] = {}
        for z, pz in prev.items():
            for dz, pd in q.items():
                key = z + dz
                nxt[key] = nxt.get(key, Fraction(0)) + pz * pd
        rows.append(nxt)
    return rows


def law_from_json(doc: Mapping) -> IncrementLaw:
    """Parse {"q": {"0": 0.5, "1": 0.25, "-1": 0.25}}."""
    if "q" not in doc:
        raise KeyError("increment law document needs a 'q' field")
    return validate({int(k): float(v) for k, v in doc["q"].items()})
