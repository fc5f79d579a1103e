"""Time-gap moments: exact forward values and streaming estimation.

For a gap vector t = (t_1, ..., t_k) and test function phi, the moment
p_t(phi) sums, over all start sites, the expected product of phi along
observations spaced by the gaps.  With phi centered under the reference
law only the deviating sites contribute, so exact values reduce to a
transfer-matrix chain over the deviation support.

Estimation from an observation stream uses weighted block averages
L_{m,n} = (1/w(m,n)) sum_{k=m+1}^n u_k Z_k with Z_k the product of phi
values at the lagged observations, over a block schedule that keeps the
blocks weakly correlated.  Averaging the blocks converges to p_t.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import tensor_algebra
from .errors import HorizonTooSmall, InsufficientObservations, NoSignal
from .lattice_walk import (IncrementLaw, return_probabilities, step_distribution,
                           weight, weight_cumulative)
from .scenery import Scenery, TestFunction, site_means


def _check_gaps(t: Sequence[int], r: int | None = None) -> tuple[int, ...]:
    gaps = tuple(int(x) for x in t)
    if not gaps or min(gaps) < 1:
        raise ValueError(f"gap vector must have positive entries: {t}")
    if r is not None and max(gaps) > r:
        raise ValueError(f"gap exceeds bound r={r}: {gaps}")
    return gaps


@dataclass(frozen=True)
class PVector:
    """All moments p_t(phi) for t in {1..r}^k, stored as an (r,)*k array."""

    k: int
    r: int
    values: np.ndarray

    def entry(self, t: Sequence[int]) -> float:
        gaps = _check_gaps(t, self.r)
        return float(self.values[tuple(g - 1 for g in gaps)])

    def to_json(self) -> dict:
        flat = {}
        for idx in np.ndindex(*self.values.shape):
            key = "(" + ",".join(str(int(i) + 1) for i in idx) + ")"
            flat[key] = float(self.values[idx])
        return {"k": self.k, "r": self.r, "entries": flat}


def _site_transfer(law: IncrementLaw, s: Scenery, phi: TestFunction,
                   tmax: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean vector over deviating sites and stacked transition blocks
    A[t-1, i, j] = P^t(z_i, z_j) for t = 1..tmax."""
    means = site_means(s, phi)
    sites = sorted(means)
    v = np.array([means[z] for z in sites], dtype=float)
    n = len(sites)
    A = np.empty((tmax, n, n))
    for t in range(1, tmax + 1):
        row = step_distribution(law, t)
        for i, zi in enumerate(sites):
            for j, zj in enumerate(sites):
                A[t - 1, i, j] = row.prob(zj - zi)
    return v, A


def exact_p(law: IncrementLaw, s: Scenery, phi: TestFunction,
            t: Sequence[int]) -> float:
    """Exact p_t(phi) as a chain over the deviation support.

    For centered phi this is the full sum over start sites; with an
    uncentered phi the same restricted sum is returned as a diagnostic
    (the unrestricted sum would diverge).  Empty sceneries give 0.
    """
    gaps = _check_gaps(t)
    if not s.deviations:
        return 0.0
    v, A = _site_transfer(law, s, phi, max(gaps))
    vec = v.copy()
    for g in reversed(gaps):
        vec = v * (A[g - 1] @ vec)
    return float(vec.sum())


def exact_p_vector(law: IncrementLaw, s: Scenery, phi: TestFunction,
                   k: int, r: int) -> PVector:
    """All p_t(phi) for t in {1..r}^k in one vectorized recursion."""
    if k < 1 or r < 1:
        raise ValueError("need k >= 1 and r >= 1")
    if not s.deviations:
        return PVector(k, r, np.zeros((r,) * k))
    v, A = _site_transfer(law, s, phi, r)
    n = len(v)
    h = np.einsum("tij,j->ti", A, v)            # t_k axis
    for _ in range(k - 1):
        hw = h.reshape(-1, n) * v[None, :]
        h = np.einsum("tij,Tj->tTi", A, hw).reshape(-1, n)
    p = (h * v[None, :]).sum(axis=1)
    return PVector(k, r, p.reshape((r,) * k))


def exact_block_mean(law: IncrementLaw, s: Scenery, phi: TestFunction,
                     t: Sequence[int], m: int, n: int) -> float:
    """Expectation of the block estimator L_{m,n} for gaps ``t``.

    Equals (1/w(m,n)) sum_{k=m+1}^n u_k^2 p_{t,k} where p_{t,k}
    reweights the start site by P^k(0, z)/u_k; computed exactly from
    the transition rows.
    """
    gaps = _check_gaps(t)
    if not 0 <= m < n:
        raise ValueError("need 0 <= m < n")
    if not s.deviations:
        return 0.0
    v, A = _site_transfer(law, s, phi, max(gaps))
    vec = v.copy()
    for g in reversed(gaps[1:]):
        vec = v * (A[g - 1] @ vec)
    f = v * (A[gaps[0] - 1] @ vec)              # f[i] = E[Z | S at site i]
    sites = sorted(s.deviations)
    u = return_probabilities(law, n)
    total = 0.0
    for k in range(m + 1, n + 1):
        row = step_distribution(law, k)
        pz = np.array([row.prob(z) for z in sites])
        total += u[k] * float(pz @ f)
    return total / weight(law, m, n)


def block_estimate(law: IncrementLaw, obs: np.ndarray, phi: TestFunction,
                   t: Sequence[int], m: int, n: int) -> float:
    """L_{m,n} from an observation prefix.

    ``obs`` holds symbol indices; Z_k is the product of phi at the
    observation and its lagged copies, weighted by u_k over the block.
    """
    gaps = _check_gaps(t)
    if not 0 <= m < n:
        raise ValueError("need 0 <= m < n")
    depth = sum(gaps)
    if len(obs) < n + depth + 1:
        raise InsufficientObservations(
            f"need {n + depth + 1} observations, have {len(obs)}")
    values = phi.value_array()[np.asarray(obs, dtype=np.int64)]
    ks = np.arange(m + 1, n + 1)
    z = values[ks].copy()
    for off in np.cumsum(gaps):
        z *= values[ks + off]
    u = return_probabilities(law, n)
    return float((u[ks] * z).sum() / weight(law, m, n))


@dataclass(frozen=True)
class BlockSchedule:
    """Disjoint increasing blocks (m_i, n_i) used by the averaged estimator."""

    blocks: tuple[tuple[int, int], ...]

    def __post_init__(self):
        prev_n = 0
        for m, n in self.blocks:
            if not prev_n <= m < n:
                raise ValueError(f"blocks must be disjoint and increasing: {self.blocks}")
            prev_n = n


def make_schedule(law: IncrementLaw, horizon: int) -> BlockSchedule:
    """Constructive block schedule inside ``horizon``.

    m_1 = 1; n_i is the first n with w(m_i, n) >= w(0, m_i); the next
    block starts at 4 n_i.  Blocks are emitted while they fit; an empty
    result raises :class:`HorizonTooSmall`.
    """
    if horizon < 16:
        raise HorizonTooSmall("need a horizon of at least 16 steps")
    w2 = weight_cumulative(law, horizon)
    blocks = []
    m = 1
    while m < horizon:
        n = max(int(np.searchsorted(w2, 2.0 * w2[m], side="left")), m + 1)
        if n > horizon:
            break
        blocks.append((m, n))
        m = 4 * n
    if not blocks:
        raise HorizonTooSmall(f"no complete block fits in horizon {horizon}")
    return BlockSchedule(tuple(blocks))


def estimate_p_blocks(law: IncrementLaw, obs: np.ndarray, phi: TestFunction,
                      t: Sequence[int], horizon: int | None = None) -> np.ndarray:
    """Per-block estimates L_{m_i, n_i} for all complete blocks."""
    gaps = _check_gaps(t)
    nmax = len(obs) - 1
    if horizon is not None:
        nmax = min(nmax, horizon)
    depth = sum(gaps)
    if nmax < 16:
        raise InsufficientObservations("observation prefix is too short")
    schedule = make_schedule(law, nmax)
    usable = [(m, n) for m, n in schedule.blocks if n + depth <= nmax]
    if not usable:
        raise InsufficientObservations(
            f"no block fits with lag depth {depth} inside {nmax} observations")
    return np.array([block_estimate(law, obs, phi, gaps, m, n) for m, n in usable])


def estimate_p(law: IncrementLaw, obs: np.ndarray, phi: TestFunction,
               t: Sequence[int], horizon: int | None = None) -> float:
    """Average of the block estimates; deterministic in the prefix."""
    return float(estimate_p_blocks(law, obs, phi, t, horizon).mean())


def exact_p_access(law: IncrementLaw, s: Scenery) -> Callable:
    """Order-1 moment access backed by exact forward computation."""

    def access(phi: TestFunction, r: int):
        vals = exact_p_vector(law, s, phi, 1, r).values
        return vals, None

    return access


def estimated_p_access(law: IncrementLaw, obs: np.ndarray,
                       horizon: int | None = None) -> Callable:
    """Order-1 moment access backed by block estimation.

    Returns values and their standard errors (block scatter / sqrt(B));
    with few blocks the errors are crude but usable for thresholds.
    """

    def access(phi: TestFunction, r: int):
        vals = np.empty(r)
        ses = np.empty(r)
        for t1 in range(1, r + 1):
            blocks = estimate_p_blocks(law, obs, phi, (t1,), horizon)
            vals[t1 - 1] = blocks.mean()
            if len(blocks) > 1:
                ses[t1 - 1] = blocks.std(ddof=1) / np.sqrt(len(blocks))
            else:
                ses[t1 - 1] = abs(blocks[0])
        return vals, ses

    return access


def estimate_ell(law: IncrementLaw, functions: Sequence[TestFunction],
                 p1_access: Callable, m_max: int = 8, tau: float | None = 1e-6,
                 tau_factor: float = 10.0, rank_tol: float = 1e-10,
                 r_cap: int = 128) -> int:
    """Support width from order-1 moments alone.

    For each candidate width m, T(m, h) is the last coordinate of the
    left-inverse solve of the order-1 moment vector of h; it vanishes
    for every m above the true width and is nonzero at the width itself
    for some function in a measure-determining family.  Returns the
    largest m <= m_max where |T| clears the threshold; none at all
    raises :class:`NoSignal`.

    ``tau`` fixes the threshold; with ``tau=None`` the access must
    provide standard errors and the threshold is ``tau_factor`` times
    the propagated error of T.
    """
    if m_max < 0:
        raise ValueError("m_max must be nonnegative")
    best = None
    for m in range(0, m_max + 1):
        mm = tensor_algebra.choose_r(law, m, rank_tol, r_cap)
        row = mm.pinv[m]
        for phi in functions:
            vals, ses = p1_access(phi, mm.r)
            stat = float(row @ np.asarray(vals))
            if tau is not None:
                threshold = tau
            else:
                if ses is None:
                    raise ValueError("tau=None requires an access with errors")
                threshold = tau_factor * float(np.sqrt(row ** 2 @ np.asarray(ses) ** 2))
            if abs(stat) > threshold:
                best = m
                break
    if best is None:
        raise NoSignal(f"no width statistic above threshold up to m_max={m_max}")
    return best
