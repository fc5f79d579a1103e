"""Inward reconstruction of a scenery from its distance moments.

Everything here consumes a Q-access object serving geometric moments
Q^k_d(phi0) on demand.  The recursion first solves for the two endpoint
means through the width-d moments, then walks inwards pair by pair,
disambiguating each pair's orientation against an order-7 cross moment,
and finally assembles per-function mean profiles into site laws.

Outputs are bracket classes: a sequence and its reversal are the same
answer, since the observations cannot distinguish a shifted or
reflected scenery.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import moments
from .errors import (AmbiguousPairing, DegenerateEndpoint, InconsistentProfiles,
                     NegativeDiscriminant, NoSeparatingFunction, NoSignal, OddWidth)
from .lattice_walk import IncrementLaw
from .scenery import (Alphabet, BracketSequence, COIN_ALPHABET, CoinScenery, Scenery,
                      SiteLaw, TestFunction, add_functions, brackets_close,
                      brute_force_Q, canonical_bracket, center, combine_functions,
                      identity_function, indicator_functions, scale_function)
from .tensor_algebra import MomentMatrix, choose_r, solve_Q, solve_Q_entry_exact

_C_GRID = tuple(s * 2.0 ** -j for j in range(1, 21) for s in (1.0, -1.0))


@dataclass(frozen=True)
class Tolerances:
    """Numeric thresholds for the recursion, one block for all stages.

    Exact-mode defaults; estimated mode scales the degenerate and tie
    thresholds to a kilofactor above the moment noise floor.
    """

    degenerate: float = 1e-10
    tie: float = 1e-10
    discriminant: float = 1e-10
    profile_match: float = 1e-6

    @staticmethod
    def for_noise_floor(noise_floor: float) -> "Tolerances":
        # kilofactor over the noise floor, saturating at 0.05 so a noisy
        # run never declares every moment degenerate outright
        lvl = max(1e-10, min(1e3 * noise_floor, 0.05))
        return Tolerances(degenerate=lvl, tie=lvl, discriminant=lvl,
                          profile_match=max(1e-6, lvl))


# -- Q access implementations ----------------------------------------------


class BruteForceQ:
    """Oracle access: direct enumeration over the known scenery."""

    def __init__(self, s: Scenery):
        self.scenery = s

    def value(self, phi0: TestFunction, d: Sequence[int]) -> float:
        return brute_force_Q(self.scenery, phi0, d)


class ExactPipelineQ:
    """Moment-pipeline access evaluated in exact rational arithmetic.

    Each entry is the left-inverse solve of the forward moment vector of
    the known scenery; exact arithmetic keeps the solve immune to the
    cond(M)^k error growth of the double-precision route, and the result
    coincides with the brute-force enumeration.
    """

    def __init__(self, law: IncrementLaw, s: Scenery, M: MomentMatrix):
        self.law = law
        self.scenery = s
        self.M = M
        self.sites = tuple(sorted(s.deviations))
        self._means: dict[tuple, list[Fraction]] = {}
        self._memo: dict[tuple, float] = {}
        self._lock = threading.Lock()

    def _exact_means(self, phi0: TestFunction) -> list[Fraction]:
        cached = self._means.get(phi0.values)
        if cached is None:
            cached = []
            for z in self.sites:
                law = self.scenery.deviations[z]
                cached.append(sum((Fraction(v) * Fraction(p)
                                   for v, p in zip(phi0.values, law.probs)),
                                  Fraction(0)))
            self._means[phi0.values] = cached
        return cached

    def value(self, phi0: TestFunction, d: Sequence[int]) -> float:
        key = (phi0.values, tuple(int(x) for x in d))
        with self._lock:
            hit = self._memo.get(key)
        if hit is not None:
            return hit
        out = float(solve_Q_entry_exact(self.M, self.sites,
                                        self._exact_means(phi0), key[1]))
        with self._lock:
            self._memo[key] = out
        return out


class EstimatedQ:
    """Access backed by block-estimated moment vectors.

    For each (function, order) the full moment vector over {1..r}^k is
    estimated from the observations and solved mode-wise; tensors are
    memoized under a lock.  Estimation noise dwarfs the double-precision
    solve error at the low orders this path can reach.
    """

    def __init__(self, law: IncrementLaw, obs: np.ndarray, M: MomentMatrix,
                 horizon: int | None = None):
        self.law = law
        self.obs = obs
        self.M = M
        self.horizon = horizon
        self._tensors: dict[tuple, np.ndarray] = {}
        self._lock = threading.Lock()

    def value(self, phi0: TestFunction, d: Sequence[int]) -> float:
        d = tuple(int(x) for x in d)
        k = len(d)
        key = (phi0.values, k)
        with self._lock:
            tensor = self._tensors.get(key)
        if tensor is None:
            r = self.M.r
            p = np.empty((r,) * k)
            for idx in np.ndindex(*p.shape):
                gaps = tuple(i + 1 for i in idx)
                p[idx] = moments.estimate_p(self.law, self.obs, phi0, gaps,
                                            self.horizon)
            tensor = solve_Q(self.M, k, p).values
            with self._lock:
                self._tensors[key] = tensor
        return float(tensor[d])


# -- the inward recursion ----------------------------------------------------


@dataclass(frozen=True)
class ProfilePair:
    """Oriented endpoint-aligned mean tuples, valid up to a joint swap."""

    left: tuple[float, ...]
    right: tuple[float, ...]

    def extended(self, lv: float, rv: float) -> "ProfilePair":
        return ProfilePair(self.left + (lv,), self.right + (rv,))


def _solve_pair(total: float, product: float, tol: Tolerances) -> tuple[float, float]:
    """Roots of x^2 - total x + product, clamping noise-level negative
    discriminants to a double root."""
    disc = total * total - 4.0 * product
    if disc < 0.0:
        scale = max(1.0, total * total + 4.0 * abs(product))
        if disc < -tol.discriminant * scale:
            raise NegativeDiscriminant(
                f"sum {total} and product {product} are inconsistent")
        disc = 0.0
    root = math.sqrt(disc)
    return ((total - root) / 2.0, (total + root) / 2.0)


def endpoints(Q, phi0: TestFunction, ell: int, tol: Tolerances) -> tuple[float, float]:
    """Unordered endpoint means {<phi0>_a, <phi0>_b} for width ell >= 1.

    Product from the width moment, sum from the there-and-back order-2
    moment; a vanishing width moment means the product underdetermines
    the pair and the auxiliary-function path must take over.
    """
    if ell < 1:
        raise ValueError("endpoints need width >= 1")
    q1 = Q.value(phi0, (ell,))
    if abs(q1) <= tol.degenerate:
        raise DegenerateEndpoint(f"width moment of {phi0.name} is {q1}")
    q2 = Q.value(phi0, (ell, ell))
    return _solve_pair(2.0 * q2 / q1, q1 / 2.0, tol)


def interior_pair(Q, phi0: TestFunction, ell: int, k: int,
                  tol: Tolerances) -> tuple[float, float]:
    """Unordered pair {<phi0>_{a+k}, <phi0>_{b-k}} for 1 <= k < ell/2."""
    if not 1 <= k < ell / 2.0:
        raise ValueError(f"interior index k={k} outside [1, {ell}/2)")
    q1 = Q.value(phi0, (ell,))
    if abs(q1) <= tol.degenerate:
        raise DegenerateEndpoint(f"width moment of {phi0.name} is {q1}")
    total = 2.0 * Q.value(phi0, (ell, k)) / q1
    product = 2.0 * Q.value(phi0, (ell, k, k, ell, k)) / (q1 * q1)
    return _solve_pair(total, product, tol)


def center_value(Q, phi0: TestFunction, ell: int, tol: Tolerances) -> float:
    """Mean at the middle site for even widths, where the two interior
    branches coincide and the pair formulas would overcount."""
    if ell % 2 != 0 or ell < 2:
        raise OddWidth(f"center site undefined for width {ell}")
    q1 = Q.value(phi0, (ell,))
    if abs(q1) <= tol.degenerate:
        raise DegenerateEndpoint(f"width moment of {phi0.name} is {q1}")
    return Q.value(phi0, (ell, ell // 2)) / q1


def resolve_pairing(Q, phi0: TestFunction, ell: int, profile: ProfilePair,
                    new_pair: tuple[float, float], k: int,
                    tol: Tolerances) -> ProfilePair:
    """Attach an unordered interior pair to the oriented profile.

    The anchor is the deepest already-resolved index where the two sides
    differ; the order-7 cross moment gives the value of the crossed
    pairing, so the orientation whose cross-sum reproduces it is the
    wrong one.  With no anchor, or a palindromic new pair, both
    orientations agree as bracket classes and the canonical one is used.
    """
    if len(profile.left) != k or len(profile.right) != k:
        raise ValueError("profile must cover indices 0..k-1")
    x, y = new_pair
    # pair values come out of a quadratic, so a double root carries
    # sqrt(eps)-level splitting; below that, values count as equal
    root_noise = 4.0 * math.sqrt(np.finfo(float).eps) * (1.0 + abs(x) + abs(y))
    equal_tol = max(tol.tie, root_noise)
    anchor = None
    for j in range(k - 1, -1, -1):
        if abs(profile.left[j] - profile.right[j]) > equal_tol:
            anchor = j
            break
    if anchor is None or abs(x - y) <= equal_tol:
        lo, hi = (x, y) if x <= y else (y, x)
        return profile.extended(lo, hi)
    q1 = Q.value(phi0, (ell,))
    q7 = Q.value(phi0, (ell, anchor, anchor, ell, k, k, ell))
    f_bad = 8.0 * q7 / q1 ** 3
    la, ra = profile.left[anchor], profile.right[anchor]
    cross_x = la * x + ra * y       # cross-sum if x joins the left side
    cross_y = la * y + ra * x
    dist_x, dist_y = abs(cross_x - f_bad), abs(cross_y - f_bad)
    if dist_x <= tol.tie and dist_y <= tol.tie:
        raise AmbiguousPairing(
            f"both orientations at k={k} match the cross moment {f_bad}")
    if dist_x >= dist_y:
        return profile.extended(x, y)
    return profile.extended(y, x)


def recover_profile(Q, phi0: TestFunction, ell: int,
                    tol: Tolerances = Tolerances()) -> BracketSequence:
    """Mean profile [<phi0>_a, ..., <phi0>_b] for a width-ell scenery.

    Endpoints, then interior pairs k = 1 .. ceil(ell/2) - 1 with pairing
    resolution, then the middle site when ell is even.  Widths 0 and 1
    are closed-form special cases.  Raises DegenerateEndpoint when the
    width moment vanishes; the caller owns the auxiliary-function
    fallback.
    """
    if ell < 0:
        raise ValueError("width must be nonnegative")
    if ell == 0:
        q1 = Q.value(phi0, (0,))
        if abs(q1) <= tol.degenerate:
            return canonical_bracket((0.0,))
        q2 = Q.value(phi0, (0, 0))
        return canonical_bracket((math.copysign(math.sqrt(max(q1, 0.0)), q2),))
    first = endpoints(Q, phi0, ell, tol)
    if ell == 1:
        return canonical_bracket(first)
    profile = ProfilePair((min(first),), (max(first),))
    for k in range(1, (ell + 1) // 2):
        pair = interior_pair(Q, phi0, ell, k, tol)
        profile = resolve_pairing(Q, phi0, ell, profile, pair, k, tol)
    middle = [center_value(Q, phi0, ell, tol)] if ell % 2 == 0 else []
    seq = list(profile.left) + middle + list(reversed(profile.right))
    return canonical_bracket(tuple(seq))


def select_auxiliary(Q, phi0: TestFunction, family: Sequence[TestFunction],
                     ell: int, tol: Tolerances) -> tuple[TestFunction, float]:
    """First family function separating the endpoints, with a shift size.

    Scans for an h whose endpoint means are nonzero and distinct, then
    picks the first c in the dyadic grid making the endpoints of
    phi0 + c h nondegenerate.  Exhaustion means the endpoint laws are
    indistinguishable by the family (typically equal laws); the caller
    then shrinks the window by one site on each side.
    """
    for h0 in family:
        try:
            hx, hy = endpoints(Q, h0, ell, tol)
        except (DegenerateEndpoint, NegativeDiscriminant):
            continue
        if abs(hx - hy) <= tol.tie or min(abs(hx), abs(hy)) <= tol.degenerate:
            continue
        for c in _C_GRID:
            shifted = add_functions(phi0, scale_function(h0, c))
            try:
                endpoints(Q, shifted, ell, tol)
            except (DegenerateEndpoint, NegativeDiscriminant):
                continue
            return h0, c
    raise NoSeparatingFunction(
        f"no function in the family of {len(family)} separates the endpoints")


def recover_profile_general(Q, phi0: TestFunction, family: Sequence[TestFunction],
                            ell: int, tol: Tolerances = Tolerances()) -> BracketSequence:
    """Profile recovery that survives vanishing endpoint means.

    Nondegenerate functions go straight through the plain recursion.
    Otherwise an auxiliary function shifts phi0 away from zero, the
    profiles of the shift and the shifted function are recovered
    separately, and of the two relative alignments of their difference
    the one consistent with the known zero endpoint survives.  If no
    auxiliary function exists the endpoint laws coincide, both endpoint
    means are zero, and the procedure recurses on the window shrunk by
    one site at each end.
    """
    try:
        return recover_profile(Q, phi0, ell, tol)
    except DegenerateEndpoint:
        pass
    try:
        psi0, c_first = select_auxiliary(Q, phi0, family, ell, tol)
    except NoSeparatingFunction:
        if ell >= 2:
            inner = recover_profile_general(Q, phi0, family, ell - 2, tol)
            return canonical_bracket((0.0,) + tuple(inner.canonical) + (0.0,))
        return canonical_bracket((0.0,) * (ell + 1))
    start = _C_GRID.index(c_first)
    for c in _C_GRID[start:]:
        shift_fn = scale_function(psi0, c)
        shifted = add_functions(phi0, shift_fn)
        try:
            b_shift = recover_profile(Q, shift_fn, ell, tol)
            b_sum = recover_profile(Q, shifted, ell, tol)
        except (DegenerateEndpoint, NegativeDiscriminant, AmbiguousPairing):
            continue
        s_shift = np.asarray(b_shift.canonical, dtype=float)
        s_sum = np.asarray(b_sum.canonical, dtype=float)
        cands = [s_sum - s_shift, s_sum - s_shift[::-1]]
        zero_tol = max(10.0 * tol.degenerate, 1e-9)
        ends = [min(abs(cand[0]), abs(cand[-1])) for cand in cands]
        consistent = [e <= zero_tol for e in ends]
        if consistent[0] != consistent[1]:
            return canonical_bracket(tuple(cands[consistent.index(True)]))
        if all(consistent) and brackets_close(canonical_bracket(tuple(cands[0])),
                                              canonical_bracket(tuple(cands[1])),
                                              tol.profile_match):
            return canonical_bracket(tuple(cands[0]))
        # both or neither alignment look right: a coincidence of this
        # shift size, so move to the next c
    raise InconsistentProfiles(
        f"no shift size aligned the difference profile for {phi0.name}")


def merge_profiles(Q, alphabet: Alphabet, alpha: SiteLaw, ell: int,
                   tol: Tolerances = Tolerances(),
                   aux_family: Sequence[TestFunction] | None = None) -> BracketSequence:
    """Joint site laws from the per-indicator mean profiles.

    Indicator profiles are recovered one at a time and aligned to the
    growing joint profile: when both the joint profile and the new one
    are non-palindromic, the profile of a combined function (a small
    multiple of a separating earlier indicator plus the new one) singles
    out the consistent alignment.  The final per-site indicator means
    plus the reference probabilities give the site laws.
    """
    base = [center(f, alpha) for f in indicator_functions(alphabet)]
    family = list(base) if aux_family is None else list(aux_family)
    profiles = [recover_profile_general(Q, f0, family, ell, tol) for f0 in base]
    joint: list[tuple[float, ...]] = [(v,) for v in profiles[0].canonical]
    for k in range(1, len(base)):
        seq = profiles[k].canonical
        joint = _extend_joint(Q, joint, seq, base, k, ell, family, tol)
    laws = []
    for vals in joint:
        probs = [v + p for v, p in zip(vals, alpha.probs)]
        laws.append(SiteLaw.clipped(alphabet, probs, tol=max(1e-6, 10 * tol.profile_match)))
    return canonical_bracket(tuple(laws))


def _extend_joint(Q, joint, seq, base, k, ell, family, tol):
    ln = len(joint)
    palin_joint = all(
        max(abs(a - b) for a, b in zip(joint[j], joint[ln - 1 - j])) <= tol.profile_match
        for j in range(ln))
    palin_new = all(abs(seq[j] - seq[ln - 1 - j]) <= tol.profile_match
                    for j in range(ln))
    if palin_joint or palin_new:
        return [joint[j] + (seq[j],) for j in range(ln)]
    witness = None
    for j in range(ln):
        for i in range(k):
            if abs(joint[j][i] - joint[ln - 1 - j][i]) > tol.profile_match:
                witness = i
                break
        if witness is not None:
            break
    for t in (2.0 ** -j for j in range(1, 13)):
        combined0 = add_functions(scale_function(base[witness], t), base[k])
        try:
            got = recover_profile_general(Q, combined0, family, ell, tol)
        except (DegenerateEndpoint, NegativeDiscriminant, AmbiguousPairing):
            continue
        pred_keep = canonical_bracket(tuple(
            t * joint[j][witness] + seq[j] for j in range(ln)))
        pred_flip = canonical_bracket(tuple(
            t * joint[j][witness] + seq[ln - 1 - j] for j in range(ln)))
        match_tol = max(tol.profile_match, 1e-8)
        ok_keep = brackets_close(got, pred_keep, match_tol)
        ok_flip = brackets_close(got, pred_flip, match_tol)
        if ok_keep and ok_flip:
            continue        # this shift cannot discriminate, try the next
        if ok_keep:
            return [joint[j] + (seq[j],) for j in range(ln)]
        if ok_flip:
            return [joint[j] + (seq[ln - 1 - j],) for j in range(ln)]
    raise InconsistentProfiles(
        f"no extension matches the combined profile for function {base[k].name}")


# -- whole-pipeline drivers ---------------------------------------------------


@dataclass(frozen=True)
class ReconstructConfig:
    """Knobs for the end-to-end reconstruction."""

    m_max: int = 8
    r_cap: int = 128
    rank_tol: float = 1e-10
    tau: float | None = 1e-6
    tolerances: Tolerances = Tolerances()
    coin_mode: bool | None = None
    horizon: int | None = None


@dataclass(frozen=True)
class ExactSource:
    """Oracle source: the true scenery drives exact forward moments."""

    law: IncrementLaw
    scenery: Scenery


@dataclass(frozen=True)
class ObservedSource:
    """Estimation source: only the observation stream and the alphabet."""

    law: IncrementLaw
    obs: np.ndarray
    alphabet: Alphabet
    alpha: SiteLaw


@dataclass
class ReconstructionResult:
    scenery: Scenery
    ell: int | None
    bracket: BracketSequence | None
    diagnostics: dict

    def to_json(self) -> dict:
        laws = [list(self.scenery.law_at(z).probs)
                for z in range(1, (self.ell or 0) + 2)] if self.ell is not None else []
        return {
            "ell": self.ell,
            "sites": laws,
            "bracket": True,
            "alphabet": list(self.scenery.alphabet.symbols),
            "alpha": list(self.scenery.alpha.probs),
            "diagnostics": self.diagnostics,
        }


def _is_coin_setup(alphabet: Alphabet, alpha: SiteLaw) -> bool:
    return alphabet == COIN_ALPHABET and max(abs(p - 0.5) for p in alpha.probs) < 1e-12


def _detection_functions(alphabet: Alphabet, alpha: SiteLaw, coin: bool):
    if coin:
        return [center(identity_function(alphabet), alpha)]
    funcs = [center(f, alpha) for f in indicator_functions(alphabet)]
    if alphabet.size > 3:
        # with four or more symbols the endpoint deviations can live on
        # disjoint symbol sets, and only a combination sees both ends
        funcs = _aux_family(alphabet, alpha)
    return funcs


def _aux_family(alphabet: Alphabet, alpha: SiteLaw) -> list[TestFunction]:
    """Indicators plus pairwise dyadic combinations, centered.

    The combinations cover endpoint laws whose deviations from the
    reference live on disjoint symbol sets, where no single indicator
    has nonzero mean at both ends.
    """
    inds = indicator_functions(alphabet)
    fam = [center(f, alpha) for f in inds]
    for f, g in itertools.permutations(inds, 2):
        for c in (0.5, -0.5):
            fam.append(center(combine_functions(f, g, c), alpha))
    return fam


def reconstruct_scenery(source: ExactSource | ObservedSource,
                        config: ReconstructConfig = ReconstructConfig()) -> ReconstructionResult:
    """Full pipeline: width detection, moment solve, inward recursion.

    The reconstructed scenery sits on sites 1..ell+1; an undetectable
    scenery (no width signal) comes back as the all-reference scenery
    with ``ell = None``.  Raises nothing for the no-signal case in exact
    mode on an empty scenery, since that is the correct answer; other
    stage failures propagate with their stage-specific exception types.
    """
    if isinstance(source, ExactSource):
        law, alphabet, alpha = source.law, source.scenery.alphabet, source.scenery.alpha
        p1_access = moments.exact_p_access(law, source.scenery)
        tau = config.tau if config.tau is not None else 1e-6
        tol = config.tolerances
    else:
        law, alphabet, alpha = source.law, source.alphabet, source.alpha
        p1_access = moments.estimated_p_access(law, source.obs, config.horizon)
        tau = config.tau
        tol = config.tolerances
    coin = config.coin_mode if config.coin_mode is not None else _is_coin_setup(alphabet, alpha)
    detect = _detection_functions(alphabet, alpha, coin)

    diagnostics: dict = {"mode": "exact" if isinstance(source, ExactSource) else "estimated"}
    try:
        ell = moments.estimate_ell(law, detect, p1_access, config.m_max, tau,
                                   rank_tol=config.rank_tol, r_cap=config.r_cap)
    except NoSignal:
        diagnostics["verdict"] = "all-alpha"
        return ReconstructionResult(Scenery(alpha, {}), None, None, diagnostics)

    M = choose_r(law, ell, config.rank_tol, config.r_cap)
    diagnostics.update({"ell": ell, "r": M.r, "condition": M.condition})

    if isinstance(source, ExactSource):
        Q = ExactPipelineQ(law, source.scenery, M)
    else:
        Q = EstimatedQ(law, source.obs, M, config.horizon)
        noise = _order1_noise_floor(law, source.obs, detect, M, config.horizon)
        diagnostics["noise_floor"] = noise
        tol = Tolerances.for_noise_floor(noise)

    if coin:
        phi0 = detect[0]
        family = [phi0] + _detection_functions(alphabet, alpha, coin=False)
        bracket = recover_profile_general(Q, phi0, family, ell, tol)
        biases = [min(1.0, max(0.0, v)) for v in bracket.canonical]
        scenery = CoinScenery({i + 1: b for i, b in enumerate(biases)}).to_scenery()
        law_bracket = canonical_bracket(tuple(
            scenery.law_at(i + 1) for i in range(len(biases))))
        diagnostics["residual"] = _identity_residual(Q, phi0, bracket, ell)
    else:
        law_bracket = merge_profiles(Q, alphabet, alpha, ell, tol,
                                     aux_family=_aux_family(alphabet, alpha))
        scenery = Scenery(alpha, {i + 1: lw for i, lw in enumerate(law_bracket.canonical)})
        res = [_identity_residual(Q, f0, recover_profile_general(
            Q, f0, _aux_family(alphabet, alpha), ell, tol), ell)
            for f0 in detect]
        diagnostics["residual"] = max(res)
    return ReconstructionResult(scenery, ell, law_bracket, diagnostics)


def _order1_noise_floor(law, obs, functions, M, horizon) -> float:
    """Largest propagated standard error among first-order solves."""
    access = moments.estimated_p_access(law, obs, horizon)
    worst = 0.0
    for phi in functions:
        _, ses = access(phi, M.r)
        prop = np.abs(M.pinv) @ np.asarray(ses)
        worst = max(worst, float(prop.max()))
    return worst


def _identity_residual(Q, phi0: TestFunction, bracket: BracketSequence,
                       ell: int) -> float:
    """Self-consistency of a recovered profile against its own moments.

    Re-inserts the recovered means into the defining sums for the
    moments the recursion used (plus the order-4 interior cross-check)
    and reports the largest absolute mismatch.
    """
    vals = np.asarray(bracket.canonical, dtype=float)
    va, vb = vals[0], vals[-1]
    checks = [(2.0 * va * vb, (ell,))]
    if ell >= 1:
        checks.append((va * vb * (va + vb), (ell, ell)))
    for k in range(1, (ell + 1) // 2):
        sa, sb = vals[k], vals[ell - k]
        checks.append((va * vb * (sa + sb), (ell, k)))
        checks.append((2.0 * (va * vb) ** 2 * sa * sb, (ell, k, k, ell, k)))
        checks.append(((va * vb) ** 2 * (sa + sb), (ell, k, k, ell)))
        checks.append((va * vb * (va * sa + vb * sb), (ell, ell, k)))
        checks.append(((va * vb) ** 3 * (va * sb + vb * sa),
                       (ell, 0, 0, ell, k, k, ell)))
    if ell >= 2 and ell % 2 == 0:
        checks.append((2.0 * va * vb * vals[ell // 2], (ell, ell // 2)))
    if ell == 0:
        checks = [(va * va, (0,)), (va ** 3, (0, 0))]
    worst = 0.0
    for predicted, d in checks:
        worst = max(worst, abs(predicted - Q.value(phi0, d)))
    return worst
