"""Stochastic sceneries over a finite observation alphabet.

A scenery attaches a site law to every integer, equal to a reference
law ``alpha`` everywhere except finitely many deviating sites.  This
module owns the support window, test-function means, the brute-force
enumeration oracle for the geometric moments Q^k_d, and bracket classes
(sequences identified with their reversals).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import AlphabetMismatch, EmptyScenery, NotCentered

_LAW_TOL = 1e-12
_ALPHA_EQ_TOL = 1e-10
_CENTER_TOL = 1e-10


@dataclass(frozen=True)
class Alphabet:
    """Ordered finite set of observation symbols with a real embedding."""

    symbols: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("alphabet must be nonempty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")
        if len(self.values) != len(self.symbols):
            raise ValueError("one value per symbol required")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        return self.symbols.index(symbol)


#: coins observe -1/+1 with the obvious embedding
COIN_ALPHABET = Alphabet(("-1", "+1"), (-1.0, 1.0))


@dataclass(frozen=True)
class SiteLaw:
    """Probability vector over an alphabet."""

    alphabet: Alphabet
    probs: tuple[float, ...]

    def __post_init__(self):
        if len(self.probs) != self.alphabet.size:
            raise ValueError("one probability per symbol required")
        if min(self.probs) < -_LAW_TOL or abs(sum(self.probs) - 1.0) > _LAW_TOL:
            raise ValueError(f"not a probability vector: {self.probs}")

    @staticmethod
    def clipped(alphabet: Alphabet, probs: Sequence[float],
                tol: float = 1e-6) -> "SiteLaw":
        """Build a law from numerically noisy probabilities.

        Entries within ``tol`` of [0, 1] are clipped and the vector is
        renormalized; anything farther out is a genuine error.
        """
        arr = np.asarray(probs, dtype=float)
        if arr.min() < -tol or abs(arr.sum() - 1.0) > tol:
            raise ValueError(f"probabilities out of tolerance: {probs}")
        arr = np.clip(arr, 0.0, None)
        arr = arr / arr.sum()
        return SiteLaw(alphabet, tuple(float(x) for x in arr))


def fair_coin_law() -> SiteLaw:
    return SiteLaw(COIN_ALPHABET, (0.5, 0.5))


def coin_law(theta: float) -> SiteLaw:
    """Coin with mean ``theta``: P(+1) = (1 + theta) / 2."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("coin bias must lie in [0, 1]")
    return SiteLaw(COIN_ALPHABET, ((1.0 - theta) / 2.0, (1.0 + theta) / 2.0))


class Scenery:
    """Reference law plus finitely many deviating site laws.

    Sites whose law equals ``alpha`` (within 1e-10) are dropped at
    construction, so ``deviations`` only contains genuine deviations.
    """

    def __init__(self, alpha: SiteLaw, deviations: Mapping[int, SiteLaw]):
        self.alpha = alpha
        kept: dict[int, SiteLaw] = {}
        for z, law in deviations.items():
            if law.alphabet != alpha.alphabet:
                raise AlphabetMismatch(f"site {z} uses a different alphabet")
            if max(abs(a - b) for a, b in zip(law.probs, alpha.probs)) > _ALPHA_EQ_TOL:
                kept[int(z)] = law
        self.deviations = dict(sorted(kept.items()))

    @property
    def alphabet(self) -> Alphabet:
        return self.alpha.alphabet

    def law_at(self, z: int) -> SiteLaw:
        return self.deviations.get(z, self.alpha)

    def __eq__(self, other) -> bool:
        return (isinstance(other, Scenery) and self.alpha == other.alpha
                and self.deviations == other.deviations)

    def __repr__(self) -> str:
        return f"Scenery(alpha={self.alpha.probs}, deviations={sorted(self.deviations)})"


@dataclass(frozen=True)
class CoinScenery:
    """Coin biases keyed by site; converts to a scenery over {-1, +1}."""

    theta: Mapping[int, float]

    def __post_init__(self):
        for z, th in self.theta.items():
            if not 0.0 <= th <= 1.0:
                raise ValueError(f"bias at site {z} outside [0, 1]")

    def to_scenery(self) -> Scenery:
        return Scenery(fair_coin_law(),
                       {z: coin_law(th) for z, th in self.theta.items() if th != 0.0})


@dataclass(frozen=True)
class TestFunction:
    """Real-valued function on the alphabet, bounded in sup norm.

    User-facing functions are bounded by 1; centered and combined
    functions built internally may reach ``max_norm`` above 1.
    """

    __test__ = False        # domain type, despite what pytest thinks

    alphabet: Alphabet
    values: tuple[float, ...]
    name: str = "phi"
    max_norm: float = 1.0

    def __post_init__(self):
        if len(self.values) != self.alphabet.size:
            raise ValueError("one value per symbol required")
        if max(abs(v) for v in self.values) > self.max_norm + 1e-9:
            raise ValueError(f"sup norm exceeds {self.max_norm}: {self.values}")

    def value_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


def identity_function(alphabet: Alphabet = COIN_ALPHABET) -> TestFunction:
    """The embedding symbol -> value, rescaled into the unit ball."""
    scale = max(1.0, max(abs(v) for v in alphabet.values))
    return TestFunction(alphabet, tuple(v / scale for v in alphabet.values), "identity")


def indicator_function(alphabet: Alphabet, symbol: str) -> TestFunction:
    vals = tuple(1.0 if s == symbol else 0.0 for s in alphabet.symbols)
    return TestFunction(alphabet, vals, f"ind[{symbol}]")


def indicator_functions(alphabet: Alphabet) -> list[TestFunction]:
    return [indicator_function(alphabet, s) for s in alphabet.symbols]


def scale_function(phi: TestFunction, c: float) -> TestFunction:
    return TestFunction(phi.alphabet, tuple(c * v for v in phi.values),
                        f"{c}*{phi.name}", max_norm=2.0)


def add_functions(f: TestFunction, g: TestFunction, name: str | None = None) -> TestFunction:
    if f.alphabet != g.alphabet:
        raise AlphabetMismatch("cannot add functions over different alphabets")
    vals = tuple(a + b for a, b in zip(f.values, g.values))
    return TestFunction(f.alphabet, vals, name or f"{f.name}+{g.name}", max_norm=4.0)


def combine_functions(f: TestFunction, g: TestFunction, c: float) -> TestFunction:
    """(f + c g) / ||f + c g||_inf, the combination family used when a
    single function cannot separate two site laws."""
    if f.alphabet != g.alphabet:
        raise AlphabetMismatch("cannot combine functions over different alphabets")
    vals = [a + c * b for a, b in zip(f.values, g.values)]
    norm = max(abs(v) for v in vals)
    if norm == 0.0:
        raise ValueError("combination is identically zero")
    return TestFunction(f.alphabet, tuple(v / norm for v in vals),
                        f"({f.name}+{c}*{g.name})/{norm:.3g}")


def mean_of(phi: TestFunction, law: SiteLaw) -> float:
    """Mean of ``phi`` under ``law``."""
    if phi.alphabet != law.alphabet:
        raise AlphabetMismatch("function and law use different alphabets")
    return float(sum(v * p for v, p in zip(phi.values, law.probs)))


def center(phi: TestFunction, alpha: SiteLaw) -> TestFunction:
    """Subtract the reference mean, so the result has mean 0 under alpha."""
    mu = mean_of(phi, alpha)
    return TestFunction(phi.alphabet, tuple(v - mu for v in phi.values),
                        f"{phi.name}_0", max_norm=2.0)


def bounds(s: Scenery) -> tuple[int, int, int]:
    """Support window (a, b, ell): extreme deviating sites and width."""
    if not s.deviations:
        raise EmptyScenery("scenery has no deviating site")
    sites = s.deviations.keys()
    a, b = min(sites), max(sites)
    return a, b, b - a


def site_means(s: Scenery, phi: TestFunction) -> dict[int, float]:
    """Means of ``phi`` at every deviating site."""
    return {z: mean_of(phi, law) for z, law in s.deviations.items()}


def brute_force_Q(s: Scenery, phi0: TestFunction, d: Sequence[int]) -> float:
    """Geometric moment Q^k_d by direct enumeration over deviating sites.

    Sums prod_i <phi0>_{z_i} over all site tuples (z_1, ..., z_{k+1})
    with |z_j - z_{j-1}| = d_j.  Requires ``phi0`` centered under the
    reference law so that non-deviating sites contribute nothing; a
    zero-distance leg pins consecutive sites together, a positive one
    branches both ways.
    """
    if abs(mean_of(phi0, s.alpha)) > _CENTER_TOL:
        raise NotCentered(f"{phi0.name} has nonzero reference mean")
    means = site_means(s, phi0)
    d = tuple(int(x) for x in d)
    total = 0.0

    def walk(z: int, prod: float, j: int) -> None:
        nonlocal total
        if j == len(d):
            total += prod
            return
        dj = d[j]
        for w in ((z,) if dj == 0 else (z - dj, z + dj)):
            mw = means.get(w)
            if mw is not None:
                walk(w, prod * mw, j + 1)

    for z, mz in means.items():
        walk(z, mz, 0)
    return total


def shift(s: Scenery, j: int) -> Scenery:
    return Scenery(s.alpha, {z + j: law for z, law in s.deviations.items()})


def reflect(s: Scenery) -> Scenery:
    return Scenery(s.alpha, {-z: law for z, law in s.deviations.items()})


def _bracket_key(x):
    if isinstance(x, SiteLaw):
        return x.probs
    if isinstance(x, (tuple, list)):
        return tuple(_bracket_key(v) for v in x)
    return x


@dataclass(frozen=True)
class BracketSequence:
    """Equivalence class {sequence, reversal}, stored canonically.

    The canonical representative is the lexicographically smaller of the
    sequence and its reversal (site laws compare as probability
    vectors); ties keep the sequence itself.
    """

    canonical: tuple

    def __len__(self) -> int:
        return len(self.canonical)

    def values(self) -> tuple:
        return self.canonical


def canonical_bracket(seq: Sequence) -> BracketSequence:
    fwd = tuple(seq)
    rev = tuple(reversed(fwd))
    if _bracket_key(rev) < _bracket_key(fwd):
        return BracketSequence(rev)
    return BracketSequence(fwd)


def brackets_close(x: BracketSequence, y: BracketSequence, tol: float) -> bool:
    """Max-abs comparison of two brackets of floats (or float tuples),
    allowing either relative orientation."""
    a = np.asarray(x.canonical, dtype=float)
    b = np.asarray(y.canonical, dtype=float)
    if a.shape != b.shape:
        return False
    return bool(np.max(np.abs(a - b)) <= tol
                or np.max(np.abs(a - b[::-1])) <= tol)


def scenery_from_json(doc: Mapping) -> Scenery:
    """Parse a scenery document.

    Full form: {"alphabet": ["-1","+1"], "alpha": [0.5,0.5],
    "deviations": {"0": [0.2,0.8]}}.  Coin shorthand:
    {"coins": {"0": 0.6, "2": 0.3}}.
    """
    if "coins" in doc:
        return CoinScenery({int(k): float(v) for k, v in doc["coins"].items()}).to_scenery()
    symbols = tuple(str(s) for s in doc["alphabet"])
    values_raw = doc.get("values")
    if values_raw is not None:
        values = tuple(float(v) for v in values_raw)
    else:
        try:
            values = tuple(float(s) for s in symbols)
        except ValueError:
            values = tuple(float(i) for i in range(len(symbols)))
    alphabet = Alphabet(symbols, values)
    alpha = SiteLaw(alphabet, tuple(float(p) for p in doc["alpha"]))
    deviations = {int(z): SiteLaw(alphabet, tuple(float(p) for p in probs))
                  for z, probs in doc.get("deviations", {}).items()}
    return Scenery(alpha, deviations)


def scenery_to_json(s: Scenery) -> dict:
    return {
        "alphabet": list(s.alphabet.symbols),
        "values": list(s.alphabet.values),
        "alpha": list(s.alpha.probs),
        "deviations": {str(z): list(law.probs) for z, law in s.deviations.items()},
    }
