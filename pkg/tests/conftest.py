import numpy as np
import pytest

from sceneryscope import Alphabet, CoinScenery, Scenery, SiteLaw, validate

LAZY_RAW = {0: 0.5, 1: 0.25, -1: 0.25}


@pytest.fixture(scope="session")
def lazy():
    return validate(LAZY_RAW)


@pytest.fixture(scope="session")
def three_symbol_alphabet():
    return Alphabet(("a", "b", "c"), (0.0, 1.0, 2.0))


@pytest.fixture(scope="session")
def uniform_alpha(three_symbol_alphabet):
    return SiteLaw(three_symbol_alphabet, (1 / 3, 1 / 3, 1 / 3))


def random_coin_scenery(rng: np.random.Generator, max_ell: int = 6,
                        endpoint_grid=None) -> CoinScenery:
    """Coin scenery on a dyadic-friendly bias grid with nonzero endpoints."""
    grid = endpoint_grid or [round(0.1 * i, 1) for i in range(1, 10)]
    interior_grid = [0.0] + grid
    ell = int(rng.integers(0, max_ell + 1))
    start = int(rng.integers(-3, 4))
    theta = {start: float(rng.choice(grid))}
    if ell > 0:
        theta[start + ell] = float(rng.choice(grid))
        for j in range(1, ell):
            theta[start + j] = float(rng.choice(interior_grid))
    return CoinScenery(theta)


def random_site_law(rng: np.random.Generator, alphabet: Alphabet) -> SiteLaw:
    raw = rng.dirichlet(np.ones(alphabet.size))
    probs = np.round(raw, 3)
    probs[-1] = 1.0 - probs[:-1].sum()
    if probs.min() < 0:
        return random_site_law(rng, alphabet)
    return SiteLaw(alphabet, tuple(float(p) for p in probs))


def random_general_scenery(rng: np.random.Generator, alphabet: Alphabet,
                           alpha: SiteLaw, max_ell: int = 4,
                           distinct_endpoints: bool = True) -> Scenery:
    """Scenery with distinct non-reference endpoint laws."""
    ell = int(rng.integers(0 if not distinct_endpoints else 1, max_ell + 1))
    start = int(rng.integers(-2, 3))
    laws = {}
    while True:
        la = random_site_law(rng, alphabet)
        if max(abs(x - y) for x, y in zip(la.probs, alpha.probs)) > 0.05:
            break
    laws[start] = la
    if ell > 0:
        while True:
            lb = random_site_law(rng, alphabet)
            far_from_alpha = max(abs(x - y) for x, y in zip(lb.probs, alpha.probs)) > 0.05
            distinct = max(abs(x - y) for x, y in zip(lb.probs, la.probs)) > 0.05
            if far_from_alpha and (distinct or not distinct_endpoints):
                break
        laws[start + ell] = lb
        for j in range(1, ell):
            if rng.random() < 0.6:
                laws[start + j] = random_site_law(rng, alphabet)
    return Scenery(alpha, laws)
