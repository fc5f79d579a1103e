"""Seeded generation of hidden walk paths and observation streams.

Randomness comes from counter-based Philox generators keyed by
(seed, stream id), one stream for the walk increments and one for the
observations, so results do not depend on the order in which the two
are consumed.  Batch and streaming generation draw the same uniforms
and therefore produce bit-identical output for equal seeds.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import InsufficientObservations
from .lattice_walk import IncrementLaw
from .scenery import Alphabet, Scenery

_WALK_STREAM = 0
_OBS_STREAM = 1


def _generator(seed: int, stream: int) -> np.random.Generator:
    key = np.array([np.uint64(seed), np.uint64(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _law_cdf(probs) -> np.ndarray:
    cdf = np.cumsum(np.asarray(probs, dtype=float))
    cdf[-1] = 1.0
    return cdf


def sample_walk(law: IncrementLaw, steps: int, seed: int) -> np.ndarray:
    """Walk path (S_0, ..., S_steps) started at 0 with i.i.d. increments."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    path = np.zeros(steps + 1, dtype=np.int64)
    if steps == 0:
        return path
    gen = _generator(seed, _WALK_STREAM)
    offsets = np.asarray(law.offsets, dtype=np.int64)
    cdf = _law_cdf(law.probs)
    inc = offsets[np.searchsorted(cdf, gen.random(steps), side="right")]
    np.cumsum(inc, out=path[1:])
    return path


def observe(law: IncrementLaw, s: Scenery, steps: int, seed: int) -> np.ndarray:
    """Observation symbols (indices) X_0..X_steps along a hidden path.

    X_n is drawn from the site law at S_n with fresh randomness each
    step, via inverse transform on the observation stream.
    """
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    path = sample_walk(law, steps, seed)
    gen = _generator(seed, _OBS_STREAM)
    uniforms = gen.random(steps + 1)
    alpha_cdf = _law_cdf(s.alpha.probs)
    out = np.searchsorted(alpha_cdf, uniforms, side="right").astype(np.int64)
    for z, site_law in s.deviations.items():
        mask = path == z
        if mask.any():
            cdf = _law_cdf(site_law.probs)
            out[mask] = np.searchsorted(cdf, uniforms[mask], side="right")
    return out


class ObservationStream:
    """Single-consumer stream of observation symbols.

    Constant memory: only the current site and the two generator states
    survive between steps.  ``take`` after ``iter`` continues from the
    current position; the full stream equals :func:`observe` for the
    same seed.
    """

    def __init__(self, law: IncrementLaw, s: Scenery, seed: int):
        self.law = law
        self.scenery = s
        self.seed = seed
        self.position = 0
        self._site = 0
        self._walk_gen = _generator(seed, _WALK_STREAM)
        self._obs_gen = _generator(seed, _OBS_STREAM)
        self._offsets = np.asarray(law.offsets, dtype=np.int64)
        self._qcdf = _law_cdf(law.probs)
        self._cdfs = {z: _law_cdf(sl.probs) for z, sl in s.deviations.items()}
        self._alpha_cdf = _law_cdf(s.alpha.probs)

    def __iter__(self) -> Iterator[int]:
        return self

    def __next__(self) -> int:
        if self.position > 0:
            u = self._walk_gen.random()
            self._site += int(self._offsets[np.searchsorted(self._qcdf, u, side="right")])
        cdf = self._cdfs.get(self._site, self._alpha_cdf)
        symbol = int(np.searchsorted(cdf, self._obs_gen.random(), side="right"))
        self.position += 1
        return symbol

    def take(self, n: int) -> np.ndarray:
        return np.fromiter((next(self) for _ in range(n)), dtype=np.int64, count=n)


def write_observations(path: str | Path, symbols: np.ndarray, alphabet: Alphabet,
                       seed: int, fmt: str = "jsonl") -> None:
    """Write an observation file.

    jsonl: a header line {"alphabet": [...], "n": N, "seed": ...}
    followed by one symbol index per line.  bin: one byte per symbol,
    with the same header in a ``<path>.json`` sidecar.
    """
    path = Path(path)
    header = {"alphabet": list(alphabet.symbols), "n": int(len(symbols)) - 1,
              "seed": int(seed), "format": fmt}
    if fmt == "jsonl":
        with open(path, "w") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            fh.write("\n".join(str(int(x)) for x in symbols))
            fh.write("\n")
    elif fmt == "bin":
        if alphabet.size > 256:
            raise ValueError("binary format holds at most 256 symbols")
        path.write_bytes(np.asarray(symbols, dtype=np.uint8).tobytes())
        Path(str(path) + ".json").write_text(json.dumps(header, sort_keys=True) + "\n")
    else:
        raise ValueError(f"unknown observation format: {fmt}")


def read_observations(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read either observation format back as (symbol indices, header)."""
    path = Path(path)
    sidecar = Path(str(path) + ".json")
    if sidecar.exists():
        header = json.loads(sidecar.read_text())
        symbols = np.frombuffer(path.read_bytes(), dtype=np.uint8).astype(np.int64)
    else:
        with open(path) as fh:
            header = json.loads(fh.readline())
            symbols = np.array([int(line) for line in fh if line.strip()], dtype=np.int64)
    expected = header.get("n")
    if expected is not None and len(symbols) != expected + 1:
        raise InsufficientObservations(
            f"observation file truncated: header says {expected + 1} symbols, "
            f"found {len(symbols)}")
    return symbols, header
