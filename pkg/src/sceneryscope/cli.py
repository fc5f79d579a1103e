"""Batch front end: simulate, oracle round trips, reconstruction, benchmarks.

One JSON config document drives every subcommand; command-line flags
override the seed, output path and format.  All outputs are
deterministic functions of (config, seed): reports are JSON with sorted
keys, benchmarks are CSV with a fixed row order.

Exit codes: 0 success, 2 config error, 3 insufficient data, 4 no
signal, 5 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import moments, sim
from .errors import (AmbiguousPairing, ConfigError, DegenerateEndpoint,
                     DimensionMismatch, HorizonTooSmall, InconsistentProfiles,
                     InsufficientObservations, InvalidIncrementLaw,
                     NegativeDiscriminant, NoSeparatingFunction, NoSignal,
                     RankNotReached, SceneryScopeError)
from .lattice_walk import law_from_json
from .reconstruct import (ExactSource, ObservedSource, ReconstructConfig,
                          Tolerances, reconstruct_scenery)
from .scenery import (Alphabet, COIN_ALPHABET, SiteLaw, canonical_bracket,
                      scenery_from_json)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INSUFFICIENT = 3
EXIT_NO_SIGNAL = 4
EXIT_NUMERIC = 5

_NUMERIC_ERRORS = (RankNotReached, NegativeDiscriminant, AmbiguousPairing,
                   InconsistentProfiles, DegenerateEndpoint, NoSeparatingFunction,
                   DimensionMismatch)

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "increment_law": {
            "type": "object",
            "properties": {"q": {"type": "object"}},
            "required": ["q"],
        },
        "scenery": {"type": "object"},
        "alpha": {"type": "array", "items": {"type": "number"}},
        "alphabet": {"type": "array", "items": {"type": "string"}},
        "values": {"type": "array", "items": {"type": "number"}},
        "seed": {"type": "integer", "minimum": 0},
        "horizon": {"type": "integer", "minimum": 0},
        "m_max": {"type": "integer", "minimum": 0},
        "r_cap": {"type": "integer", "minimum": 1},
        "rank_tol": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "tau": {"type": ["number", "null"]},
        "tolerances": {
            "type": "object",
            "properties": {
                "degenerate": {"type": "number"},
                "tie": {"type": "number"},
                "discriminant": {"type": "number"},
                "profile_match": {"type": "number"},
            },
        },
        "bench": {
            "type": "object",
            "properties": {
                "horizons": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "seeds": {"type": "array", "items": {"type": "integer"}, "minItems": 1},
                "gap_vectors": {
                    "type": "array",
                    "items": {"type": "array", "items": {"type": "integer"}},
                    "minItems": 1,
                },
            },
            "required": ["horizons", "seeds"],
        },
        "output": {
            "type": "object",
            "properties": {
                "path": {"type": "string"},
                "format": {"enum": ["jsonl", "bin"]},
            },
        },
    },
    "required": ["increment_law"],
}

# tau=None means: exact-mode commands fall back to the fixed 1e-6
# threshold, estimation-mode commands scale thresholds from the
# propagated standard errors
DEFAULTS = {
    "seed": 0,
    "horizon": 100_000,
    "m_max": 8,
    "r_cap": 128,
    "rank_tol": 1e-10,
    "tau": None,
    "tolerances": {},
    "output": {"format": "jsonl"},
    "bench": {"gap_vectors": [[1]]},
}


def load_config(path: str, overrides: argparse.Namespace) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config validation failed: {exc.message}") from exc
    cfg = json.loads(json.dumps(DEFAULTS))
    for key, val in doc.items():
        if isinstance(val, dict) and isinstance(cfg.get(key), dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    if overrides.seed is not None:
        cfg["seed"] = overrides.seed
    if getattr(overrides, "out", None):
        cfg.setdefault("output", {})["path"] = overrides.out
    if getattr(overrides, "format", None):
        cfg.setdefault("output", {})["format"] = overrides.format
    return cfg


def _law(cfg: dict):
    try:
        return law_from_json(cfg["increment_law"])
    except InvalidIncrementLaw as exc:
        raise ConfigError(f"invalid increment law: {exc}") from exc


def _scenery(cfg: dict):
    if "scenery" not in cfg:
        raise ConfigError("this command needs a 'scenery' entry in the config")
    return scenery_from_json(cfg["scenery"])


def _recon_config(cfg: dict) -> ReconstructConfig:
    tol = Tolerances(**cfg.get("tolerances", {})) if cfg.get("tolerances") else Tolerances()
    return ReconstructConfig(m_max=cfg["m_max"], r_cap=cfg["r_cap"],
                             rank_tol=cfg["rank_tol"], tau=cfg["tau"],
                             tolerances=tol)


def _emit(report: dict, out_path: str | None) -> None:
    text = json.dumps(report, sort_keys=True, indent=2, default=float)
    if out_path:
        Path(out_path).write_text(text + "\n")
    print(text)


def cmd_simulate(cfg: dict) -> int:
    law = _law(cfg)
    scen = _scenery(cfg)
    out = cfg.get("output", {})
    path = out.get("path")
    if not path:
        raise ConfigError("simulate needs an output path (--out or output.path)")
    symbols = sim.observe(law, scen, cfg["horizon"], cfg["seed"])
    sim.write_observations(path, symbols, scen.alphabet, cfg["seed"],
                           out.get("format", "jsonl"))
    digest = hashlib.sha256(Path(path).read_bytes()).hexdigest()
    _emit({"command": "simulate", "path": str(path), "n": cfg["horizon"],
           "seed": cfg["seed"], "alphabet": list(scen.alphabet.symbols),
           "format": out.get("format", "jsonl"), "sha256": digest}, None)
    return EXIT_OK


def cmd_oracle(cfg: dict) -> int:
    law = _law(cfg)
    scen = _scenery(cfg)
    result = reconstruct_scenery(ExactSource(law, scen), _recon_config(cfg))
    report = {"command": "oracle", "diagnostics": result.diagnostics}
    if not scen.deviations:
        report["verdict"] = "all-alpha" if result.ell is None else "spurious-signal"
        report["ell"] = result.ell
        _emit(report, cfg.get("output", {}).get("path"))
        return EXIT_OK if result.ell is None else EXIT_NUMERIC
    sites = sorted(scen.deviations)
    true_bracket = canonical_bracket(tuple(scen.law_at(z) for z in
                                           range(sites[0], sites[-1] + 1)))
    report["true_bracket"] = [list(lw.probs) for lw in true_bracket.canonical]
    if result.ell is None:
        report["verdict"] = "no-signal"
        _emit(report, cfg.get("output", {}).get("path"))
        return EXIT_NO_SIGNAL
    report["ell"] = result.ell
    report["reconstructed"] = [list(lw.probs) for lw in result.bracket.canonical]
    truth = np.array([lw.probs for lw in true_bracket.canonical])
    if result.ell == len(truth) - 1:
        got = np.array([lw.probs for lw in result.bracket.canonical])
        err = min(np.max(np.abs(got - truth)), np.max(np.abs(got[::-1] - truth)))
    else:
        err = float("inf")
    report["max_abs_error"] = float(err)
    report["verdict"] = "match" if err < 1e-6 else "mismatch"
    _emit(report, cfg.get("output", {}).get("path"))
    return EXIT_OK


def cmd_reconstruct(cfg: dict, obs_path: str) -> int:
    law = _law(cfg)
    symbols, header = sim.read_observations(obs_path)
    symbol_names = tuple(str(s) for s in header.get("alphabet", cfg.get("alphabet", ())))
    if not symbol_names:
        raise ConfigError("observation header carries no alphabet and none configured")
    if "values" in cfg:
        values = tuple(float(v) for v in cfg["values"])
    else:
        try:
            values = tuple(float(s) for s in symbol_names)
        except ValueError:
            values = tuple(float(i) for i in range(len(symbol_names)))
    alphabet = Alphabet(symbol_names, values)
    if "alpha" in cfg:
        alpha = SiteLaw(alphabet, tuple(float(p) for p in cfg["alpha"]))
    elif alphabet == COIN_ALPHABET:
        alpha = SiteLaw(alphabet, (0.5, 0.5))
    else:
        raise ConfigError("non-coin alphabets need an explicit 'alpha' in the config")
    source = ObservedSource(law, symbols, alphabet, alpha)
    result = reconstruct_scenery(source, _recon_config(cfg))
    report = {"command": "reconstruct", "observations": len(symbols)}
    report.update(result.to_json())
    _emit(report, cfg.get("output", {}).get("path"))
    return EXIT_NO_SIGNAL if result.ell is None else EXIT_OK


def cmd_bench(cfg: dict) -> int:
    law = _law(cfg)
    scen = _scenery(cfg)
    bench = cfg.get("bench")
    if not bench or "horizons" not in bench or "seeds" not in bench:
        raise ConfigError("bench needs bench.horizons and bench.seeds")
    horizons = sorted(int(n) for n in bench["horizons"])
    seeds = [int(s) for s in bench["seeds"]]
    gaps = [tuple(int(x) for x in tv) for tv in bench.get("gap_vectors", [[1]])]
    if not seeds:
        raise ConfigError("bench.seeds must be nonempty")
    if scen.alphabet == COIN_ALPHABET:
        from .scenery import center, identity_function
        phi = center(identity_function(scen.alphabet), scen.alpha)
    else:
        from .scenery import center, indicator_functions
        phi = center(indicator_functions(scen.alphabet)[0], scen.alpha)
    exact = {tv: moments.exact_p(law, scen, phi, tv) for tv in gaps}
    nmax = max(horizons)

    def one_seed(seed: int):
        obs = sim.observe(law, scen, nmax, seed)
        rows = []
        for n in horizons:
            for tv in gaps:
                est = moments.estimate_p(law, obs[: n + 1], phi, tv)
                rows.append((n, seed, tv, est, exact[tv], est - exact[tv]))
        return rows

    workers = int(os.environ.get("SCENERYSCOPE_THREADS", "0")) or min(8, os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        all_rows = [row for rows in pool.map(one_seed, seeds) for row in rows]
    all_rows.sort(key=lambda r: (r[0], r[1], r[2]))

    out_path = cfg.get("output", {}).get("path")
    if out_path:
        with open(out_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["n", "seed", "t_vector", "estimate", "exact", "error"])
            for n, seed, tv, est, exa, err in all_rows:
                writer.writerow([n, seed, " ".join(map(str, tv)),
                                 f"{est:.12g}", f"{exa:.12g}", f"{err:.12g}"])
    mse = {}
    for n, _seed, tv, _est, _exa, err in all_rows:
        mse.setdefault((n, tv), []).append(err * err)
    aggregate = [{"n": n, "t_vector": list(tv),
                  "mse": float(np.mean(errs)), "seeds": len(errs)}
                 for (n, tv), errs in sorted(mse.items())]
    _emit({"command": "bench", "rows": len(all_rows), "function": phi.name,
           "csv": out_path, "aggregate": aggregate}, None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sceneryscope",
        description="simulate hidden-walk observation streams and reconstruct sceneries")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [("simulate", "write an observation file"),
                            ("oracle", "exact forward/backward round trip"),
                            ("reconstruct", "reconstruct a scenery from observations"),
                            ("bench", "estimator convergence benchmark")]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="JSON config path")
        cmd.add_argument("--seed", type=int, default=None, help="override config seed")
        cmd.add_argument("--out", default=None, help="override output path")
        cmd.add_argument("--format", choices=["jsonl", "bin"], default=None,
                         help="observation file format")
        if name == "reconstruct":
            cmd.add_argument("--obs", required=True, help="observation file path")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "oracle":
            return cmd_oracle(cfg)
        if args.command == "reconstruct":
            return cmd_reconstruct(cfg, args.obs)
        if args.command == "bench":
            return cmd_bench(cfg)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(json.dumps({"error": "config", "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except (InsufficientObservations, HorizonTooSmall) as exc:
        print(json.dumps({"error": "insufficient-data", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_INSUFFICIENT
    except NoSignal as exc:
        print(json.dumps({"error": "no-signal", "message": str(exc)}), file=sys.stderr)
        return EXIT_NO_SIGNAL
    except _NUMERIC_ERRORS as exc:
        print(json.dumps({"error": "numeric", "stage": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC
    except SceneryScopeError as exc:
        print(json.dumps({"error": "numeric", "stage": type(exc).__name__,
                          "message": str(exc)}), file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
