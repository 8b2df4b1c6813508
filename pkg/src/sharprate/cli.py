"""Command-line front end.

    sharprate [rate|constant|verify|paths] --config run.json [--seed S] [--out DIR] [--threads N]

The command comes from the config's ``command`` field; a positional command,
if given, must agree with it.  Exit codes: 0 success, 1 verification
failure, 2 config/validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Optional

from . import analytic, experiment, verify
from .convex import ConsistencyError, ConvexSpec, spec_from_dict
from .models import CovarianceModel, ParameterError, model_from_dict
from .sampler import EmbeddingError, NotPositiveDefinite, sample_paths, write_paths_csv

log = logging.getLogger("sharprate")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
COMMANDS = ("rate", "constant", "verify", "paths")
RATE_HEADER = "n,analytic_error,leading_term,remainder,ratio,mc_error,mc_se"
PATHS_LIMIT = 10**8
DEFAULT_SEED = 0

_TOP_KEYS = {"command", "model", "spec", "n_list", "mc", "n", "m", "seed", "sampler", "out", "verify"}
_REQUIRED = {
    "rate": {"model", "spec", "n_list"},
    "constant": {"model", "spec"},
    "verify": set(),
    "paths": {"model", "n", "m"},
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    model: Optional[CovarianceModel] = None
    spec: Optional[ConvexSpec] = None
    n_list: list = field(default_factory=list)
    mc: Optional[tuple] = None
    n: Optional[int] = None
    m: Optional[int] = None
    seed: int = DEFAULT_SEED
    seed_given: bool = False
    sampler: str = "auto"
    out: str = "."
    verify_sizes: verify.VerifySizes = field(default_factory=verify.VerifySizes)


def _int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}")
    return value


def parse_config(raw: dict, *, command: Optional[str] = None, seed: Optional[int] = None, out: Optional[str] = None, base_dir=None) -> RunConfig:
    """Validate a decoded JSON config.  Raises ConfigError or ParameterError."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = raw.keys() - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    cmd = raw.get("command", command)
    if cmd not in COMMANDS:
        raise ConfigError(f"command must be one of {COMMANDS}, got {cmd!r}")
    if command is not None and command != cmd:
        raise ConfigError(f"command {command!r} conflicts with config command {cmd!r}")
    missing = _REQUIRED[cmd] - raw.keys()
    if missing:
        raise ConfigError(f"command {cmd!r} needs keys {sorted(missing)}")

    cfg = RunConfig(command=cmd)
    if "model" in raw:
        cfg.model = model_from_dict(raw["model"], base_dir=base_dir)
    if "spec" in raw:
        cfg.spec = spec_from_dict(raw["spec"])
    if "n_list" in raw:
        n_list = raw["n_list"]
        if not isinstance(n_list, list):
            raise ConfigError("n_list must be a list of integers")
        cfg.n_list = [_int(v, "n_list entry", 1) for v in n_list]
        if cmd == "rate":
            if len(cfg.n_list) < 3:
                raise ConfigError("n_list needs at least 3 grid sizes for a rate fit")
            if any(b <= a for a, b in zip(cfg.n_list, cfg.n_list[1:])):
                raise ConfigError("n_list must be strictly increasing")
    if "seed" in raw:
        cfg.seed = _int(raw["seed"], "seed", 0)
        cfg.seed_given = True
    if raw.get("mc") is not None:
        mc = raw["mc"]
        if not isinstance(mc, dict) or mc.keys() - {"m", "seed"} or "m" not in mc:
            raise ConfigError("mc must be an object {m, seed}")
        mc_seed = _int(mc.get("seed", cfg.seed), "mc.seed", 0)
        cfg.mc = (_int(mc["m"], "mc.m", 2), mc_seed)
        if "seed" in mc:
            cfg.seed, cfg.seed_given = mc_seed, True
    if "n" in raw:
        cfg.n = _int(raw["n"], "n", 1)
    if "m" in raw:
        cfg.m = _int(raw["m"], "m", 1)
    if "sampler" in raw:
        if raw["sampler"] not in ("auto", "cholesky", "circulant"):
            raise ConfigError("sampler must be auto, cholesky or circulant")
        cfg.sampler = raw["sampler"]
        if cfg.sampler == "circulant" and cfg.model is not None and cfg.model.kind.value != "fbm":
            raise ConfigError("circulant sampler only supports fbm models")
    if "verify" in raw:
        sizes = raw["verify"]
        fields = set(verify.VerifySizes.__dataclass_fields__)
        if not isinstance(sizes, dict) or sizes.keys() - fields:
            raise ConfigError(f"verify must be an object with keys from {sorted(fields)}")
        cfg.verify_sizes = verify.VerifySizes(**{k: _int(v, f"verify.{k}", 1) for k, v in sizes.items()})
    if "out" in raw:
        if not isinstance(raw["out"], str):
            raise ConfigError("out must be a string path")
        cfg.out = raw["out"] if base_dir is None or os.path.isabs(raw["out"]) else os.path.join(base_dir, raw["out"])
    if out is not None:
        cfg.out = out
    if seed is not None:
        cfg.seed, cfg.seed_given = seed, True
        if cfg.mc is not None:
            cfg.mc = (cfg.mc[0], seed)
    if cmd == "paths" and cfg.m * (cfg.n + 1) > PATHS_LIMIT:
        raise ConfigError(f"paths output too large: m*(n+1) = {cfg.m * (cfg.n + 1)} > {PATHS_LIMIT}")
    return cfg


def _num(x) -> str:
    return "" if x is None else format(float(x), ".17g")


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def cmd_rate(cfg: RunConfig, threads: int = 1) -> dict:
    study = experiment.rate_study(cfg.model, cfg.spec, cfg.n_list, cfg.mc, sampler=cfg.sampler, threads=threads)
    buf = io.StringIO()
    buf.write(RATE_HEADER + "\n")
    for r in study.reports:
        buf.write(",".join([str(r.n), _num(r.analytic_error), _num(r.leading_term), _num(r.remainder), _num(r.ratio), _num(r.mc_error), _num(r.mc_se)]) + "\n")
    summary = {
        "slope": study.fit.slope,
        "intercept": study.fit.intercept,
        "r_squared": study.fit.r_squared,
        "expected_slope": study.expected_slope,
        "constant": study.constant,
        "envelope_band": None if study.band is None else list(study.band),
        "variogram_bounds": None if study.variogram_bounds is None else list(study.variogram_bounds),
        "hurst": cfg.model.hurst,
        "sigma2": cfg.model.sigma2,
        "model": cfg.model.to_dict(),
        "n_list": cfg.n_list,
        "seed": None if cfg.mc is None else cfg.mc[1],
        "mc_paths": None if cfg.mc is None else cfg.mc[0],
    }
    return {"rate.csv": buf.getvalue(), "summary.json": _json(summary)}


def cmd_constant(cfg: RunConfig, threads: int = 1) -> dict:
    spec = cfg.spec if cfg.spec.is_convex else analytic.total_variation(cfg.spec)
    atoms, worst = [], 0.0
    for a, w in spec.atoms:
        c, rel = analytic.leading_constant_with_error(cfg.model, a)
        worst = max(worst, rel)
        atoms.append({"level": a, "weight": w, "C": c})
    aggregate = cfg.model.sigma2 * math.fsum(x["weight"] * x["C"] for x in atoms)
    doc = {
        "atoms": atoms,
        "aggregate": aggregate,
        "sigma2": cfg.model.sigma2,
        "hurst": cfg.model.hurst,
        "quadrature_rel_error": worst,
        "quadrature_rel_tolerance": analytic.QUAD_RTOL,
        "model": cfg.model.to_dict(),
    }
    return {"constant.json": _json(doc)}


def cmd_verify(cfg: RunConfig, threads: int = 1) -> dict:
    suites = verify.run_all(cfg.verify_sizes, cfg.seed)
    doc = {
        "suites": suites,
        "passed": all(s["passed"] for s in suites.values()),
        "seed": cfg.seed,
        "seed_source": "config" if cfg.seed_given else "default",
    }
    return {"verify.json": _json(doc)}


def cmd_paths(cfg: RunConfig, threads: int = 1) -> dict:
    batch = sample_paths(cfg.model, cfg.n, cfg.m, cfg.seed, sampler=cfg.sampler, threads=threads)
    buf = io.StringIO()
    write_paths_csv(batch, buf)
    return {"paths.csv": buf.getvalue()}


HANDLERS = {"rate": cmd_rate, "constant": cmd_constant, "verify": cmd_verify, "paths": cmd_paths}


def _write(out_dir, files: dict):
    os.makedirs(out_dir, exist_ok=True)
    for name, text in files.items():
        with open(os.path.join(out_dir, name), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sharprate", description=__doc__.split("\n\n")[0])
    p.add_argument("command", nargs="?", choices=COMMANDS, help="must match the config's command field")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=1, help="worker threads for sampling (0 = auto)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    threads = args.threads if args.threads > 0 else (os.cpu_count() or 1)
    if args.seed is not None and not (0 <= args.seed < 2**64):
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with open(args.config, encoding="utf-8") as fh:
            raw = json.load(fh)
        cfg = parse_config(raw, command=args.command, seed=args.seed, out=args.out, base_dir=os.path.dirname(os.path.abspath(args.config)))
    except (OSError, json.JSONDecodeError, ConfigError, ParameterError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        files = HANDLERS[cfg.command](cfg, threads)
    except (ParameterError, experiment.FitError, analytic.ModeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NotPositiveDefinite, EmbeddingError, analytic.QuadratureError, ConsistencyError, ArithmeticError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    _write(cfg.out, files)
    log.info("wrote %s to %s", ", ".join(sorted(files)), cfg.out)
    if cfg.command == "verify":
        doc = json.loads(files["verify.json"])
        failed = [name for name, s in doc["suites"].items() if not s["passed"]]
        if failed:
            print(f"verification failed: {', '.join(failed)}", file=sys.stderr)
            return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
