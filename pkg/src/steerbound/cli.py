"""Command line front end.

Four subcommands cover the whole workflow: ``solids`` writes measurement
set files, ``bounds`` tabulates bound curves (optionally with the optimal
cheating mixtures), ``optimize`` searches for better sets, and
``simulate`` runs the Monte-Carlo experiment and renders a verdict.

Every output carries a short hash of the fully resolved run
configuration, so a file can always be traced back to the exact command
that produced it. Exit codes: 0 success, 2 usage error, 3 numerical
failure. STEERBOUND_THREADS caps worker threads in the optimizer.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import serialize
from .bounds import (
    BoundConsistencyError,
    BoundCurve,
    bound_curve,
    mixture_from_dict,
)
from .geometry import (
    GeometryError,
    MeasurementSet,
    fingerprint,
    from_parameters,
    geodesic_union,
    platonic_set,
    with_group_weights,
)
from .lp import LpError
from .optimize import OptimizerConfig, optimize_full, sweep
from .simulate import WernerModel, run_cheating, run_honest, verdict

FAMILIES = {
    "platonic-2": lambda: platonic_set(2),
    "platonic-3": lambda: platonic_set(3),
    "platonic-4": lambda: platonic_set(4),
    "platonic-6": lambda: platonic_set(6),
    "platonic-10": lambda: platonic_set(10),
    "geodesic-7": lambda: geodesic_union(platonic_set(3), platonic_set(4)),
    "geodesic-16": lambda: geodesic_union(platonic_set(6), platonic_set(10)),
}

KINDS = ("asymmetric", "symmetric", "grouped-symmetric")

logger = logging.getLogger(__name__)


class UsageError(Exception):
    pass


def _parse_grid(spec: str) -> np.ndarray:
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must look like min:max:step, got {spec!r}")
    try:
        lo, hi, step = (float(p) for p in parts)
    except ValueError as exc:
        raise UsageError(f"bad grid {spec!r}: {exc}") from None
    if step <= 0 or lo <= 0 or lo > hi or hi > 1.0 + 1e-12:
        raise UsageError(f"grid {spec!r} must satisfy 0 < min <= max <= 1 with step > 0")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    grid = lo + step * np.arange(count)
    return np.minimum(grid, 1.0)


def _default_grid(n: int) -> np.ndarray:
    grid = _parse_grid(f"{1.0 / n}:1:{1.0 / 140.0}")
    if grid[-1] < 1.0 - 1e-9:
        grid = np.append(grid, 1.0)
    return grid


def _parse_pair(text: str, what: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"{what} must be two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise UsageError(f"bad {what} {text!r}: {exc}") from None


def _load_set(path: str) -> MeasurementSet:
    data = serialize.load(path)
    payload = data.get("set", data) if isinstance(data, dict) else data
    return MeasurementSet.from_dict(payload)


def _config_hash(config: dict) -> str:
    return serialize.sha16(serialize.dumps(config))


def _resolve(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge config-file values under explicit flags, then fill defaults."""
    overrides = {}
    if args.config is not None:
        overrides = serialize.load(args.config)
        if not isinstance(overrides, dict):
            raise UsageError(f"config file {args.config} must hold a JSON object")
        unknown = sorted(set(overrides) - set(defaults))
        if unknown:
            raise UsageError(f"config file has unknown keys: {', '.join(unknown)}")
    resolved = {"command": args.command}
    for key, default in defaults.items():
        value = getattr(args, key)
        if value is None and key in overrides:
            value = overrides[key]
        if value is None:
            value = default
        resolved[key] = value
    return resolved


def _write_json(path: str, payload: dict) -> None:
    serialize.dump(payload, path)
    print(f"wrote {path}")


SOLIDS_DEFAULTS = {
    "family": None,
    "from_parameters": None,
    "group_weights": None,
    "out": None,
}


def cmd_solids(args: argparse.Namespace) -> int:
    cfg = _resolve(args, SOLIDS_DEFAULTS)
    if (cfg["family"] is None) == (cfg["from_parameters"] is None):
        raise UsageError("give exactly one of --family or --from-parameters")
    if cfg["family"] is not None:
        maker = FAMILIES.get(cfg["family"])
        if maker is None:
            raise UsageError(
                f"unknown family {cfg['family']!r}; choose from {', '.join(FAMILIES)}"
            )
        ms = maker()
        stem = cfg["family"]
    else:
        data = serialize.load(cfg["from_parameters"])
        ms = from_parameters(np.asarray(data["parameters"], dtype=float), int(data["n"]))
        stem = "custom"
    if cfg["group_weights"] is not None:
        if ms.groups is None:
            raise UsageError("--group-weights needs a grouped set")
        ms = with_group_weights(ms, _parse_pair(cfg["group_weights"], "--group-weights"))
    out = cfg["out"] or f"set_{stem}.json"
    _write_json(
        out,
        {
            "set": ms.to_dict(),
            "set_hash": fingerprint(ms),
            "config": cfg,
            "config_hash": _config_hash(cfg),
        },
    )
    return 0


BOUNDS_DEFAULTS = {
    "set": None,
    "kind": None,
    "grid": None,
    "emit_strategies": None,
    "out": None,
}


def cmd_bounds(args: argparse.Namespace) -> int:
    cfg = _resolve(args, BOUNDS_DEFAULTS)
    if cfg["set"] is None:
        raise UsageError("--set is required")
    if cfg["kind"] not in KINDS:
        raise UsageError(f"--kind must be one of {', '.join(KINDS)}")
    ms = _load_set(cfg["set"])
    if cfg["kind"] == "grouped-symmetric" and ms.groups is None:
        raise UsageError("grouped-symmetric needs a set with groups")
    grid = _parse_grid(cfg["grid"]) if cfg["grid"] else _default_grid(ms.n)

    curve, mixtures = bound_curve(ms, cfg["kind"], grid, return_mixtures=True)
    out = cfg["out"] or f"bounds_{cfg['kind']}_n{ms.n}.csv"
    curve.to_csv(out)
    print(f"wrote {out}")

    meta_path = (out[:-4] if out.endswith(".csv") else out) + ".meta.json"
    _write_json(
        meta_path,
        {
            "kind": cfg["kind"],
            "n": ms.n,
            "set_hash": fingerprint(ms),
            "grid": grid,
            "config": cfg,
            "config_hash": _config_hash(cfg),
        },
    )
    if cfg["emit_strategies"]:
        with open(cfg["emit_strategies"], "w", encoding="utf-8") as fh:
            for mix in mixtures:
                fh.write(serialize.dumps(mix.to_dict()))
                fh.write("\n")
        print(f"wrote {cfg['emit_strategies']}")
    return 0


OPTIMIZE_DEFAULTS = {
    "n": None,
    "epsilon": None,
    "sweep": None,
    "seed": 0,
    "starts": 32,
    "max_iters": None,
    "f_tol": 1e-8,
    "x_tol": 1e-6,
    "interpolation_points": 0,
    "allow_long": False,
    "out": None,
    "curve_out": None,
}


def cmd_optimize(args: argparse.Namespace) -> int:
    cfg = _resolve(args, OPTIMIZE_DEFAULTS)
    if cfg["n"] is None:
        raise UsageError("--n is required")
    n = int(cfg["n"])
    if (cfg["epsilon"] is None) == (cfg["sweep"] is None):
        raise UsageError("give exactly one of --epsilon or --sweep")
    if n > 8 and not cfg["allow_long"]:
        raise UsageError(
            f"n={n} costs roughly 1.85^n per evaluation; pass --allow-long to proceed"
        )
    opt_config = OptimizerConfig(
        n_starts=int(cfg["starts"]),
        max_iters=None if cfg["max_iters"] is None else int(cfg["max_iters"]),
        f_tol=float(cfg["f_tol"]),
        x_tol=float(cfg["x_tol"]),
        seed=int(cfg["seed"]),
    )
    if cfg["sweep"] is None:
        result = optimize_full(
            n, float(cfg["epsilon"]), opt_config, allow_large=bool(cfg["allow_long"])
        )
        out = cfg["out"] or f"optimize_n{n}.json"
        payload = result.to_dict()
        payload["cli_config"] = cfg
        payload["config_hash"] = _config_hash(cfg)
        _write_json(out, payload)
        print(f"bound {serialize.format_float(result.bound)} at epsilon "
              f"{serialize.format_float(result.epsilon)} ({result.status})")
        return 0

    grid = _parse_grid(cfg["sweep"])
    curve = sweep(
        n,
        grid,
        opt_config,
        interpolation_points=int(cfg["interpolation_points"]),
        allow_large=bool(cfg["allow_long"]),
    )
    out = cfg["out"] or f"sweep_n{n}.json"
    payload = {"n": n, **curve.meta, "cli_config": cfg, "config_hash": _config_hash(cfg)}
    _write_json(out, payload)
    curve_out = cfg["curve_out"] or f"sweep_n{n}.csv"
    curve.to_csv(curve_out)
    print(f"wrote {curve_out}")
    return 0


SIMULATE_DEFAULTS = {
    "set": None,
    "honest": None,
    "strategy": None,
    "epsilon": None,
    "shots": 1000000,
    "seed": 0,
    "bound": None,
    "alpha": 0.01,
    "out": None,
}


def _load_mixture(path: str, ms: MeasurementSet, epsilon: float | None):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh if line.strip()]
    if not lines:
        raise UsageError(f"strategy file {path} is empty")
    records = [json.loads(line) for line in lines]
    if len(records) == 1:
        return mixture_from_dict(records[0], ms)
    if epsilon is None:
        raise UsageError(
            f"strategy file {path} holds {len(records)} mixtures; pick one with --epsilon"
        )
    nearest = min(records, key=lambda rec: abs(float(rec["epsilon"]) - epsilon))
    return mixture_from_dict(nearest, ms)


def _load_bound(path: str, epsilon_hat: float) -> float:
    if path.endswith(".csv"):
        return BoundCurve.from_csv(path).value_at(epsilon_hat)
    data = serialize.load(path)
    if isinstance(data, dict) and "bound" in data:
        return float(data["bound"])
    raise UsageError(f"bound file {path} must be a curve CSV or a JSON with a 'bound' key")


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _resolve(args, SIMULATE_DEFAULTS)
    if cfg["set"] is None:
        raise UsageError("--set is required")
    if (cfg["honest"] is None) == (cfg["strategy"] is None):
        raise UsageError("give exactly one of --honest or --strategy")
    ms = _load_set(cfg["set"])
    shots = int(cfg["shots"])
    seed = int(cfg["seed"])

    if cfg["honest"] is not None:
        mu, eta = _parse_pair(cfg["honest"], "--honest")
        record = run_honest(WernerModel(mu=mu, eta=eta), ms, shots, seed)
        stem = "honest"
    else:
        eps = None if cfg["epsilon"] is None else float(cfg["epsilon"])
        mixture = _load_mixture(cfg["strategy"], ms, eps)
        record = run_cheating(mixture, ms, shots, seed)
        stem = "cheating"

    payload = record.to_dict()
    payload["config"] = cfg
    payload["config_hash"] = _config_hash(cfg)

    if cfg["bound"] is not None:
        bound = _load_bound(cfg["bound"], float(record.estimates["epsilon_hat"]))
        v = verdict(record, bound, alpha=float(cfg["alpha"]))
        payload["verdict"] = v.to_dict()
        print(serialize.dumps(v.to_dict()))
    else:
        print("no bound supplied; verdict omitted")

    out = cfg["out"] or f"record_{stem}.json"
    _write_json(out, payload)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="steerbound",
        description="Loss-tolerant steering bounds: sets, curves, optimization, simulation.",
    )
    parser.add_argument("--verbose", action="store_true", help="progress logging to stderr")
    parser.add_argument("--log", default=None, help="append progress logging to this file")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("solids", help="write a measurement set file")
    p.add_argument("--family", default=None, help=", ".join(FAMILIES))
    p.add_argument("--from-parameters", dest="from_parameters", default=None,
                   help="JSON file with fields n and parameters")
    p.add_argument("--group-weights", dest="group_weights", default=None,
                   help="two comma-separated group weights, e.g. 0.58,0.42")
    p.add_argument("--out", default=None)
    p.add_argument("--config", default=None, help="JSON file of defaults for these flags")
    p.set_defaults(func=cmd_solids)

    p = sub.add_parser("bounds", help="tabulate a bound curve for a set")
    p.add_argument("--set", default=None, help="measurement set JSON")
    p.add_argument("--kind", default=None, help=", ".join(KINDS))
    p.add_argument("--grid", default=None, help="min:max:step efficiencies, default 1/n:1:1/140")
    p.add_argument("--emit-strategies", dest="emit_strategies", default=None,
                   help="also write the optimal mixtures, one JSON per line")
    p.add_argument("--out", default=None, help="curve CSV path")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("optimize", help="search for a better measurement set")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--sweep", default=None, help="min:max:step efficiency grid")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--starts", type=int, default=None)
    p.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p.add_argument("--f-tol", dest="f_tol", type=float, default=None)
    p.add_argument("--x-tol", dest="x_tol", type=float, default=None)
    p.add_argument("--interpolation-points", dest="interpolation_points", type=int,
                   default=None, help="extra evaluated points between sweep grid points")
    p.add_argument("--allow-long", dest="allow_long", action="store_true", default=None)
    p.add_argument("--out", default=None, help="result JSON path")
    p.add_argument("--curve-out", dest="curve_out", default=None, help="sweep CSV path")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="run the Monte-Carlo experiment")
    p.add_argument("--set", default=None, help="measurement set JSON")
    p.add_argument("--honest", default=None, help="mu,eta for the honest model")
    p.add_argument("--strategy", default=None, help="mixture JSON (or JSONL with --epsilon)")
    p.add_argument("--epsilon", type=float, default=None,
                   help="select the JSONL mixture nearest this efficiency")
    p.add_argument("--shots", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--bound", default=None, help="curve CSV or JSON with a 'bound' key")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--out", default=None, help="record JSON path")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_simulate)
    return parser


def _setup_logging(args: argparse.Namespace) -> None:
    root = logging.getLogger("steerbound")
    root.setLevel(logging.INFO)
    if args.verbose:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
    if args.log:
        handler = logging.FileHandler(args.log)
        handler.setFormatter(logging.Formatter("%(asctime)s %(name)s: %(message)s"))
        root.addHandler(handler)
    if not root.handlers:
        root.addHandler(logging.NullHandler())


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    _setup_logging(args)
    try:
        return args.func(args)
    except (LpError, BoundConsistencyError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GeometryError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
