"""Batch experiment runner emitting CSV/JSON plot data.

    pflattice sweep-error --n 4,6,8 --t 0.05,0.1 --order 1,2,4
    pflattice fit --in sweep.csv --x n --y measured_error --where formula=suzuki-2 --average
    pflattice segments --n 4,6,8 --order 1 --total-time 1 --eps 1e-3
    pflattice ordering --n 8 --t 0.1 --ordering even-odd,sequential,random:7
    pflattice model-dump --n 6 --h-field 1 --seed 42 --out model.json
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis as an
from ._kernels import BACKEND
from . import fileio
from . import formulas as fm
from . import lattice as lat
from .operators import DEFAULT_MAX_QUBITS, HARD_MAX_QUBITS, OperatorError
from .rng import SplitMix64

log = logging.getLogger("pflattice")

SWEEP_HEADER = ["n", "t", "seed", "formula", "measured_error", "bound_commutator", "bound_local"]
SEGMENT_HEADER = ["n", "seed", "formula", "method", "r", "exponentials_total"]
ORDERING_HEADER = ["n", "t", "seed", "ordering", "measured_error", "robust_bound", "swap_count"]

SEGMENTS_NOTE = (
    "bound rows use the first-order commutator and locality bounds implemented here; they stand in "
    "for earlier product-formula analyses whose parameters are not available, so only the scaling "
    "shape of r versus n is comparable, not the constants"
)

DEFAULTS = {
    "n": [8],
    "t": [0.1],
    "order": [1],
    "h_field": 1.0,
    "seed": [42],
    "eps": 1e-3,
    "total_time": 1.0,
    "boundary": lat.OPEN,
    "range": 2,
    "model": "heisenberg",
    "ordering": ["even-odd", "sequential"],
    "format": "csv",
    "max_n": DEFAULT_MAX_QUBITS,
}


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    return [int(v) for v in str(text).split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in str(text).split(",") if v.strip()]


def _str_list(text: str) -> list[str]:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of option values; flags override it")
    common.add_argument("--n", type=_int_list, help="qubit counts, comma separated")
    common.add_argument("--t", type=_float_list, help="evolution times, comma separated")
    common.add_argument("--order", type=_int_list, help="formula orders: 1 or even 2k")
    common.add_argument("--h-field", dest="h_field", type=float, help="random field strength h")
    common.add_argument("--seed", type=_int_list, help="model seeds, comma separated")
    common.add_argument("--eps", type=float, help="target total error")
    common.add_argument("--total-time", dest="total_time", type=float, help="total evolution time T")
    common.add_argument("--boundary", choices=[lat.OPEN, lat.PERIODIC])
    common.add_argument("--range", type=int, help="interaction range (random model only above 2)")
    common.add_argument("--model", choices=["heisenberg", "random"])
    common.add_argument("--model-file", dest="model_file", type=Path,
                        help="Hamiltonian JSON to use instead of a generated model")
    common.add_argument("--ordering", type=_str_list,
                        help="orderings: even-odd, sequential, random:SEED")
    common.add_argument("--out", type=Path, help="output file (default stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--max-n", dest="max_n", type=int, help=f"qubit cap (default {DEFAULT_MAX_QUBITS})")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="pflattice", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep-error", parents=[common], help="measured error and first-order bounds")
    fit = sub.add_parser("fit", parents=[common], help="log-log power-law fit of two CSV columns")
    fit.add_argument("--in", dest="input", type=Path, required=True)
    fit.add_argument("--x", required=True)
    fit.add_argument("--y", required=True)
    fit.add_argument("--where", action="append", default=[], help="row filter COLUMN=VALUE")
    fit.add_argument("--average", action="store_true", help="average y over rows sharing x")
    sub.add_parser("segments", parents=[common], help="segment counts from measured error and bounds")
    sub.add_parser("ordering", parents=[common], help="first-order error under term orderings")
    sub.add_parser("model-dump", parents=[common], help="write the Hamiltonian JSON file")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Merge defaults < config file < command-line flags."""
    cfg = dict(DEFAULTS)
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        for key, value in data.items():
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            if key in ("n", "seed", "order") and not isinstance(value, list):
                value = [value]
            if key in ("t", "ordering") and not isinstance(value, list):
                value = [value]
            cfg[key] = value
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    cfg["model_file"] = getattr(args, "model_file", None)
    _validate(cfg)
    return cfg


def _validate(cfg: dict) -> None:
    if cfg["max_n"] > HARD_MAX_QUBITS:
        raise UsageError(f"--max-n above {HARD_MAX_QUBITS} is not supported")
    for key in ("n", "t", "order", "seed", "ordering"):
        if not cfg[key]:
            raise UsageError(f"{key} list must be non-empty")
    for n in cfg["n"]:
        if n > cfg["max_n"]:
            raise UsageError(f"n={n} exceeds --max-n {cfg['max_n']}; raise --max-n (up to {HARD_MAX_QUBITS}) to opt in")
        if n < 2:
            raise UsageError("n must be at least 2")
    if any(t <= 0 for t in cfg["t"]):
        raise UsageError("times must be positive")
    if cfg["eps"] <= 0 or cfg["total_time"] <= 0:
        raise UsageError("eps and total time must be positive")
    for order in cfg["order"]:
        if order != 1 and (order < 2 or order % 2):
            raise UsageError(f"unsupported order {order}")


def build_model(cfg: dict, n: int, seed: int) -> lat.LatticeHamiltonian:
    cap = cfg["max_n"]
    if cfg["model_file"] is not None:
        return fileio.load_hamiltonian(Path(cfg["model_file"]).read_text())
    if cfg["model"] == "heisenberg":
        if cfg["range"] != 2:
            raise UsageError("the Heisenberg model has range 2; use --model random for longer range")
        return lat.heisenberg_random_field(n, cfg["h_field"], seed, boundary=cfg["boundary"], max_qubits=cap)
    return lat.random_lattice(n, cfg["range"], seed, boundary=cfg["boundary"], max_qubits=cap)


def _model_points(cfg):
    if cfg["model_file"] is not None:
        H = build_model(cfg, 0, 0)
        return [(H.n, None, H)]
    return [(n, seed, build_model(cfg, n, seed)) for n in sorted(cfg["n"]) for seed in sorted(cfg["seed"])]


def _is_chain(H) -> bool:
    return H.boundary == lat.OPEN and H.range == 2


def cmd_sweep_error(cfg: dict) -> list[dict]:
    rows = []
    for n, seed, H in _model_points(cfg):
        G = lat.default_grouping(H)
        for order in sorted(set(cfg["order"])):
            F = fm.formula_for_order(G, order)
            for t in sorted(cfg["t"]):
                row = {"n": n, "t": t, "seed": seed, "formula": F.label,
                       "measured_error": an.measured_error(H, F, t)}
                if _is_chain(H):
                    row["bound_commutator"] = an.bound_first_order_commutator(H, G, t)
                    row["bound_local"] = an.bound_first_order_local(H, G, t)
                rows.append(row)
    return rows


def cmd_segments(cfg: dict) -> list[dict]:
    T, eps = cfg["total_time"], cfg["eps"]
    rows = []
    for n, seed, H in _model_points(cfg):
        G = lat.default_grouping(H)
        for order in sorted(set(cfg["order"])):
            F = fm.formula_for_order(G, order)
            per_segment = fm.exponential_count_per_segment(F, H)
            r = an.segments_measured(H, F, T, eps)
            rows.append({"n": n, "seed": seed, "formula": F.label, "method": "measured", "r": r,
                         "exponentials_total": r * per_segment})
            if order == 1 and _is_chain(H):
                for method, fn in (
                    ("bound-commutator", lambda h, tau: an.bound_first_order_commutator(h, G, tau)),
                    ("bound-local", lambda h, tau: an.bound_first_order_local(h, G, tau)),
                ):
                    rb = an.segments_from_bound(fn, H, T, eps)
                    rows.append({"n": n, "seed": seed, "formula": F.label, "method": method, "r": rb,
                                 "exponentials_total": rb * per_segment})
    return rows


def parse_ordering(name: str, H: lat.LatticeHamiltonian) -> list[int]:
    if name == "even-odd":
        return fm.even_odd_order(H)
    if name == "sequential":
        return fm.sequential_order(H)
    if name.startswith("random:"):
        try:
            seed = int(name.split(":", 1)[1])
        except ValueError as exc:
            raise UsageError(f"bad ordering {name!r}") from exc
        return SplitMix64(seed).permutation(len(H.terms))
    raise UsageError(f"unknown ordering {name!r}; use even-odd, sequential or random:SEED")


def cmd_ordering(cfg: dict) -> list[dict]:
    rows = []
    for n, seed, H in _model_points(cfg):
        if not _is_chain(H):
            raise UsageError("orderings need an open nearest-neighbor model")
        for name in cfg["ordering"]:
            sigma = parse_ordering(name, H)
            F = fm.permuted_first_order(H, sigma)
            for t in sorted(cfg["t"]):
                rows.append({
                    "n": n, "t": t, "seed": seed, "ordering": name,
                    "measured_error": an.measured_error(H, F, t),
                    "robust_bound": an.bound_ordering_robust(H, sigma, t),
                    "swap_count": an.swap_count(H, sigma),
                })
    return rows


def cmd_fit(args: argparse.Namespace) -> dict:
    try:
        rows = fileio.read_csv(args.input.read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {args.input}: {exc}") from exc
    for cond in args.where:
        col, _, val = cond.partition("=")
        if not _:
            raise UsageError(f"bad filter {cond!r}; use COLUMN=VALUE")
        rows = [r for r in rows if r.get(col) == val]
    if not rows:
        raise UsageError("no rows to fit")
    for col in (args.x, args.y):
        if col not in rows[0]:
            raise UsageError(f"missing column {col!r}")
    try:
        xs = [float(r[args.x]) for r in rows]
        ys = [float(r[args.y]) for r in rows]
    except ValueError as exc:
        raise UsageError(f"non-numeric value: {exc}") from exc
    if args.average:
        groups: dict[float, list[float]] = {}
        for x, y in zip(xs, ys):
            groups.setdefault(x, []).append(y)
        xs = sorted(groups)
        ys = [float(np.mean(groups[x])) for x in xs]
    fit = an.fit_power_law(xs, ys)
    return {"slope": fit.slope, "intercept": fit.intercept, "r_squared": fit.r_squared}


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "fit":
            _emit(fileio.dumps(cmd_fit(args)) + "\n", args.out)
            return 0
        cfg = resolve_config(args)
        if cfg["max_n"] > DEFAULT_MAX_QUBITS:
            os.environ["PFLATTICE_MAX_QUBITS"] = str(cfg["max_n"])
        if args.command == "model-dump":
            _n, _seed, H = _model_points({**cfg, "n": cfg["n"][:1], "seed": cfg["seed"][:1]})[0]
            _emit(fileio.dump_hamiltonian(H), args.out)
            return 0
        commands = {
            "sweep-error": (cmd_sweep_error, SWEEP_HEADER),
            "segments": (cmd_segments, SEGMENT_HEADER),
            "ordering": (cmd_ordering, ORDERING_HEADER),
        }
        fn, header = commands[args.command]
        log.info("%s: n=%s seeds=%s backend=%s", args.command, cfg["n"], cfg["seed"], BACKEND)
        rows = fn(cfg)
        log.info("%s: %d rows", args.command, len(rows))
        if cfg["format"] == "csv":
            _emit(fileio.rows_to_csv(header, rows), args.out)
        else:
            meta = {"command": args.command, "columns": header}
            if args.command == "segments":
                meta["note"] = SEGMENTS_NOTE
            _emit(fileio.rows_to_json(header, rows, meta), args.out)
        return 0
    except UsageError as exc:
        print(f"pflattice: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OperatorError, RuntimeError, OSError) as exc:
        print(f"pflattice: {args.command} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
