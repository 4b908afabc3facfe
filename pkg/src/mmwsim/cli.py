"""
Command line interface.

    mmwsim sweep --users 2,5,10 --snr-db 20 --drops 1000 --seed 42 --out r.csv
    mmwsim single-drop --users 5 --drop-index 3 --dump drop3.txt
    mmwsim validate

Exit codes: 0 success, 1 usage error, 2 config error, 3 I/O error,
4 numerical failure (including a failed self-check).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .channel import draw_cluster_count, laplacian_offsets, path_loss_db
from .errors import InvalidConfigError, NumericalFailureError, SimulationError
from .experiment import (
    AXES,
    DEFAULT_METRICS,
    SweepSpec,
    emit_report,
    run_drop,
    run_sweep,
    write_channel_dump,
)
from .scenario import PathLossParams, ScenarioConfig

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3, 4

SWEEP_KEYS = ("axis", "values", "drops", "metrics", "selection")

# flag -> (axis name, config field)
AXIS_FLAGS = {
    "users": "num_users",
    "clusters": "cluster_mode",
    "spacing": "element_spacing",
    "snr_db": "snr_db",
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def read_kv_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, blank lines are ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise InvalidConfigError(f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            out[key.strip()] = value.strip()
    return out


def _split_list(text: str) -> list:
    return [v.strip() for v in str(text).split(",") if v.strip()]


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mmwsim", description="Multiuser mmWave MIMO zero-forcing Monte-Carlo simulator")
    parser.add_argument("--version", action="version", version=f"mmwsim {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def scenario_flags(p, lists: bool):
        kind = "comma-separated list" if lists else "value"
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--users", help=f"number of users ({kind})")
        p.add_argument("--clusters", help=f"'model' or a fixed cluster count ({kind})")
        p.add_argument("--bs-rows", help=f"BS array rows ({kind})")
        p.add_argument("--bs-cols", help=f"BS array columns ({kind})")
        p.add_argument("--spacing", help=f"element spacing in wavelengths ({kind})")
        p.add_argument("--snr-db", help=f"SNR in dB ({kind})")
        p.add_argument("--seed", type=int)
        p.add_argument("--rate-mode", choices=("shannon", "paper_literal"))
        p.add_argument("--selection", help="none, incremental[:max] or decremental[:max]")

    sweep = sub.add_parser("sweep", help="run a one-axis parameter sweep")
    scenario_flags(sweep, lists=True)
    sweep.add_argument("--drops", type=int)
    sweep.add_argument("--metrics", help=f"comma-separated subset of metrics (default {','.join(DEFAULT_METRICS)})")
    sweep.add_argument("--out", required=True, help="report path")
    sweep.add_argument("--format", choices=("csv", "json"), help="report format (default from extension)")
    sweep.add_argument("--workers", type=int, default=1)

    single = sub.add_parser("single-drop", help="evaluate one drop and print its metrics as JSON")
    scenario_flags(single, lists=False)
    single.add_argument("--drop-index", type=int, default=0)
    single.add_argument("--dump", help="also write a channel dump to this path")

    validate = sub.add_parser("validate", help="run the analytic self-checks")
    validate.add_argument("--seed", type=int, default=12345)
    validate.add_argument("--draws", type=int, default=100_000)
    return parser


def _resolve(args, lists: bool):
    """Merge config file and flags into ``(base_config, sweep_settings)``."""
    raw = read_kv_file(args.config) if args.config else {}
    sweep = {k: raw.pop(k) for k in SWEEP_KEYS if k in raw}

    axis = sweep.get("axis")
    axis_values = _split_list(sweep["values"]) if "values" in sweep else None
    scalar = {}

    def take(flag_value, axis_name, field_name):
        nonlocal axis, axis_values
        if flag_value is None:
            return
        items = _split_list(flag_value)
        if not items:
            raise InvalidConfigError(f"empty value for {field_name}")
        if lists and (len(items) > 1 or axis == axis_name):
            if axis is not None and axis != axis_name and axis_values is not None and len(axis_values) > 1:
                raise InvalidConfigError(f"only one sweep axis allowed; got {axis} and {axis_name}")
            axis, axis_values = axis_name, items
        else:
            if len(items) > 1:
                raise InvalidConfigError(f"{field_name} takes a single value here")
            scalar[field_name] = items[0]

    for flag, field_name in AXIS_FLAGS.items():
        take(getattr(args, flag), field_name, field_name)
    rows, cols = args.bs_rows, args.bs_cols
    if rows is not None or cols is not None:
        row_items = _split_list(rows) if rows is not None else [raw.get("bs_rows", str(ScenarioConfig.bs_rows))]
        col_items = _split_list(cols) if cols is not None else [raw.get("bs_cols", str(ScenarioConfig.bs_cols))]
        if len(row_items) > 1 and len(col_items) > 1 and len(row_items) != len(col_items):
            raise InvalidConfigError("--bs-rows and --bs-cols lists must have equal length")
        n = max(len(row_items), len(col_items))
        if n > 1:
            if not lists:
                raise InvalidConfigError("array size takes a single value here")
            row_items = row_items * n if len(row_items) == 1 else row_items
            col_items = col_items * n if len(col_items) == 1 else col_items
            axis, axis_values = "bs_array", [f"{r}x{c}" for r, c in zip(row_items, col_items)]
        else:
            scalar["bs_rows"], scalar["bs_cols"] = row_items[0], col_items[0]
    if args.seed is not None:
        scalar["seed"] = str(args.seed)
    if args.rate_mode is not None:
        scalar["rate_mode"] = args.rate_mode
    if args.selection is not None:
        sweep["selection"] = args.selection

    raw.update(scalar)
    base = ScenarioConfig.from_flat_dict(raw)
    return base, axis, axis_values, sweep


def _cmd_sweep(args) -> int:
    base, axis, values, sweep = _resolve(args, lists=True)
    if axis is None:
        axis = "num_users"
    if values is None:
        current = {"num_users": base.num_users, "cluster_mode": base.cluster_mode,
                   "bs_array": f"{base.bs_rows}x{base.bs_cols}", "element_spacing": base.element_spacing,
                   "snr_db": base.snr_db}
        if axis not in current:
            raise InvalidConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")
        values = [current[axis]]
    drops = args.drops if args.drops is not None else int(sweep.get("drops", 1000))
    metrics = _split_list(args.metrics or sweep.get("metrics", ",".join(DEFAULT_METRICS)))
    spec = SweepSpec(base=base, axis=axis, values=tuple(values), drops=drops, metrics=tuple(metrics),
                     selection=sweep.get("selection"))
    fmt = args.format or ("json" if str(args.out).lower().endswith(".json") else "csv")
    if args.workers < 1:
        raise InvalidConfigError("--workers must be >= 1")
    report = run_sweep(spec, workers=args.workers, timestamp=_provenance_time())
    emit_report(report, args.out, fmt)
    for cell in report.cells:
        first = next(iter(cell.metrics))
        s = cell.metrics[first]
        mean = "n/a" if s.mean is None else f"{s.mean:.4g}"
        print(f"{axis}={cell.axis_value}: {first} mean {mean} over {s.count} drops ({cell.infeasible} infeasible)")
    print(f"wrote {args.out}")
    return EXIT_OK


def _provenance_time():
    # SOURCE_DATE_EPOCH pins the timestamp for reproducible report files
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is None:
        return None
    try:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    except ValueError:
        raise InvalidConfigError(f"SOURCE_DATE_EPOCH must be an integer, got {epoch!r}") from None


def _cmd_single_drop(args) -> int:
    base, _, _, sweep = _resolve(args, lists=False)
    selection = None
    if sweep.get("selection"):
        from .experiment import parse_selection
        selection = parse_selection(sweep["selection"])
        if selection is not None and selection[0] is None:
            selection = (base.num_users, selection[1])
    result = run_drop(base, args.drop_index, selection)
    out = dataclasses.asdict(result)
    out.pop("extra")
    print(json.dumps(out, indent=1))
    if args.dump:
        write_channel_dump(args.dump, base, args.drop_index)
    return EXIT_OK


def self_checks(seed: int = 12345, draws: int = 100_000) -> list[tuple[str, bool, str]]:
    """Analytic checks of the random laws and the path loss intercept."""
    rng = np.random.default_rng(seed)
    checks = []

    counts = np.array([draw_cluster_count("model", rng) for _ in range(draws)])
    p1_expected = math.exp(-1.9) * (1 + 1.9)
    mean_expected = 1.9 + math.exp(-1.9)
    p1, mean = float(np.mean(counts == 1)), float(np.mean(counts))
    checks.append(("truncated Poisson P(N=1)", abs(p1 - p1_expected) <= 0.01, f"{p1:.4f} vs {p1_expected:.4f}"))
    checks.append(("truncated Poisson mean", abs(mean - mean_expected) <= 0.02, f"{mean:.4f} vs {mean_expected:.4f}"))

    offsets = np.degrees(laplacian_offsets(rng, math.radians(5.0), draws))
    std = float(np.std(offsets, ddof=1))
    checks.append(("Laplacian spread (deg)", abs(std - 5.0) <= 0.1, f"{std:.4f} vs 5"))

    cfg = ScenarioConfig()
    p = PathLossParams(exponent_n=2.0, system_b=0.0, reference_f0=cfg.carrier_frequency, use_shadowing=False)
    pl1 = path_loss_db(p, 1.0, cfg.wavelength)
    pl10 = path_loss_db(p, 10.0, cfg.wavelength)
    checks.append(("free-space intercept (dB)", abs(pl1 + 69.71) <= 0.01, f"{pl1:.4f} vs -69.71"))
    checks.append(("path loss slope (dB/decade)", abs((pl10 - pl1) + 20.0) <= 1e-9, f"{pl10 - pl1:.6f} vs -20"))
    return checks


def _cmd_validate(args) -> int:
    ok = True
    for name, passed, detail in self_checks(args.seed, args.draws):
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    return EXIT_OK if ok else EXIT_NUMERIC


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("mmwsim: a subcommand is required (sweep, single-drop, validate)")
        handler = {"sweep": _cmd_sweep, "single-drop": _cmd_single_drop, "validate": _cmd_validate}[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvalidConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalFailureError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
