"""
Monte-Carlo drop evaluation, parameter sweeps and report files.

A sweep varies one axis of a base :class:`~mmwsim.scenario.ScenarioConfig`
and evaluates the same drop indices at every axis value. Drops are
independent (each owns a stream derived from ``(seed, drop_index)``), so they
can be farmed out to worker processes; results are always folded back in
drop-index order, which makes reports independent of the worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .channel import (
    SteeringConvention,
    assemble_multiuser_channel,
    assemble_user_channel,
    db_to_linear,
    draw_cluster_set,
    los_angles,
    path_loss_db,
)
from .errors import InvalidArgumentError, InvalidConfigError, SelectionInfeasibleError, SingularChannelError
from .precoding import DropResult, evaluate_selection, greedy_select_users
from .scenario import ScenarioConfig, derive_drop_stream, draw_los_state, draw_user_drop, parse_cluster_mode

__all__ = [
    "AXES",
    "METRICS",
    "SweepSpec",
    "MetricSummary",
    "CellReport",
    "SweepReport",
    "total_power_over_noise",
    "build_channels",
    "run_drop",
    "run_sweep",
    "empirical_cdf",
    "config_hash",
    "emit_report",
    "load_report_json",
    "read_report_csv",
    "write_channel_dump",
]

SCHEMA_VERSION = 1
AXES = ("num_users", "cluster_mode", "bs_array", "element_spacing", "snr_db")
METRICS = ("sum_rate", "sum_rate_shannon", "sum_rate_literal", "condition", "hardening", "per_user_snr")
DEFAULT_METRICS = ("sum_rate", "condition", "hardening")


# -- single drop ---------------------------------------------------------------


def total_power_over_noise(cfg: ScenarioConfig) -> float:
    """Linear ``P / N0`` fed to the post-processing SNR.

    With ``snr_reference="transmit"`` this is ``10**(snr_db/10)``, so every
    path loss sits inside ``H``. With ``"receive"`` (default) ``snr_db`` is the
    SNR received over one unit-gain path from the BS to the ring center:
    ``P/N0`` is divided by the deterministic path gain over
    ``cfg.reference_distance`` (shadowing off). Array gain and the spread of
    path losses across users remain inside ``H`` either way.
    """
    rho = 10.0 ** (cfg.snr_db / 10.0)
    if cfg.snr_reference == "receive":
        ref_db = path_loss_db(cfg.path_loss, cfg.reference_distance, cfg.wavelength, shadow_db=0.0)
        rho /= float(db_to_linear(ref_db))
    return rho


def build_channels(cfg: ScenarioConfig, drop_index: int):
    """Draw one drop.

    Returns
    -------
    drop : UserDrop
    clusters : list of ClusterSet
        One per user.
    blocks : list of numpy.ndarray
        Per-user ``n_BS x K`` channels.
    """
    rng = derive_drop_stream(cfg.seed, drop_index)
    drop = draw_user_drop(cfg, rng)
    bs_array = SteeringConvention(cfg.bs_rows, cfg.bs_cols, cfg.element_spacing)
    # user arrays are a horizontal half-wavelength line of K elements
    user_array = SteeringConvention(1, cfg.antennas_per_user, 0.5)
    pl = cfg.path_loss
    clusters, blocks = [], []
    for u in range(cfg.num_users):
        los = draw_los_state(cfg.los_model, float(drop.distance[u]), rng)
        shadow = float(rng.normal(0.0, pl.shadow_sigma_db)) if pl.use_shadowing else 0.0
        cs = draw_cluster_set(cfg, float(drop.horizontal_distance[u]), los, rng)
        blocks.append(assemble_user_channel(
            cfg, cs, bs_array, user_array, float(drop.distance[u]),
            shadow_db=shadow, los_direction=los_angles(drop, u, cfg.bs_height),
        ))
        clusters.append(cs)
    return drop, clusters, blocks


def run_drop(cfg: ScenarioConfig, drop_index: int, selection=None) -> DropResult:
    """Evaluate one drop.

    `selection` is ``None`` (serve every user) or ``(max_users, direction)``
    for greedy selection. A rank-deficient channel yields
    ``DropResult.infeasible`` instead of raising.
    """
    _, _, blocks = build_channels(cfg, drop_index)
    rho = total_power_over_noise(cfg)
    try:
        if selection is None:
            return evaluate_selection(blocks, range(cfg.num_users), rho, cfg.rate_mode, drop_index)
        max_users, direction = selection
        _, result = greedy_select_users(blocks, rho, max_users, direction, cfg.rate_mode, drop_index)
        return result
    except (SingularChannelError, SelectionInfeasibleError) as exc:
        return DropResult.infeasible(drop_index, str(exc))


# -- sweeps --------------------------------------------------------------------


def parse_selection(value):
    """``None``/"none" or "incremental[:max]" / "decremental[:max]" -> selection tuple or None.

    A missing max is returned as ``None`` and later resolved to the user count.
    """
    if value is None:
        return None
    if isinstance(value, tuple):
        return value
    text = str(value).strip().lower()
    if text in ("", "none"):
        return None
    direction, _, count = text.partition(":")
    if direction not in ("incremental", "decremental"):
        raise InvalidConfigError(f"selection must be none, incremental[:max] or decremental[:max], got {value!r}")
    if count:
        try:
            max_users = int(count)
        except ValueError:
            raise InvalidConfigError(f"bad max_users in selection {value!r}") from None
        if max_users < 1:
            raise InvalidConfigError("selection max_users must be >= 1")
    else:
        max_users = None
    return (max_users, direction)


def selection_label(selection) -> str:
    if selection is None:
        return "none"
    max_users, direction = selection
    return direction if max_users is None else f"{direction}:{max_users}"


def parse_axis_value(axis: str, value):
    """Canonical python value for one axis entry."""
    try:
        if axis == "num_users":
            return int(value)
        if axis == "cluster_mode":
            return parse_cluster_mode(value)
        if axis == "bs_array":
            if isinstance(value, tuple):
                rows, cols = value
            else:
                rows, cols = str(value).lower().replace("×", "x").split("x")
            return (int(rows), int(cols))
        if axis in ("element_spacing", "snr_db"):
            return float(value)
    except (ValueError, TypeError):
        raise InvalidConfigError(f"bad value {value!r} for axis {axis}") from None
    raise InvalidConfigError(f"unknown sweep axis {axis!r}; expected one of {AXES}")


def axis_label(axis: str, value) -> str:
    if axis == "bs_array":
        return f"{value[0]}x{value[1]}"
    return str(value)


def apply_axis(base: ScenarioConfig, axis: str, value) -> ScenarioConfig:
    if axis == "bs_array":
        rows, cols = value
        return dataclasses.replace(base, bs_rows=rows, bs_cols=cols)
    return dataclasses.replace(base, **{axis: value})


@dataclass(frozen=True)
class SweepSpec:
    """One-axis parameter sweep over a base scenario."""

    base: ScenarioConfig
    axis: str
    values: tuple
    drops: int = 1000
    metrics: tuple = DEFAULT_METRICS
    selection: tuple | None = None

    def __post_init__(self):
        if self.axis not in AXES:
            raise InvalidConfigError(f"unknown sweep axis {self.axis!r}; expected one of {AXES}")
        values = tuple(parse_axis_value(self.axis, v) for v in self.values)
        if not values:
            raise InvalidConfigError("sweep axis needs at least one value")
        object.__setattr__(self, "values", values)
        if int(self.drops) < 1:
            raise InvalidConfigError(f"drops must be >= 1, got {self.drops}")
        metrics = tuple(self.metrics)
        unknown = [m for m in metrics if m not in METRICS]
        if unknown or not metrics:
            raise InvalidConfigError(f"unknown metrics {unknown}; expected a subset of {METRICS}")
        object.__setattr__(self, "metrics", metrics)
        object.__setattr__(self, "selection", parse_selection(self.selection))
        # validates every derived config
        for cfg in self.configs():
            if self.selection is not None and self.selection[0] is not None and self.selection[0] > cfg.num_users:
                raise InvalidConfigError("selection max_users exceeds num_users")

    def configs(self):
        return [apply_axis(self.base, self.axis, v) for v in self.values]


@dataclass(frozen=True)
class MetricSummary:
    """Empirical CDF and moments of one metric at one axis value.

    ``count`` is the number of feasible drops that contributed; for
    ``per_user_snr`` the CDF pools every user of those drops.
    """

    values: tuple
    probabilities: tuple
    mean: float | None
    std: float | None
    count: int

    def to_dict(self) -> dict:
        return {
            "values": list(self.values),
            "probabilities": list(self.probabilities),
            "mean": self.mean,
            "std": self.std,
            "count": self.count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricSummary":
        return cls(tuple(d["values"]), tuple(d["probabilities"]), d["mean"], d["std"], d["count"])


@dataclass(frozen=True)
class CellReport:
    axis_value: str
    drops: int
    infeasible: int
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "axis_value": self.axis_value,
            "drops": self.drops,
            "infeasible": self.infeasible,
            "metrics": {k: v.to_dict() for k, v in self.metrics.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CellReport":
        return cls(d["axis_value"], d["drops"], d["infeasible"],
                   {k: MetricSummary.from_dict(v) for k, v in d["metrics"].items()})


@dataclass(frozen=True)
class SweepReport:
    axis: str
    cells: tuple
    provenance: dict

    def cell(self, axis_value) -> CellReport:
        label = str(axis_value)
        for c in self.cells:
            if c.axis_value == label:
                return c
        raise KeyError(label)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "axis": self.axis,
            "provenance": self.provenance,
            "cells": [c.to_dict() for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise InvalidArgumentError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(d["axis"], tuple(CellReport.from_dict(c) for c in d["cells"]), d["provenance"])


def empirical_cdf(samples) -> tuple[np.ndarray, np.ndarray]:
    """Right-continuous empirical CDF with ties merged.

    Returns the sorted unique values and ``P(X <= value)`` at each.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise InvalidArgumentError("empirical_cdf needs at least one sample")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("empirical_cdf samples must be finite")
    values, counts = np.unique(x, return_counts=True)
    probs = np.cumsum(counts) / x.size
    probs[-1] = 1.0
    return values, probs


def _summarize(samples, count: int) -> MetricSummary:
    if len(samples) == 0:
        return MetricSummary((), (), None, None, 0)
    x = np.asarray(samples, dtype=float)
    values, probs = empirical_cdf(x)
    std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return MetricSummary(
        tuple(float(v) for v in values), tuple(float(p) for p in probs), float(np.mean(x)), std, count
    )


def _drop_task(args):
    cfg, index, selection = args
    return run_drop(cfg, index, selection)


def _evaluate_drops(cfg: ScenarioConfig, drops: int, selection, executor, workers: int) -> list:
    if selection is not None and selection[0] is None:
        selection = (cfg.num_users, selection[1])
    tasks = [(cfg, i, selection) for i in range(drops)]
    if executor is None:
        return [_drop_task(t) for t in tasks]
    chunk = max(1, drops // (4 * workers))
    # map preserves submission order
    return list(executor.map(_drop_task, tasks, chunksize=chunk))


def config_hash(cfg: ScenarioConfig) -> str:
    """SHA-256 of the canonical JSON of the resolved configuration."""
    text = json.dumps(cfg.to_flat_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _timestamp(value=None) -> str:
    if value is not None:
        return str(value)
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


def run_sweep(spec: SweepSpec, workers: int = 1, timestamp=None) -> SweepReport:
    """Evaluate every axis value of `spec` over ``spec.drops`` drops.

    Parameters
    ----------
    spec : SweepSpec
    workers : int
        Worker processes; 1 runs in-process. The result does not depend on it.
    timestamp : str, optional
        Provenance timestamp; defaults to the current UTC time.
    """
    if workers < 1:
        raise InvalidConfigError("workers must be >= 1")
    executor = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    cells = []
    try:
        for value, cfg in zip(spec.values, spec.configs()):
            results = _evaluate_drops(cfg, spec.drops, spec.selection, executor, workers)
            feasible = [r for r in results if r.feasible]
            metrics = {}
            for name in spec.metrics:
                if name == "per_user_snr":
                    samples = [x for r in feasible for x in r.per_user_snr]
                else:
                    samples = [r.metric(name) for r in feasible]
                metrics[name] = _summarize(samples, len(feasible))
            cells.append(CellReport(axis_label(spec.axis, value), spec.drops, len(results) - len(feasible), metrics))
    finally:
        if executor is not None:
            executor.shutdown()

    provenance = {
        "artifact_version": __version__,
        "timestamp": _timestamp(timestamp),
        "seed": spec.base.seed,
        "drops": spec.drops,
        "axis_values": [axis_label(spec.axis, v) for v in spec.values],
        "metrics": list(spec.metrics),
        "selection": selection_label(spec.selection),
        "p_over_n0_reference": spec.base.snr_reference,
        "config_hash": config_hash(spec.base),
        "config": spec.base.to_flat_dict(),
    }
    return SweepReport(spec.axis, tuple(cells), provenance)


# -- report files --------------------------------------------------------------


def _render(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def report_to_csv(report: SweepReport) -> str:
    """CSV text: ``#`` header block, a column header, then one row per CDF point."""
    buf = io.StringIO()
    prov = report.provenance
    buf.write(f"# schema_version = {SCHEMA_VERSION}\n")
    buf.write(f"# axis = {report.axis}\n")
    for key in ("artifact_version", "timestamp", "seed", "drops", "metrics", "selection", "config_hash"):
        value = prov[key]
        if isinstance(value, list):
            value = ",".join(map(str, value))
        buf.write(f"# {key} = {_render(value)}\n")
    for key, value in prov["config"].items():
        buf.write(f"# config.{key} = {_render(value)}\n")
    for cell in report.cells:
        for name, s in cell.metrics.items():
            buf.write(
                f"# summary axis_value={cell.axis_value} metric={name} mean={_render(s.mean)} "
                f"std={_render(s.std)} count={s.count} infeasible={cell.infeasible} drops={cell.drops}\n"
            )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["axis_value", "metric", "value", "cum_prob"])
    for cell in report.cells:
        for name, s in cell.metrics.items():
            for v, p in zip(s.values, s.probabilities):
                writer.writerow([cell.axis_value, name, repr(float(v)), repr(float(p))])
    return buf.getvalue()


def emit_report(report: SweepReport, path, fmt: str = "csv") -> None:
    """Write `report` as ``"csv"`` or ``"json"``.

    Raises
    ------
    OSError
        On I/O failure; the message names the path.
    """
    if fmt == "csv":
        text = report_to_csv(report)
    elif fmt == "json":
        text = json.dumps(report.to_dict(), indent=1) + "\n"
    else:
        raise InvalidArgumentError(f"unknown report format {fmt!r}")
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report to {path}: {exc.strerror}") from exc


def load_report_json(path) -> SweepReport:
    with open(path, encoding="utf-8") as fh:
        return SweepReport.from_dict(json.load(fh))


def read_report_csv(path) -> tuple[dict, dict]:
    """Parse a CSV report.

    Returns ``(header, cdfs)`` where `header` maps the ``# key = value``
    lines to strings and `cdfs` maps ``(axis_value, metric)`` to
    ``(values, probabilities)`` lists of floats.
    """
    header, rows = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("summary "):
                    header.setdefault("summary", []).append(body[len("summary "):])
                else:
                    key, _, value = body.partition(" = ")
                    header[key] = value
            else:
                rows.append(line)
    cdfs: dict = {}
    for row in csv.DictReader(rows):
        values, probs = cdfs.setdefault((row["axis_value"], row["metric"]), ([], []))
        values.append(float(row["value"]))
        probs.append(float(row["cum_prob"]))
    return header, cdfs


def write_channel_dump(path, cfg: ScenarioConfig, drop_index: int) -> None:
    """Text dump of one drop's clusters and multiuser channel for diffing.

    Layout: ``key = value`` header lines, then a ``[clusters]`` section with
    one whitespace-separated line per ray (user, cluster, ray, angles in
    radians, |alpha|, arg(alpha), r_il, tau_il), then ``[matrix] rows cols``
    followed by one line per matrix row of comma-joined ``re,im`` pairs
    separated by spaces.
    """
    drop, clusters, blocks = build_channels(cfg, drop_index)
    h = assemble_multiuser_channel(blocks)
    lines = [
        "# mmwsim channel dump v1",
        f"config_hash = {config_hash(cfg)}",
        f"seed = {cfg.seed}",
        f"drop_index = {drop_index}",
        f"num_users = {cfg.num_users}",
        f"bs_azimuth = {drop.bs_azimuth!r}",
    ]
    for u, cs in enumerate(clusters):
        x, y, z = (float(c) for c in drop.positions[u])
        lines.append(
            f"user {u} x={x!r} y={y!r} z={z!r} los={int(cs.los)} los_phase={cs.los_phase!r} "
            f"num_clusters={cs.num_clusters} cluster_distance={','.join(repr(float(r)) for r in cs.distance)}"
        )
    lines.append("[clusters]")
    lines.append("user cluster ray aoa_az aoa_el aod_az aod_el gain_abs gain_arg r_il tau_il")
    for u, cs in enumerate(clusters):
        ray_in_cluster = np.concatenate([np.arange(n) for n in cs.rays_per_cluster])
        for j in range(cs.num_rays):
            g = cs.ray_gain[j]
            lines.append(" ".join([
                str(u), str(int(cs.ray_cluster[j])), str(int(ray_in_cluster[j])),
                *(repr(float(a)) for a in (cs.ray_aoa_azimuth[j], cs.ray_aoa_elevation[j],
                                           cs.ray_aod_azimuth[j], cs.ray_aod_elevation[j],
                                           abs(g), math.atan2(g.imag, g.real),
                                           cs.ray_distance[j], cs.ray_delay[j])),
            ]))
    lines.append(f"[matrix] {h.shape[0]} {h.shape[1]}")
    for row in h:
        lines.append(" ".join(f"{float(z.real)!r},{float(z.imag)!r}" for z in row))
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write channel dump to {path}: {exc.strerror}") from exc


def read_channel_matrix(path) -> np.ndarray:
    """Read back the ``[matrix]`` section of a channel dump."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    start = next(i for i, line in enumerate(lines) if line.startswith("[matrix]"))
    rows, cols = map(int, lines[start].split()[1:])
    out = np.empty((rows, cols), dtype=np.complex128)
    for r in range(rows):
        for c, pair in enumerate(lines[start + 1 + r].split()):
            re, im = pair.split(",")
            out[r, c] = complex(float(re), float(im))
    return out
