"""
Scenario configuration, user placement and per-drop random streams.

Coordinate frame: the BS sits at the horizontal origin at height
``bs_height``. Users live in a disc of radius ``ring_radius`` whose center is
at horizontal distance ``mean_bs_user_distance`` along +x, all at height
``user_height``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
import scipy.constants

from .errors import InvalidConfigError

__all__ = [
    "PathLossParams",
    "LosModelParams",
    "ScenarioConfig",
    "UserDrop",
    "derive_drop_stream",
    "draw_user_drop",
    "draw_los_state",
    "parse_cluster_mode",
]

SPEED_OF_LIGHT = scipy.constants.c

RATE_MODES = ("shannon", "paper_literal")
LOS_MODELS = ("nlos", "los", "exponential")
SNR_REFERENCES = ("receive", "transmit")

ClusterMode = Union[str, int]


def parse_cluster_mode(value) -> ClusterMode:
    """Normalize a cluster mode: ``"model"`` or a fixed positive count."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        count = int(value)
    else:
        text = str(value).strip().lower()
        if text == "model":
            return "model"
        if text.startswith("fixed(") and text.endswith(")"):
            text = text[6:-1]
        try:
            count = int(text)
        except ValueError:
            raise InvalidConfigError(f"cluster_mode must be 'model' or a positive integer, got {value!r}") from None
    if count < 1:
        raise InvalidConfigError(f"fixed cluster count must be >= 1, got {count}")
    return count


@dataclass(frozen=True)
class PathLossParams:
    """Floating-intercept path loss with optional log-normal shadowing.

    ``reference_f0=None`` means "equal to the carrier frequency" and is
    resolved by :class:`ScenarioConfig`.
    """

    exponent_n: float = 2.0
    system_b: float = 0.0
    reference_f0: float | None = None
    shadow_sigma_db: float = 4.0
    use_shadowing: bool = True

    def __post_init__(self):
        if not self.exponent_n > 0:
            raise InvalidConfigError(f"path_loss.exponent_n must be > 0, got {self.exponent_n}")
        if not self.shadow_sigma_db >= 0:
            raise InvalidConfigError(f"path_loss.shadow_sigma_db must be >= 0, got {self.shadow_sigma_db}")
        if self.reference_f0 is not None and not self.reference_f0 > 0:
            raise InvalidConfigError(f"path_loss.reference_f0 must be > 0, got {self.reference_f0}")


@dataclass(frozen=True)
class LosModelParams:
    """LOS presence law: always blocked, always present, or ``p = exp(-d / scale)``."""

    model: str = "exponential"
    scale_meters: float = 30.0

    def __post_init__(self):
        if self.model not in LOS_MODELS:
            raise InvalidConfigError(f"los_model.model must be one of {LOS_MODELS}, got {self.model!r}")
        if self.model == "exponential" and not self.scale_meters > 0:
            raise InvalidConfigError(f"los_model.scale_meters must be > 0, got {self.scale_meters}")

    def probability(self, d: float) -> float:
        if self.model == "los":
            return 1.0
        if self.model == "nlos":
            return 0.0
        return math.exp(-d / self.scale_meters)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one simulation point.

    Instances are immutable; use :func:`dataclasses.replace` to derive
    variants. Validation runs on construction.
    """

    carrier_frequency: float = 7.3e10
    bs_rows: int = 20
    bs_cols: int = 8
    element_spacing: float = 0.5
    num_users: int = 10
    antennas_per_user: int = 1
    bs_height: float = 7.0
    user_height: float = 1.68
    mean_bs_user_distance: float = 20.0
    ring_radius: float = 5.0
    cluster_mode: ClusterMode = "model"
    cluster_rate: float = 1.9
    rays_per_cluster_max: int = 30
    angle_spread_std: float = 5.0
    path_loss: PathLossParams = field(default_factory=PathLossParams)
    los_model: LosModelParams = field(default_factory=LosModelParams)
    normalize_nlos: bool = False
    snr_db: float = 20.0
    snr_reference: str = "receive"
    rate_mode: str = "shannon"
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "cluster_mode", parse_cluster_mode(self.cluster_mode))
        if self.path_loss.reference_f0 is None:
            object.__setattr__(
                self, "path_loss", dataclasses.replace(self.path_loss, reference_f0=float(self.carrier_frequency))
            )
        for name in ("bs_rows", "bs_cols", "num_users", "antennas_per_user", "rays_per_cluster_max"):
            if int(getattr(self, name)) < 1:
                raise InvalidConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        for name in ("carrier_frequency", "element_spacing", "bs_height", "user_height",
                     "mean_bs_user_distance", "ring_radius", "cluster_rate"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidConfigError(f"{name} must be a positive finite number, got {value}")
        if not self.angle_spread_std >= 0:
            raise InvalidConfigError(f"angle_spread_std must be >= 0, got {self.angle_spread_std}")
        if self.ring_radius >= self.mean_bs_user_distance:
            raise InvalidConfigError("ring_radius must be smaller than mean_bs_user_distance")
        if self.num_bs_antennas < self.num_users * self.antennas_per_user:
            raise InvalidConfigError(
                f"zero forcing needs bs_rows*bs_cols >= num_users*antennas_per_user "
                f"({self.num_bs_antennas} < {self.num_users * self.antennas_per_user})"
            )
        if self.rate_mode not in RATE_MODES:
            raise InvalidConfigError(f"rate_mode must be one of {RATE_MODES}, got {self.rate_mode!r}")
        if self.snr_reference not in SNR_REFERENCES:
            raise InvalidConfigError(f"snr_reference must be one of {SNR_REFERENCES}, got {self.snr_reference!r}")
        if not math.isfinite(self.snr_db):
            raise InvalidConfigError("snr_db must be finite")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def num_bs_antennas(self) -> int:
        return self.bs_rows * self.bs_cols

    @property
    def reference_distance(self) -> float:
        """3-D distance from the BS to the center of the user ring."""
        return math.hypot(self.mean_bs_user_distance, self.bs_height - self.user_height)

    # -- flat key/value representation -------------------------------------

    def to_flat_dict(self) -> dict:
        """Resolved configuration as ``{key: value}`` with dotted keys for nested params."""
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if dataclasses.is_dataclass(value):
                for sub in dataclasses.fields(value):
                    out[f"{f.name}.{sub.name}"] = getattr(value, sub.name)
            else:
                out[f.name] = value
        return out

    @classmethod
    def from_flat_dict(cls, values: dict) -> "ScenarioConfig":
        """Build a config from dotted keys; values may be strings as read from a file."""
        defaults = cls()
        top, nested = {}, {"path_loss": {}, "los_model": {}}
        known = defaults.to_flat_dict()
        for key, raw in values.items():
            if key not in known:
                raise InvalidConfigError(f"unknown configuration key {key!r}")
            value = _coerce(key, raw, known[key])
            if "." in key:
                group, name = key.split(".", 1)
                nested[group][name] = value
            else:
                top[key] = value
        if "path_loss.reference_f0" not in values:
            nested["path_loss"]["reference_f0"] = None
        try:
            return cls(
                path_loss=PathLossParams(**nested["path_loss"]),
                los_model=LosModelParams(**nested["los_model"]),
                **top,
            )
        except TypeError as exc:
            raise InvalidConfigError(str(exc)) from exc


def _coerce(key: str, raw, default):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if key == "cluster_mode":
            return parse_cluster_mode(text)
        if isinstance(default, bool):
            lowered = text.lower()
            if lowered in ("true", "yes", "1", "on"):
                return True
            if lowered in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise InvalidConfigError(f"cannot parse {key} = {raw!r}") from None
    return text


@dataclass(frozen=True)
class UserDrop:
    """Positions and orientations for one snapshot.

    Arrays are indexed by user. Angles are in radians.
    """

    positions: np.ndarray            # (n_users, 3) meters, BS at (0, 0, bs_height)
    horizontal_distance: np.ndarray  # (n_users,) BS-to-user distance in the ground plane
    distance: np.ndarray             # (n_users,) 3-D BS-to-user distance
    user_azimuth: np.ndarray         # (n_users,) array rotation
    user_elevation: np.ndarray       # (n_users,) array tilt, always 0
    bs_azimuth: float                # BS array rotation

    @property
    def num_users(self) -> int:
        return self.positions.shape[0]


def derive_drop_stream(seed: int, drop_index: int) -> np.random.Generator:
    """Independent, reproducible random stream for one drop.

    The (seed, drop_index) pair is hashed by :class:`numpy.random.SeedSequence`
    into a Philox key, so the stream does not depend on evaluation order.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(drop_index),))
    return np.random.Generator(np.random.Philox(ss))


def draw_user_drop(cfg: ScenarioConfig, rng: np.random.Generator) -> UserDrop:
    """Place users uniformly in the ring and draw array orientations."""
    n = cfg.num_users
    # r = R sqrt(u) gives a uniform density over the disc
    radius = cfg.ring_radius * np.sqrt(rng.random(n))
    angle = 2.0 * np.pi * rng.random(n)
    user_azimuth = 2.0 * np.pi * rng.random(n)
    bs_azimuth = float(2.0 * np.pi * rng.random())

    x = cfg.mean_bs_user_distance + radius * np.cos(angle)
    y = radius * np.sin(angle)
    positions = np.column_stack([x, y, np.full(n, cfg.user_height)])
    horizontal = np.hypot(x, y)
    distance = np.hypot(horizontal, cfg.bs_height - cfg.user_height)
    return UserDrop(
        positions=positions,
        horizontal_distance=horizontal,
        distance=distance,
        user_azimuth=user_azimuth,
        user_elevation=np.zeros(n),
        bs_azimuth=bs_azimuth,
    )


def draw_los_state(params: LosModelParams, d: float, rng: np.random.Generator) -> bool:
    """Bernoulli LOS indicator for a link of length `d` meters."""
    # consume one draw regardless of the model so streams stay aligned
    u = rng.random()
    return bool(u < params.probability(d))
