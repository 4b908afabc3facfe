"""
Clustered statistical mmWave channel.

Each user gets an independent set of single-bounce clusters. The
delay-domain response is collapsed to the carrier: every ray contributes a
Dirac tap whose delay phase ``exp(-j 2 pi f_c tau)`` is folded into its gain,
and all taps are summed coherently.

Orientation of the per-user block: ``H_u`` is ``n_BS x K`` and the user
receives ``y = H_u^H x``. It is the Hermitian transpose of the usual
receive-by-transmit product ``a_r a_t^H``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidConfigError
from .scenario import SPEED_OF_LIGHT, ClusterMode, PathLossParams, ScenarioConfig, UserDrop

__all__ = [
    "ClusterSet",
    "SteeringConvention",
    "draw_cluster_count",
    "laplacian_offsets",
    "draw_cluster_set",
    "subpath_distance",
    "path_loss_db",
    "db_to_linear",
    "steering_vector",
    "steering_matrix",
    "los_angles",
    "assemble_user_channel",
    "assemble_multiuser_channel",
]

TWO_PI = 2.0 * np.pi
HALF_PI = 0.5 * np.pi


@dataclass(frozen=True)
class SteeringConvention:
    """Uniform planar array layout.

    Rows run along z (vertical), columns along y (horizontal) and boresight
    is +x. The phase reference is element (0, 0); the vector index of element
    ``(p, q)`` is ``p * cols + q``. `spacing` is in wavelengths.
    """

    rows: int
    cols: int
    spacing: float

    @property
    def size(self) -> int:
        return self.rows * self.cols


def steering_matrix(conv: SteeringConvention, azimuth, elevation) -> np.ndarray:
    """Unit-norm steering vectors for many directions, one per column.

    Returns an ``(rows*cols, len(azimuth))`` array.
    """
    az = np.atleast_1d(np.asarray(azimuth, dtype=float))
    el = np.atleast_1d(np.asarray(elevation, dtype=float))
    p, q = np.divmod(np.arange(conv.size), conv.cols)
    phase = TWO_PI * conv.spacing * (
        np.outer(q, np.sin(az) * np.cos(el)) + np.outer(p, np.sin(el))
    )
    return np.exp(1j * phase) / math.sqrt(conv.size)


def steering_vector(conv: SteeringConvention, azimuth: float, elevation: float) -> np.ndarray:
    """Steering vector toward one direction, as an ``(N, 1)`` column."""
    return steering_matrix(conv, azimuth, elevation)


def draw_cluster_count(mode: ClusterMode, rng: np.random.Generator, rate: float = 1.9) -> int:
    """``max(Poisson(rate), 1)`` in model mode, else the fixed count."""
    if mode == "model":
        return max(int(rng.poisson(rate)), 1)
    if isinstance(mode, bool) or not isinstance(mode, (int, np.integer)) or mode < 1:
        raise InvalidConfigError(f"invalid cluster mode {mode!r}")
    return int(mode)


def laplacian_offsets(rng: np.random.Generator, std: float, size) -> np.ndarray:
    """Zero-mean Laplacian samples with standard deviation `std`."""
    # Laplace(scale=b) has variance 2 b^2
    return rng.laplace(0.0, std / math.sqrt(2.0), size)


def subpath_distance(r_i, d_u, h_bs, h_u, theta_d, phi_d):
    """Propagation distance of a ray that bounces off a cluster at range `r_i`.

    ``r_i + sqrt((h_bs - h_u + r_i sin(theta_d))**2 + (d_u - r_i cos(theta_d) cos(phi_d))**2)``

    `theta_d` and `phi_d` are the ray's azimuth and elevation of departure.
    Broadcasts over array inputs.
    """
    r_i = np.asarray(r_i, dtype=float)
    vertical = h_bs - h_u + r_i * np.sin(theta_d)
    horizontal = d_u - r_i * np.cos(theta_d) * np.cos(phi_d)
    out = r_i + np.hypot(vertical, horizontal)
    return float(out) if out.ndim == 0 else out


def path_loss_db(p: PathLossParams, r, wavelength: float, rng: np.random.Generator | None = None,
                 shadow_db=None):
    """Path gain in dB (negative numbers are losses).

    ``-20 log10(4 pi / lambda) - 10 n (1 - b + b c / (lambda f0)) log10(r) - X``

    The shadowing term ``X`` is `shadow_db` when given. Otherwise it is drawn
    from ``Normal(0, sigma^2)`` using `rng` if shadowing is enabled, and is zero
    if it is not.
    """
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise InvalidArgumentError("path loss distance must be > 0")
    if not wavelength > 0:
        raise InvalidArgumentError("wavelength must be > 0")
    f0 = p.reference_f0 if p.reference_f0 is not None else SPEED_OF_LIGHT / wavelength
    bracket = 1.0 - p.system_b + p.system_b * SPEED_OF_LIGHT / (wavelength * f0)
    if shadow_db is None:
        if p.use_shadowing and p.shadow_sigma_db > 0:
            if rng is None:
                raise InvalidArgumentError("shadowing is enabled but no random stream was given")
            shadow_db = rng.normal(0.0, p.shadow_sigma_db, r.shape) if r.ndim else rng.normal(0.0, p.shadow_sigma_db)
        else:
            shadow_db = 0.0
    out = -20.0 * np.log10(4.0 * np.pi / wavelength) - 10.0 * p.exponent_n * bracket * np.log10(r) - shadow_db
    return float(out) if np.ndim(out) == 0 else out


def db_to_linear(x_db):
    return np.power(10.0, np.asarray(x_db) / 10.0)


@dataclass(frozen=True)
class ClusterSet:
    """Multipath structure of one user link.

    Per-cluster arrays have length ``num_clusters``; per-ray arrays are
    flattened over all clusters and ``ray_cluster`` maps each ray back to its
    cluster. Ray angles are absolute (center plus Laplacian offset, with
    azimuths wrapped and elevations clamped); the raw offsets are kept too.
    """

    aoa_azimuth: np.ndarray
    aoa_elevation: np.ndarray
    aod_azimuth: np.ndarray
    aod_elevation: np.ndarray
    distance: np.ndarray           # r_i, BS-to-cluster range
    rays_per_cluster: np.ndarray
    ray_cluster: np.ndarray
    ray_offsets: np.ndarray        # (n_rays, 4): AoA az, AoA el, AoD az, AoD el
    ray_aoa_azimuth: np.ndarray
    ray_aoa_elevation: np.ndarray
    ray_aod_azimuth: np.ndarray
    ray_aod_elevation: np.ndarray
    ray_gain: np.ndarray           # complex alpha_{i,l}
    ray_distance: np.ndarray       # r_{i,l}
    ray_delay: np.ndarray          # tau_{i,l} = r_{i,l} / c
    los: bool
    los_phase: float

    @property
    def num_clusters(self) -> int:
        return len(self.rays_per_cluster)

    @property
    def num_rays(self) -> int:
        return len(self.ray_gain)


def _wrap_symmetric(angle):
    return (np.asarray(angle) + np.pi) % TWO_PI - np.pi


def draw_cluster_set(cfg: ScenarioConfig, d_u: float, los: bool, rng: np.random.Generator) -> ClusterSet:
    """Sample clusters and rays for one link.

    Parameters
    ----------
    cfg : ScenarioConfig
    d_u : float
        Horizontal BS-to-user distance in meters. The height difference
        enters the subpath geometry separately.
    los : bool
        LOS state of the link, stored on the result.
    rng : numpy.random.Generator
    """
    if not d_u > 0:
        raise InvalidArgumentError(f"d_u must be > 0, got {d_u}")
    n_cl = draw_cluster_count(cfg.cluster_mode, rng, cfg.cluster_rate)
    aoa_az = rng.uniform(0.0, TWO_PI, n_cl)
    aod_az = rng.uniform(-HALF_PI, HALF_PI, n_cl)
    aoa_el = rng.uniform(-HALF_PI, HALF_PI, n_cl)
    aod_el = rng.uniform(-HALF_PI, HALF_PI, n_cl)
    r_i = rng.uniform(0.0, d_u, n_cl)
    n_ray = rng.integers(1, cfg.rays_per_cluster_max, size=n_cl, endpoint=True)

    ray_cluster = np.repeat(np.arange(n_cl), n_ray)
    n_total = len(ray_cluster)
    offsets = laplacian_offsets(rng, math.radians(cfg.angle_spread_std), (n_total, 4))
    gain = (rng.standard_normal(n_total) + 1j * rng.standard_normal(n_total)) / np.sqrt(2.0 * n_ray[ray_cluster])
    los_phase = float(rng.uniform(0.0, TWO_PI))

    ray_aoa_az = (aoa_az[ray_cluster] + offsets[:, 0]) % TWO_PI
    ray_aoa_el = np.clip(aoa_el[ray_cluster] + offsets[:, 1], -HALF_PI, HALF_PI)
    ray_aod_az = _wrap_symmetric(aod_az[ray_cluster] + offsets[:, 2])
    ray_aod_el = np.clip(aod_el[ray_cluster] + offsets[:, 3], -HALF_PI, HALF_PI)
    ray_distance = subpath_distance(
        r_i[ray_cluster], d_u, cfg.bs_height, cfg.user_height, ray_aod_az, ray_aod_el
    )
    return ClusterSet(
        aoa_azimuth=aoa_az,
        aoa_elevation=aoa_el,
        aod_azimuth=aod_az,
        aod_elevation=aod_el,
        distance=r_i,
        rays_per_cluster=n_ray,
        ray_cluster=ray_cluster,
        ray_offsets=offsets,
        ray_aoa_azimuth=ray_aoa_az,
        ray_aoa_elevation=ray_aoa_el,
        ray_aod_azimuth=ray_aod_az,
        ray_aod_elevation=ray_aod_el,
        ray_gain=gain,
        ray_distance=np.atleast_1d(ray_distance),
        ray_delay=np.atleast_1d(ray_distance) / SPEED_OF_LIGHT,
        los=bool(los),
        los_phase=los_phase,
    )


def los_angles(drop: UserDrop, user: int, bs_height: float) -> tuple[float, float, float, float]:
    """Geometric LOS direction of one user, in each array's local frame.

    Returns ``(aod_azimuth, aod_elevation, aoa_azimuth, aoa_elevation)``.
    """
    x, y, z = drop.positions[user]
    horizontal = drop.horizontal_distance[user]
    aod_az = float(_wrap_symmetric(math.atan2(y, x) - drop.bs_azimuth))
    aod_el = math.atan2(z - bs_height, horizontal)
    aoa_az = float((math.atan2(-y, -x) - drop.user_azimuth[user]) % TWO_PI)
    aoa_el = math.atan2(bs_height - z, horizontal) - drop.user_elevation[user]
    return aod_az, aod_el, aoa_az, aoa_el


def assemble_user_channel(cfg: ScenarioConfig, clusters: ClusterSet, bs_array: SteeringConvention,
                          user_array: SteeringConvention, distance: float, shadow_db: float = 0.0,
                          los_direction: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)) -> np.ndarray:
    """Flat ``n_BS x K`` channel of one user.

    NLOS part: every ray adds ``alpha * exp(-j 2 pi f_c tau) * sqrt(L(r_il)) a_r a_t^H``.
    LOS part (when ``clusters.los``): ``sqrt(K n_BS) exp(j eta) sqrt(L(distance)) a_r a_t^H``
    toward `los_direction` (see :func:`los_angles`). `shadow_db` is the
    per-link shadowing applied to every path.

    When ``cfg.normalize_nlos`` is set the NLOS sum is scaled by
    ``sqrt(K n_BS / N_cl)``.
    """
    wavelength = cfg.wavelength
    n_bs, k = bs_array.size, user_array.size

    gain_db = path_loss_db(cfg.path_loss, clusters.ray_distance, wavelength, shadow_db=shadow_db)
    coeff = (
        clusters.ray_gain
        * np.exp(-1j * TWO_PI * cfg.carrier_frequency * clusters.ray_delay)
        * np.sqrt(db_to_linear(gain_db))
    )
    a_t = steering_matrix(bs_array, clusters.ray_aod_azimuth, clusters.ray_aod_elevation)
    a_r = steering_matrix(user_array, clusters.ray_aoa_azimuth, clusters.ray_aoa_elevation)
    # sum_l conj(coeff_l) a_t,l a_r,l^H
    h = (a_t * coeff.conj()) @ a_r.conj().T
    if cfg.normalize_nlos:
        h *= math.sqrt(k * n_bs / clusters.num_clusters)

    if clusters.los:
        aod_az, aod_el, aoa_az, aoa_el = los_direction
        amp = math.sqrt(k * n_bs) * math.sqrt(float(db_to_linear(
            path_loss_db(cfg.path_loss, distance, wavelength, shadow_db=shadow_db)
        )))
        coeff_los = amp * np.exp(1j * clusters.los_phase)
        h = h + np.conj(coeff_los) * (
            steering_vector(bs_array, aod_az, aod_el) @ steering_vector(user_array, aoa_az, aoa_el).conj().T
        )
    return h


def assemble_multiuser_channel(per_user) -> np.ndarray:
    """Concatenate per-user blocks column-wise, in user order."""
    blocks = [np.asarray(b, dtype=np.complex128) for b in per_user]
    if not blocks:
        raise InvalidArgumentError("need at least one user channel")
    rows = {b.shape[0] for b in blocks}
    if len(rows) != 1 or any(b.ndim != 2 for b in blocks):
        raise InvalidArgumentError(f"per-user blocks must be 2-D with equal row counts, got {[b.shape for b in blocks]}")
    return np.hstack(blocks)
