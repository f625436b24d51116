"""Network geometry: BS placement, cluster drops, per-pair ring parameters.

Base stations sit on the cell boundary at equal angular spacing with their
boresights pointing at the cell centre, each covering a 120 degree sector.
Clusters are dropped uniformly over the cell disc and characterised, per
base station, by the azimuth of the scattering-ring centre and the half
angle the ring subtends.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .exceptions import ConfigError, DegenerateGeometry

SECTOR_HALF_ANGLE = np.pi / 3.0  # 120 degree sector antennas

_PLACEMENT_BATCH = 512
_PLACEMENT_MAX_BATCHES = 10_000


@dataclass(frozen=True)
class NetworkConfig:
    """Physical and statistical parameters of one network realisation.

    Powers are linear. ``per_user_power`` is the squared norm of each
    user's inner-precoder column. ``eps_rank`` is the eigenvalue-mass
    fraction discarded when truncating covariance eigenbases; 0.0 keeps
    every eigenvalue above 1e-12 instead.
    """

    cell_radius: float = 1000.0
    num_bs: int = 3
    num_clusters: int = 8
    users_per_cluster: int = 3
    num_antennas: int = 64
    antenna_spacing_ratio: float = 0.5
    scattering_ring_radius: float = 100.0
    noise_power: float = 1.0
    per_user_power: float = 100.0
    rng_seed: int = 0
    ignore_sectors: bool = False
    eps_rank: float = 1e-3
    abd_keep_fraction: float = 0.95

    def validate(self, prefix: str = "") -> None:
        def bad(name, reason):
            raise ConfigError(prefix + name, reason)

        if self.num_bs < 1:
            bad("num_bs", "must be at least 1")
        if self.num_clusters < 1:
            bad("num_clusters", "must be at least 1")
        if self.users_per_cluster < 1:
            bad("users_per_cluster", "must be at least 1")
        needed = self.num_clusters * self.users_per_cluster
        if self.num_antennas < needed:
            bad(
                "num_antennas",
                f"must be at least num_clusters * users_per_cluster = {needed}",
            )
        if not self.cell_radius > 0:
            bad("cell_radius", "must be positive")
        if not self.scattering_ring_radius > 0:
            bad("scattering_ring_radius", "must be positive")
        if self.scattering_ring_radius >= self.cell_radius:
            bad("scattering_ring_radius", "must be smaller than cell_radius")
        if not self.noise_power > 0:
            bad("noise_power", "must be positive")
        if not self.per_user_power > 0:
            bad("per_user_power", "must be positive")
        if not self.antenna_spacing_ratio > 0:
            bad("antenna_spacing_ratio", "must be positive")
        if not 0.0 <= self.eps_rank < 1.0:
            bad("eps_rank", "must lie in [0, 1)")
        if isinstance(self.abd_keep_fraction, int):
            if self.abd_keep_fraction < 1:
                bad("abd_keep_fraction", "eigenvector count must be at least 1")
        elif not 0.0 < self.abd_keep_fraction <= 1.0:
            bad("abd_keep_fraction", "fraction must lie in (0, 1]")


def derive_one_ring_params(bs_position, bs_boresight, cluster_position, ring_radius):
    """Ring parameters of one cluster as seen from one base station.

    Returns ``(theta, delta, in_sector)`` where ``theta`` is the azimuth of
    the cluster centre relative to the boresight, ``delta`` the half angle
    subtended by the scattering ring (``arcsin(ring_radius / distance)``,
    the exact tangent-line half angle), and ``in_sector`` is true iff
    ``|theta| <= 60deg``.

    Raises
    ------
    DegenerateGeometry
        If the base station lies on or inside the scattering ring.
    """
    bs_position = np.asarray(bs_position, dtype=float)
    cluster_position = np.asarray(cluster_position, dtype=float)
    bore = np.asarray(bs_boresight, dtype=float)
    bore = bore / np.hypot(bore[0], bore[1])
    diff = cluster_position - bs_position
    distance = float(np.hypot(diff[0], diff[1]))
    if distance <= ring_radius:
        raise DegenerateGeometry(
            f"distance {distance:.3f} m does not exceed ring radius {ring_radius:.3f} m"
        )
    cos_part = bore[0] * diff[0] + bore[1] * diff[1]
    sin_part = bore[0] * diff[1] - bore[1] * diff[0]
    theta = float(np.arctan2(sin_part, cos_part))
    delta = float(np.arcsin(ring_radius / distance))
    return theta, delta, bool(abs(theta) <= SECTOR_HALF_ANGLE)


@dataclass(eq=False)
class Scenario:
    """One geometry drop: positions plus derived per-(cluster, BS) angles."""

    config: NetworkConfig
    bs_positions: np.ndarray      # (L, 2)
    bs_boresights: np.ndarray     # (L, 2) unit vectors
    cluster_positions: np.ndarray  # (C, 2)
    theta: np.ndarray             # (C, L) azimuth relative to boresight
    delta: np.ndarray             # (C, L) ring half angle
    distances: np.ndarray         # (C, L)
    in_sector: np.ndarray         # (C, L) bool

    @property
    def num_bs(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def num_clusters(self) -> int:
        return self.cluster_positions.shape[0]

    def sector_bs_of_cluster(self, cluster: int) -> list[int]:
        """Ascending list of base stations that see this cluster in sector."""
        return [int(l) for l in np.flatnonzero(self.in_sector[cluster])]

    def sector_clusters_of_bs(self, bs: int) -> list[int]:
        """Ascending list of clusters inside this base station's sector."""
        return [int(c) for c in np.flatnonzero(self.in_sector[:, bs])]

    def to_json(self) -> str:
        doc = {
            "config": asdict(self.config),
            "bs_positions": self.bs_positions.tolist(),
            "bs_boresights": self.bs_boresights.tolist(),
            "cluster_positions": self.cluster_positions.tolist(),
            "theta": self.theta.tolist(),
            "delta": self.delta.tolist(),
            "distances": self.distances.tolist(),
            "in_sector": self.in_sector.astype(int).tolist(),
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = json.loads(text)
        return cls(
            config=NetworkConfig(**doc["config"]),
            bs_positions=np.array(doc["bs_positions"], dtype=float),
            bs_boresights=np.array(doc["bs_boresights"], dtype=float),
            cluster_positions=np.array(doc["cluster_positions"], dtype=float),
            theta=np.array(doc["theta"], dtype=float),
            delta=np.array(doc["delta"], dtype=float),
            distances=np.array(doc["distances"], dtype=float),
            in_sector=np.array(doc["in_sector"], dtype=bool),
        )


def _pair_parameters(bs_pos, boresights, cluster_pos, ring_radius, ignore_sectors):
    diff = cluster_pos[:, None, :] - bs_pos[None, :, :]      # (C, L, 2)
    dist = np.hypot(diff[..., 0], diff[..., 1])
    if np.any(dist <= ring_radius):
        raise DegenerateGeometry("a cluster ring engulfs a base station")
    cos_part = diff[..., 0] * boresights[None, :, 0] + diff[..., 1] * boresights[None, :, 1]
    sin_part = diff[..., 1] * boresights[None, :, 0] - diff[..., 0] * boresights[None, :, 1]
    theta = np.arctan2(sin_part, cos_part)
    delta = np.arcsin(ring_radius / dist)
    if ignore_sectors:
        in_sector = np.ones_like(theta, dtype=bool)
    else:
        in_sector = np.abs(theta) <= SECTOR_HALF_ANGLE
    return theta, delta, dist, in_sector


def _draw_cluster_positions(config, bs_pos, boresights, rng):
    """Uniform positions on the disc, rejecting drops that sit inside a ring
    or (with sectors enabled) outside every sector."""
    ring = config.scattering_ring_radius
    accepted = []
    for _ in range(_PLACEMENT_MAX_BATCHES):
        radii = config.cell_radius * np.sqrt(rng.random(_PLACEMENT_BATCH))
        angles = 2.0 * np.pi * rng.random(_PLACEMENT_BATCH)
        cand = np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1)
        diff = cand[:, None, :] - bs_pos[None, :, :]
        dist = np.hypot(diff[..., 0], diff[..., 1])
        ok = np.all(dist > ring, axis=1)
        if not config.ignore_sectors:
            cos_part = diff[..., 0] * boresights[None, :, 0] + diff[..., 1] * boresights[None, :, 1]
            sin_part = diff[..., 1] * boresights[None, :, 0] - diff[..., 0] * boresights[None, :, 1]
            theta = np.arctan2(sin_part, cos_part)
            ok &= np.any(np.abs(theta) <= SECTOR_HALF_ANGLE, axis=1)
        accepted.append(cand[ok])
        if sum(len(a) for a in accepted) >= config.num_clusters:
            return np.concatenate(accepted, axis=0)[: config.num_clusters]
    raise ConfigError(
        "cluster placement",
        "rejection sampling failed; geometry constraints leave no room",
    )


def place_network(config: NetworkConfig, rng=None) -> Scenario:
    """Build one geometry drop.

    Base stations go onto the cell boundary at equal angular spacing with
    boresights toward the centre. Cluster positions come from ``rng`` (or a
    fresh generator seeded with ``config.rng_seed``), so a fixed seed gives
    a fixed drop.
    """
    config.validate()
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)
    angles = 2.0 * np.pi * np.arange(config.num_bs) / config.num_bs
    bs_pos = config.cell_radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    boresights = -np.stack([np.cos(angles), np.sin(angles)], axis=1)
    clusters = _draw_cluster_positions(config, bs_pos, boresights, rng)
    theta, delta, dist, in_sector = _pair_parameters(
        bs_pos, boresights, clusters, config.scattering_ring_radius, config.ignore_sectors
    )
    return Scenario(
        config=config,
        bs_positions=bs_pos,
        bs_boresights=boresights,
        cluster_positions=clusters,
        theta=theta,
        delta=delta,
        distances=dist,
        in_sector=in_sector,
    )


def with_updates(config: NetworkConfig, **kwargs) -> NetworkConfig:
    """Functional update helper for configs (validates the result)."""
    updated = replace(config, **kwargs)
    updated.validate()
    return updated
