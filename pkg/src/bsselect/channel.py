"""One-ring covariance synthesis, truncated eigenbases and channel draws.

The covariance of a cluster's channel at one base station has entries

    [R]_{p,q} = (1 / 2 delta) * integral over [theta - delta, theta + delta]
                of exp(-2j pi (p - q) sin(alpha) tau / lambda) d alpha,

evaluated with fixed-node Gauss-Legendre quadrature. Channels are drawn
through the truncated Karhunen-Loeve representation h = E sqrt(Lambda) w
with w circularly-symmetric unit-variance complex Gaussian.

Convention: the stored per-user row channel is h^H, i.e. the row vector
that multiplies the precoded transmit signal. All signal and leakage
powers are Hermitian pairings |h^H B v|^2, which is what makes eigenspace
nulling (E'^H B = 0) remove inter-cluster interference exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import InvalidSpread, NumericalFailure

DEFAULT_QUAD_NODES = 200
_EXACT_RANK_FLOOR = 1e-12

_quad_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(num_nodes: int):
    if num_nodes not in _quad_cache:
        _quad_cache[num_nodes] = np.polynomial.legendre.leggauss(num_nodes)
    return _quad_cache[num_nodes]


def fix_column_phases(matrix: np.ndarray) -> np.ndarray:
    """Rotate each column so its first nonzero entry is real positive.

    Fixes the phase ambiguity of eigenvectors so repeated runs produce
    identical bases.
    """
    out = np.array(matrix, dtype=complex, copy=True)
    for j in range(out.shape[1]):
        col = out[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-12)
        if nz.size:
            pivot = col[nz[0]]
            out[:, j] = col * (pivot.conj() / abs(pivot))
    return out


@dataclass(eq=False)
class Covariance:
    """Hermitian Toeplitz channel covariance with its source parameters."""

    matrix: np.ndarray
    theta: float
    delta: float
    spacing_ratio: float

    @property
    def num_antennas(self) -> int:
        return self.matrix.shape[0]


@dataclass(eq=False)
class EigenBasis:
    """Truncated eigenpair of a covariance: orthonormal columns, descending
    positive eigenvalues."""

    vectors: np.ndarray  # (N, r)
    values: np.ndarray   # (r,)

    @property
    def rank(self) -> int:
        return self.vectors.shape[1]

    @property
    def largest(self) -> float:
        return float(self.values[0]) if self.values.size else 0.0

    def weighted_matrix(self) -> np.ndarray:
        """E Lambda E^H, the covariance restricted to the kept eigenspace."""
        return (self.vectors * self.values) @ self.vectors.conj().T


@dataclass(eq=False)
class ClusterChannelModel:
    """Per (cluster, BS) second-order model: covariance plus eigenbasis."""

    covariance: Covariance
    basis: EigenBasis


def build_covariance(theta, delta, num_antennas, spacing_ratio,
                     num_nodes=DEFAULT_QUAD_NODES) -> Covariance:
    """Synthesise the one-ring covariance for one (cluster, BS) pair.

    ``delta == 0`` returns the degenerate point-source matrix directly.

    Raises
    ------
    InvalidSpread
        If ``delta`` is negative or at least pi/2.
    """
    if delta < 0 or delta >= np.pi / 2:
        raise InvalidSpread(f"angle spread {delta} outside [0, pi/2)")
    lag = np.arange(num_antennas)
    if delta == 0.0:
        lags = np.exp(-2j * np.pi * spacing_ratio * lag * np.sin(theta))
    else:
        nodes, weights = _gauss_legendre(num_nodes)
        sines = np.sin(theta + delta * nodes)
        # (1 / 2 delta) * (delta * sum w_j f(alpha_j)) = 0.5 * sum w_j f
        lags = 0.5 * np.exp(-2j * np.pi * spacing_ratio * np.outer(lag, sines)) @ weights
    matrix = scipy.linalg.toeplitz(lags, lags.conj())
    return Covariance(matrix=matrix, theta=float(theta), delta=float(delta),
                      spacing_ratio=float(spacing_ratio))


def eigen_truncate(cov, eps_rank: float = 1e-3) -> EigenBasis:
    """Hermitian eigendecomposition truncated to the dominant eigenvalues.

    Keeps the smallest rank whose eigenvalue mass reaches
    ``(1 - eps_rank) * trace``. With ``eps_rank == 0`` every eigenvalue
    above 1e-12 is kept. Quadrature-noise negatives are clamped to zero
    before the square root is ever taken.
    """
    matrix = cov.matrix if isinstance(cov, Covariance) else np.asarray(cov)
    try:
        vals, vecs = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigendecomposition failed: {exc}") from exc
    vals = vals[::-1].copy()
    vecs = vecs[:, ::-1]
    vals[vals < 0.0] = 0.0
    if eps_rank == 0.0:
        rank = max(int(np.count_nonzero(vals > _EXACT_RANK_FLOOR)), 1)
    else:
        target = (1.0 - eps_rank) * float(np.real(np.trace(matrix)))
        rank = int(np.searchsorted(np.cumsum(vals), target) + 1)
        rank = min(rank, vals.size)
    return EigenBasis(vectors=fix_column_phases(vecs[:, :rank]),
                      values=vals[:rank].copy())


def build_cluster_models(scenario, eps_rank=None, num_nodes=DEFAULT_QUAD_NODES):
    """Covariance and eigenbasis for every in-sector (cluster, BS) pair."""
    cfg = scenario.config
    if eps_rank is None:
        eps_rank = cfg.eps_rank
    models = {}
    for c in range(scenario.num_clusters):
        for l in range(scenario.num_bs):
            if not scenario.in_sector[c, l]:
                continue
            cov = build_covariance(
                scenario.theta[c, l], scenario.delta[c, l],
                cfg.num_antennas, cfg.antenna_spacing_ratio, num_nodes,
            )
            models[(c, l)] = ClusterChannelModel(cov, eigen_truncate(cov, eps_rank))
    return models


@dataclass(eq=False)
class ChannelRealization:
    """One drop of channels for every modelled (cluster, BS) pair.

    ``row_channels[(c, l)]`` is the K x N matrix whose k-th row is h^H for
    user k; ``whitened[(c, l)]`` holds the K x r Gaussian vectors the draw
    came from, so h = E sqrt(Lambda) w can be reconstructed exactly.
    """

    users_per_cluster: int
    num_antennas: int
    row_channels: dict
    whitened: dict

    def channel_vector(self, cluster: int, user: int, bs: int) -> np.ndarray:
        """Column channel h (N,) with E{h h^H} = R."""
        return self.row_channels[(cluster, bs)][user].conj()

    def frobenius_energy(self, cluster: int, bs: int) -> float:
        rows = self.row_channels[(cluster, bs)]
        return float(np.sum(np.abs(rows) ** 2))


def sample_channels(bases: dict, users_per_cluster: int, rng) -> ChannelRealization:
    """Draw one channel realisation for every (cluster, BS) eigenbasis.

    Users draw independent circularly-symmetric complex Gaussian whitened
    vectors; pairs are visited in sorted key order so a fixed generator
    state yields a fixed realisation.
    """
    rows: dict = {}
    whitened: dict = {}
    num_antennas = 0
    for key in sorted(bases):
        basis = bases[key]
        num_antennas = basis.vectors.shape[0]
        shape = (users_per_cluster, basis.rank)
        w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
        columns = basis.vectors @ (np.sqrt(basis.values)[:, None] * w.T)  # (N, K)
        rows[key] = columns.conj().T
        whitened[key] = w
    return ChannelRealization(users_per_cluster, num_antennas, rows, whitened)
