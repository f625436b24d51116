"""Two-stage precoders: nulling prebeamformers and the ZF inner stage.

A prebeamformer B (N x M, orthonormal columns) is chosen per (cluster, BS)
from covariance knowledge alone. The exact variant places B in the
orthogonal complement of every other in-sector cluster's eigenspace; the
approximate variant only avoids each interferer's dominant eigenvectors,
trading residual leakage for a larger search space. The inner precoder is
a per-user-power-scaled zero-forcing right inverse of the effective
channel H B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channel import EigenBasis, fix_column_phases
from .exceptions import InfeasibleNullSpace, NumericalFailure, RankDeficient

# Singular values below this fraction of the largest count as part of the
# interference span, which keeps residual projections under the 1e-8
# nulling tolerance.
_SPAN_REL_TOL = 1e-9
_ZF_REL_TOL = 1e-10

CATEGORY_FIRST = "first"
CATEGORY_SECOND = "second"


def _full_svd(matrix):
    # numpy's gesdd occasionally fails to converge on valid inputs; retry
    # with the slower but sturdier gesvd before giving up
    try:
        u, s, _ = np.linalg.svd(matrix, full_matrices=True)
    except np.linalg.LinAlgError:
        try:
            u, s, _ = scipy.linalg.svd(matrix, full_matrices=True,
                                       lapack_driver="gesvd")
        except Exception as exc:
            raise NumericalFailure(f"singular value decomposition failed: "
                                   f"{exc}") from exc
    return u, s


def _complement_basis(blocks, num_antennas):
    """Orthonormal basis of the orthogonal complement of the stacked spans."""
    blocks = [b for b in blocks if b.shape[1] > 0]
    if not blocks:
        return np.eye(num_antennas, dtype=complex), 0
    stacked = np.concatenate(blocks, axis=1)
    u, s = _full_svd(stacked)
    rank = int(np.count_nonzero(s > _SPAN_REL_TOL * s[0])) if s.size else 0
    return u[:, rank:], rank


def _dominant_prebeamformer(target: EigenBasis, blocks, num_columns: int):
    num_antennas = target.vectors.shape[0]
    complement, span_rank = _complement_basis(blocks, num_antennas)
    if complement.shape[1] < num_columns:
        raise InfeasibleNullSpace(
            f"complement dimension {complement.shape[1]} after nulling a rank-"
            f"{span_rank} interference space is below {num_columns}"
        )
    core = complement.conj().T @ target.weighted_matrix() @ complement
    core = 0.5 * (core + core.conj().T)
    try:
        _, vecs = np.linalg.eigh(core)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"projected eigendecomposition failed: "
                               f"{exc}") from exc
    chosen = vecs[:, ::-1][:, :num_columns]
    return fix_column_phases(complement @ chosen)


def bd_prebeamformer(target: EigenBasis, interferers, num_columns: int) -> np.ndarray:
    """Exact-nulling prebeamformer.

    Columns are the ``num_columns`` dominant directions of the target's
    weighted eigenspace projected onto the orthogonal complement of the
    joint interference span, so ``E'^H B = 0`` for every interferer basis.

    Raises
    ------
    InfeasibleNullSpace
        If fewer than ``num_columns`` dimensions survive the nulling.
    """
    blocks = [basis.vectors for basis in interferers]
    return _dominant_prebeamformer(target, blocks, num_columns)


def dominant_eigenvector_count(basis: EigenBasis, keep) -> int:
    """Eigenvectors an interferer contributes to the approximate nulling.

    ``keep`` is either a direct count or the smallest count capturing that
    fraction of the basis's eigenvalue mass.
    """
    if isinstance(keep, (int, np.integer)):
        return int(min(keep, basis.rank))
    total = float(np.sum(basis.values))
    if total <= 0.0:
        return basis.rank
    cumulative = np.cumsum(basis.values)
    return int(np.searchsorted(cumulative, keep * total) + 1)


def abd_prebeamformer(target: EigenBasis, interferers, num_columns: int,
                      keep=0.95) -> np.ndarray:
    """Approximate-nulling prebeamformer.

    Identical construction to :func:`bd_prebeamformer` except each
    interferer contributes only its dominant eigenvectors (selected by
    ``keep``); leakage into the discarded eigenvalue tail remains.
    """
    blocks = [
        basis.vectors[:, : dominant_eigenvector_count(basis, keep)]
        for basis in interferers
    ]
    return _dominant_prebeamformer(target, blocks, num_columns)


def zf_inner_precoder(eff_channel: np.ndarray, power: float) -> np.ndarray:
    """Zero-forcing inner precoder with per-column power ``power``.

    Computes the right pseudo-inverse of the K x M effective channel and
    rescales every column to squared norm ``power``; the received matrix
    ``eff_channel @ V`` stays diagonal under the rescaling.

    Raises
    ------
    RankDeficient
        If the smallest singular value is below 1e-10 of the largest.
    """
    eff_channel = np.asarray(eff_channel)
    try:
        singulars = np.linalg.svd(eff_channel, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"singular values of the effective channel "
                               f"failed: {exc}") from exc
    if singulars.size == 0 or singulars[-1] < _ZF_REL_TOL * singulars[0]:
        raise RankDeficient(
            f"effective channel condition {singulars[0] / max(singulars[-1], 1e-300):.3e} "
            "exceeds the zero-forcing limit"
        )
    raw = np.linalg.pinv(eff_channel)
    norms = np.linalg.norm(raw, axis=0)
    return raw * (np.sqrt(power) / norms)


@dataclass(eq=False)
class PrecoderEntry:
    bs: int
    prebeamformer: np.ndarray  # (N, M)
    inner: np.ndarray          # (M, K)
    eff_channel: np.ndarray    # (K, M)


@dataclass(eq=False)
class PrecoderSet:
    """Prebeamformer and inner precoder for every cluster of one assignment."""

    assignment: tuple
    entries: dict  # cluster -> PrecoderEntry
    category: str


def prebeamformer_for(models, scenario, cluster, bs, category, keep=0.95,
                      num_columns=None):
    """Prebeamformer of one (cluster, BS) pair against every other in-sector
    cluster at that BS.

    The interference space deliberately covers all other in-sector
    clusters, not only co-served ones, so the result never depends on how
    the remaining clusters are assigned.
    """
    if num_columns is None:
        num_columns = scenario.config.users_per_cluster
    interferers = [
        models[(other, bs)].basis
        for other in scenario.sector_clusters_of_bs(bs)
        if other != cluster
    ]
    target = models[(cluster, bs)].basis
    if category == CATEGORY_FIRST:
        return bd_prebeamformer(target, interferers, num_columns)
    if category == CATEGORY_SECOND:
        return abd_prebeamformer(target, interferers, num_columns, keep)
    raise ValueError(f"unknown prebeamformer category {category!r}")


def build_precoder_set(scenario, models, realization, assignment, category,
                       keep=None, power=None) -> PrecoderSet:
    """Assemble both precoding stages for a full assignment.

    Errors from either stage are re-raised with the (BS, cluster) pair that
    caused them.
    """
    cfg = scenario.config
    if keep is None:
        keep = cfg.abd_keep_fraction
    if power is None:
        power = cfg.per_user_power
    entries = {}
    for cluster, bs in enumerate(assignment):
        try:
            beam = prebeamformer_for(models, scenario, cluster, bs, category, keep)
            eff = realization.row_channels[(cluster, bs)] @ beam
            inner = zf_inner_precoder(eff, power)
        except InfeasibleNullSpace as exc:
            raise InfeasibleNullSpace(f"bs {bs}, cluster {cluster}: {exc}") from exc
        except RankDeficient as exc:
            raise RankDeficient(f"bs {bs}, cluster {cluster}: {exc}") from exc
        entries[cluster] = PrecoderEntry(bs=bs, prebeamformer=beam, inner=inner,
                                         eff_channel=eff)
    return PrecoderSet(assignment=tuple(assignment), entries=entries,
                       category=category)
