"""Per-user link metrics: SINR, SLNR, the average-SLNR lower bound, rates.

Zero-forcing removes intra-cluster interference by construction, so the
SINR denominator sums other-cluster terms only: transmissions of the other
clusters at the victim's own BS plus transmissions of every cluster served
by the other BSs. The SLNR of a user flips the role: it sums the power its
own precoder leaks into every other in-sector cluster at the candidate BS,
which makes it independent of everyone else's selection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(eq=False)
class SinrRecord:
    """Per-user SINR decomposition for one assignment, all shaped (C, K)."""

    sinr: np.ndarray
    interference: np.ndarray
    signal: np.ndarray


def compute_sinr(realization, precoders, noise_power) -> SinrRecord:
    """SINR of every served user under a full precoder set.

    A victim contributes no interference term for base stations outside its
    sector (its channel there is not modelled).
    """
    clusters = sorted(precoders.entries)
    num_clusters = len(clusters)
    users = realization.users_per_cluster
    signal = np.zeros((num_clusters, users))
    interference = np.zeros((num_clusters, users))
    transmit = {
        c: precoders.entries[c].prebeamformer @ precoders.entries[c].inner
        for c in clusters
    }
    for c in clusters:
        entry = precoders.entries[c]
        received = realization.row_channels[(c, entry.bs)] @ transmit[c]
        signal[c] = np.abs(np.diagonal(received)) ** 2
        for other in clusters:
            if other == c:
                continue
            other_bs = precoders.entries[other].bs
            rows = realization.row_channels.get((c, other_bs))
            if rows is None:
                continue
            leak = rows @ transmit[other]
            interference[c] += np.sum(np.abs(leak) ** 2, axis=1)
    sinr = signal / (interference + noise_power)
    return SinrRecord(sinr=sinr, interference=interference, signal=signal)


def compute_slnr(realization, cluster, bs, prebeamformer, inner, noise_power):
    """SLNR of one cluster's users at a candidate BS.

    Returns ``(slnr, leakage, signal)`` arrays of shape (K,). Leakage of
    user k is the power its precoding column deposits on every other
    in-sector cluster's users at that BS; no knowledge of the other
    clusters' selections is needed.
    """
    transmit = prebeamformer @ inner
    own = realization.row_channels[(cluster, bs)] @ transmit
    signal = np.abs(np.diagonal(own)) ** 2
    leakage = np.zeros_like(signal)
    for (other, other_bs), rows in realization.row_channels.items():
        if other_bs != bs or other == cluster:
            continue
        spill = rows @ transmit
        leakage += np.sum(np.abs(spill) ** 2, axis=0)
    return signal / (leakage + noise_power), leakage, signal


def compute_laslnr(models, cluster, bs, prebeamformer, users_per_cluster,
                   power, noise_power) -> float:
    """Closed-form lower bound on the average SLNR of a (cluster, BS) pair.

    Needs only second-order channel knowledge and the prebeamformer:

        [tr(B^H R_c B) - (K - 1) lambda_c]
        / [sum over other in-sector clusters of K' tr(B^H R' B)
           + noise_power / power]

    R here is the covariance of the channels the simulator draws, i.e. the
    kept eigenpairs E Lambda E^H; using the raw synthesis matrix instead
    would let the discarded eigenvalue tail pollute the leakage traces
    that the sampled channels can never produce.

    The value is shared by all users of the cluster and may be negative;
    it is kept unclamped because only its ranking across candidate BSs
    matters.
    """
    numerator, denominator = laslnr_components(
        models, cluster, bs, prebeamformer, users_per_cluster, power,
        noise_power)
    return numerator / denominator


def laslnr_components(models, cluster, bs, prebeamformer, users_per_cluster,
                      power, noise_power):
    """Numerator and denominator of the average-SLNR bound, separately.

    The selection module needs both parts: when the numerator is not
    positive the bound is vacuous and the ratio no longer orders
    candidates usefully.
    """
    model = models[(cluster, bs)]
    own = _projected_trace(prebeamformer, model.basis)
    numerator = own - (users_per_cluster - 1) * model.basis.largest
    denominator = noise_power / power
    for (other, other_bs), other_model in models.items():
        if other_bs != bs or other == cluster:
            continue
        denominator += users_per_cluster * _projected_trace(
            prebeamformer, other_model.basis
        )
    return float(numerator), float(denominator)


def _projected_trace(beam, basis):
    """tr(B^H E Lambda E^H B) without forming the N x N product."""
    overlap = basis.vectors.conj().T @ beam
    return float(np.sum(basis.values[:, None] * np.abs(overlap) ** 2))


def user_rates(sinr: np.ndarray) -> np.ndarray:
    """Shannon rate log2(1 + SINR) per user."""
    return np.log2(1.0 + sinr)


def sum_rate(sinr: np.ndarray):
    """System sum-rate and per-cluster mean, in bits/s/Hz."""
    total = float(np.sum(user_rates(sinr)))
    return total, total / sinr.shape[0]
