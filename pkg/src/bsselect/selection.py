"""Base-station selection strategies over one drop.

Five strategies share a candidate structure: per cluster, the ascending
list of in-sector base stations whose prebeamformer (and, once a channel
realisation is attached, inner precoder) exists. The prebeamformer of a
(cluster, BS) pair nulls every other in-sector cluster at that BS, so it
never depends on the assignment; that is what lets the exhaustive search
memoise precoders across all enumerated assignments and lets the greedy
scores decompose per cluster.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import metrics
from .exceptions import (
    EnumerationTooLarge,
    InfeasibleNullSpace,
    NoFeasibleBS,
    NumericalFailure,
    RankDeficient,
)
from .precoding import PrecoderEntry, PrecoderSet, prebeamformer_for, zf_inner_precoder

ALGORITHMS = (
    "exhaustive_sinr",
    "greedy_slnr",
    "greedy_laslnr",
    "largest_energy",
    "random",
)

DEFAULT_MAX_ENUMERATION = 10 ** 6
_ENUMERATION_CHUNK = 1 << 14


@dataclass(eq=False)
class SelectionResult:
    """Outcome of one strategy: the assignment, its own objective and the
    candidate scores it examined (NaN where a pair was not a candidate)."""

    assignment: tuple
    objective_value: float | None
    per_cluster_scores: np.ndarray | None
    algorithm: str
    num_evaluated: int | None = None

    def clusters_of_bs(self, bs: int) -> list[int]:
        return [c for c, l in enumerate(self.assignment) if l == bs]


@dataclass(eq=False)
class CandidatePrecoders:
    """Feasible candidates per cluster with their memoised precoders.

    ``bs_lists[c]`` is ascending. ``inners``/``eff_channels`` stay None
    until a realisation is attached; covariance-only consumers work with
    the prebeamformers alone.
    """

    bs_lists: list
    prebeamformers: dict
    excluded: dict
    category: str
    inners: dict | None = None
    eff_channels: dict | None = None


def prepare_candidates(scenario, models, category, keep=None) -> CandidatePrecoders:
    """Stage one: feasibility and prebeamformers from covariances alone.

    A pair is excluded when the cluster's effective rank cannot carry its
    streams or when nulling leaves too few dimensions.
    """
    cfg = scenario.config
    if keep is None:
        keep = cfg.abd_keep_fraction
    users = cfg.users_per_cluster
    beams: dict = {}
    excluded: dict = {}
    lists = []
    for c in range(scenario.num_clusters):
        feasible = []
        for l in scenario.sector_bs_of_cluster(c):
            if models[(c, l)].basis.rank < users:
                excluded[(c, l)] = "RankDeficient"
                continue
            try:
                beams[(c, l)] = prebeamformer_for(models, scenario, c, l,
                                                  category, keep)
            except (InfeasibleNullSpace, NumericalFailure) as exc:
                excluded[(c, l)] = type(exc).__name__
                continue
            feasible.append(l)
        lists.append(feasible)
    return CandidatePrecoders(bs_lists=lists, prebeamformers=beams,
                              excluded=excluded, category=category)


def attach_inner_precoders(candidates, realization, power) -> CandidatePrecoders:
    """Stage two: zero-forcing inner precoders for every surviving pair."""
    inners: dict = {}
    effs: dict = {}
    excluded = dict(candidates.excluded)
    lists = []
    for c, feasible in enumerate(candidates.bs_lists):
        kept = []
        for l in feasible:
            eff = realization.row_channels[(c, l)] @ candidates.prebeamformers[(c, l)]
            try:
                inners[(c, l)] = zf_inner_precoder(eff, power)
            except (RankDeficient, NumericalFailure) as exc:
                excluded[(c, l)] = type(exc).__name__
                continue
            effs[(c, l)] = eff
            kept.append(l)
        lists.append(kept)
    return replace(candidates, bs_lists=lists, excluded=excluded,
                   inners=inners, eff_channels=effs)


def assemble_precoders(candidates, assignment) -> PrecoderSet:
    """Precoder set for an assignment, reusing the memoised stages.

    Assignments produced by the score-driven strategies always hit cached
    pairs; energy-based or random picks may land on an excluded pair, in
    which case the recorded exclusion reason is raised.
    """
    kinds = {"RankDeficient": RankDeficient, "NumericalFailure": NumericalFailure}
    entries = {}
    for c, l in enumerate(assignment):
        key = (c, l)
        if key not in candidates.prebeamformers or key not in (candidates.inners or {}):
            reason = candidates.excluded.get(key, "InfeasibleNullSpace")
            exc = kinds.get(reason, InfeasibleNullSpace)
            raise exc(f"bs {l}, cluster {c}: pair is not precoder-feasible")
        entries[c] = PrecoderEntry(
            bs=l,
            prebeamformer=candidates.prebeamformers[key],
            inner=candidates.inners[key],
            eff_channel=candidates.eff_channels[key],
        )
    return PrecoderSet(assignment=tuple(assignment), entries=entries,
                       category=candidates.category)


def select_by_scores(score_table, bs_lists) -> tuple:
    """Row-wise argmax over each cluster's candidates; ties go to the
    lowest BS index."""
    assignment = []
    for c, feasible in enumerate(bs_lists):
        if not feasible:
            raise NoFeasibleBS(f"cluster {c} has no feasible base station")
        best_bs, best_score = None, -np.inf
        for l in feasible:
            score = score_table[c, l]
            if score > best_score:
                best_bs, best_score = l, score
        assignment.append(best_bs)
    return tuple(assignment)


def _score_table(scenario):
    return np.full((scenario.num_clusters, scenario.num_bs), np.nan)


def greedy_slnr_select(scenario, realization, candidates, noise_power) -> SelectionResult:
    """Assign every cluster to the candidate BS maximising its own summed
    SLNR; one pass over clusters, one score per candidate."""
    scores = _score_table(scenario)
    for c, feasible in enumerate(candidates.bs_lists):
        for l in feasible:
            slnr, _, _ = metrics.compute_slnr(
                realization, c, l,
                candidates.prebeamformers[(c, l)], candidates.inners[(c, l)],
                noise_power,
            )
            scores[c, l] = float(np.sum(slnr))
    assignment = select_by_scores(scores, candidates.bs_lists)
    objective = float(sum(scores[c, l] for c, l in enumerate(assignment)))
    return SelectionResult(assignment=assignment, objective_value=objective,
                           per_cluster_scores=scores, algorithm="greedy_slnr")


def greedy_laslnr_select(scenario, models, candidates, power, noise_power) -> SelectionResult:
    """Greedy pass scored by the average-SLNR lower bound.

    Works from covariances and prebeamformers only; no channel realisation
    is consumed.

    Candidates are ranked by the bound wherever its numerator is positive.
    A non-positive numerator makes the lower bound vacuous, and there the
    plain ratio orders candidates backwards (a large leakage denominator
    pulls a negative score toward zero), so such candidates rank by
    numerator times denominator instead, which stays monotone in retained
    energy and in leakage. Positive-bound candidates always outrank
    vacuous ones. The reported scores are the plain summed bounds.
    """
    users = scenario.config.users_per_cluster
    scores = _score_table(scenario)
    ranking = _score_table(scenario)
    for c, feasible in enumerate(candidates.bs_lists):
        for l in feasible:
            numerator, denominator = metrics.laslnr_components(
                models, c, l, candidates.prebeamformers[(c, l)],
                users, power, noise_power,
            )
            scores[c, l] = users * numerator / denominator
            ranking[c, l] = (numerator / denominator if numerator > 0
                             else numerator * denominator)
    assignment = select_by_scores(ranking, candidates.bs_lists)
    objective = float(sum(scores[c, l] for c, l in enumerate(assignment)))
    return SelectionResult(assignment=assignment, objective_value=objective,
                           per_cluster_scores=scores, algorithm="greedy_laslnr")


def _interference_tensors(scenario, realization, candidates):
    """Signal and pairwise interference terms shared by all assignments.

    ``signal[c, k, l]`` is user (c, k)'s received power from its own
    precoder at candidate BS l. ``cross[c, k, c2, l2]`` is the total power
    user (c, k) receives from cluster c2's precoder when c2 is served at
    BS l2; it depends on no other cluster's choice, which is what collapses
    the exhaustive search to table lookups.
    """
    num_clusters = scenario.num_clusters
    num_bs = scenario.num_bs
    users = realization.users_per_cluster
    signal = np.zeros((num_clusters, users, num_bs))
    cross = np.zeros((num_clusters, users, num_clusters, num_bs))
    for c2, feasible in enumerate(candidates.bs_lists):
        for l2 in feasible:
            transmit = candidates.prebeamformers[(c2, l2)] @ candidates.inners[(c2, l2)]
            signal[c2, :, l2] = np.abs(
                np.diagonal(realization.row_channels[(c2, l2)] @ transmit)
            ) ** 2
            for c in range(num_clusters):
                if c == c2:
                    continue
                rows = realization.row_channels.get((c, l2))
                if rows is None:
                    continue
                cross[c, :, c2, l2] = np.sum(np.abs(rows @ transmit) ** 2, axis=1)
    return signal, cross


def exhaustive_sinr_select(scenario, realization, candidates, noise_power,
                           max_enumeration=DEFAULT_MAX_ENUMERATION) -> SelectionResult:
    """Enumerate every feasible assignment and return the sum-SINR maximiser.

    Ties break toward the lexicographically smallest assignment (clusters
    enumerated most-significant first).

    Raises
    ------
    EnumerationTooLarge
        If the number of feasible assignments exceeds ``max_enumeration``.
    NoFeasibleBS
        If some cluster has no candidate at all.
    """
    lists = candidates.bs_lists
    counts = []
    for c, feasible in enumerate(lists):
        if not feasible:
            raise NoFeasibleBS(f"cluster {c} has no feasible base station")
        counts.append(len(feasible))
    total = int(np.prod(counts, dtype=np.int64))
    if total > max_enumeration:
        raise EnumerationTooLarge(
            f"{total} assignments exceed the guard of {max_enumeration}"
        )

    signal, cross = _interference_tensors(scenario, realization, candidates)
    num_clusters = len(lists)
    strides = np.ones(num_clusters, dtype=np.int64)
    for c in range(num_clusters - 2, -1, -1):
        strides[c] = strides[c + 1] * counts[c + 1]
    arrays = [np.asarray(feasible, dtype=np.int64) for feasible in lists]

    best_value = -np.inf
    best_assignment = None
    for start in range(0, total, _ENUMERATION_CHUNK):
        index = np.arange(start, min(total, start + _ENUMERATION_CHUNK))
        chosen = np.empty((index.size, num_clusters), dtype=np.int64)
        for c in range(num_clusters):
            chosen[:, c] = arrays[c][(index // strides[c]) % counts[c]]
        objective = np.zeros(index.size)
        for c in range(num_clusters):
            desired = signal[c][:, chosen[:, c]]          # (K, m)
            clutter = np.zeros_like(desired)
            for c2 in range(num_clusters):
                if c2 == c:
                    continue
                clutter += cross[c][:, c2, chosen[:, c2]]
            objective += np.sum(desired / (clutter + noise_power), axis=0)
        peak = int(np.argmax(objective))
        if objective[peak] > best_value:
            best_value = float(objective[peak])
            best_assignment = tuple(int(l) for l in chosen[peak])

    scores = _score_table(scenario)
    for c, l in enumerate(best_assignment):
        clutter = sum(
            cross[c][:, c2, best_assignment[c2]]
            for c2 in range(num_clusters) if c2 != c
        )
        if num_clusters == 1:
            clutter = np.zeros(realization.users_per_cluster)
        scores[c, l] = float(np.sum(signal[c][:, l] / (clutter + noise_power)))
    return SelectionResult(assignment=best_assignment, objective_value=best_value,
                           per_cluster_scores=scores, algorithm="exhaustive_sinr",
                           num_evaluated=total)


def largest_energy_select(scenario, realization) -> SelectionResult:
    """Each cluster independently picks the in-sector BS with the largest
    channel Frobenius energy; no feasibility screening beyond sectors."""
    scores = _score_table(scenario)
    lists = []
    for c in range(scenario.num_clusters):
        feasible = scenario.sector_bs_of_cluster(c)
        lists.append(feasible)
        for l in feasible:
            scores[c, l] = realization.frobenius_energy(c, l)
    assignment = select_by_scores(scores, lists)
    objective = float(sum(scores[c, l] for c, l in enumerate(assignment)))
    return SelectionResult(assignment=assignment, objective_value=objective,
                           per_cluster_scores=scores, algorithm="largest_energy")


def random_select(scenario, rng) -> SelectionResult:
    """Uniform choice among each cluster's in-sector base stations."""
    assignment = []
    for c in range(scenario.num_clusters):
        feasible = scenario.sector_bs_of_cluster(c)
        if not feasible:
            raise NoFeasibleBS(f"cluster {c} has no feasible base station")
        assignment.append(feasible[int(rng.integers(len(feasible)))])
    return SelectionResult(assignment=tuple(assignment), objective_value=None,
                           per_cluster_scores=None, algorithm="random")
