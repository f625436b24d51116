"""Runnable verification suites and the independent oracles they rely on.

Each suite re-derives a testable claim with machinery deliberately
different from the production path: covariance entries against a brute
Riemann sum, prebeamformers against a projector-based construction, the
greedy SLNR selection against full enumeration, the average-SLNR bound
against Monte Carlo, and the experiment-level orderings against fresh
sweeps. The pytest suite drives the same functions at the tolerances and
sizes the project promises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import harness, metrics, selection
from .channel import (
    build_cluster_models,
    build_covariance,
    eigen_truncate,
    sample_channels,
)
from .exceptions import NoFeasibleBS
from .precoding import abd_prebeamformer, bd_prebeamformer, zf_inner_precoder
from .scenario import NetworkConfig, place_network

SUITE_NAMES = ("covariance", "precoding", "theorem1", "laslnr-bound", "ordering")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _result(name, passed, detail=""):
    return CheckResult(name=name, passed=bool(passed), detail=detail)


# ---------------------------------------------------------------------------
# oracles


def riemann_covariance(theta, delta, num_antennas, spacing_ratio,
                       panels=1_000_000) -> np.ndarray:
    """Midpoint Riemann-sum evaluation of the ring integral.

    Slow but independent of the Gauss-Legendre path; the integrand for lag
    m is the m-th power of a single unit-modulus sample vector, so lags are
    accumulated with one running product.
    """
    if delta == 0.0:
        lag = np.arange(num_antennas)
        lags = np.exp(-2j * np.pi * spacing_ratio * lag * np.sin(theta))
    else:
        midpoints = theta - delta + (2.0 * delta) * (np.arange(panels) + 0.5) / panels
        base = np.exp(-2j * np.pi * spacing_ratio * np.sin(midpoints))
        lags = np.empty(num_antennas, dtype=complex)
        lags[0] = 1.0
        running = np.ones(panels, dtype=complex)
        for m in range(1, num_antennas):
            running *= base
            lags[m] = running.mean()
    matrix = np.empty((num_antennas, num_antennas), dtype=complex)
    for p in range(num_antennas):
        for q in range(num_antennas):
            m = p - q
            matrix[p, q] = lags[m] if m >= 0 else np.conj(lags[-m])
    return matrix


def projector_prebeamformer(target, interferers, num_columns) -> np.ndarray:
    """Brute-force nulling construction through an explicit projector.

    Builds P = I - U (U^H U)^+ U^H for the stacked interference matrix and
    takes dominant eigenvectors of P R P, deflating directions that keep a
    residual inside the interference span.
    """
    n = target.vectors.shape[0]
    blocks = [b.vectors for b in interferers if b.vectors.shape[1] > 0]
    if blocks:
        stacked = np.concatenate(blocks, axis=1)
        projector = np.eye(n, dtype=complex) - stacked @ np.linalg.pinv(stacked)
    else:
        stacked = None
        projector = np.eye(n, dtype=complex)
    core = projector @ target.weighted_matrix() @ projector
    core = 0.5 * (core + core.conj().T)
    vals, vecs = np.linalg.eigh(core)
    order = np.argsort(vals)[::-1]
    chosen = []
    for idx in order:
        candidate = projector @ vecs[:, idx]
        norm = np.linalg.norm(candidate)
        if norm < 1e-8:
            continue
        candidate = candidate / norm
        for prev in chosen:
            candidate = candidate - prev * (prev.conj() @ candidate)
        norm = np.linalg.norm(candidate)
        if norm < 1e-8:
            continue
        chosen.append(candidate / norm)
        if len(chosen) == num_columns:
            break
    return np.stack(chosen, axis=1)


def sinr_oracle(realization, precoders, noise_power) -> np.ndarray:
    """Straight-line SINR: every interfering (BS, cluster, user) term is
    summed explicitly, one scalar at a time."""
    clusters = sorted(precoders.entries)
    users = realization.users_per_cluster
    out = np.zeros((len(clusters), users))
    for c in clusters:
        entry = precoders.entries[c]
        for k in range(users):
            row = realization.row_channels[(c, entry.bs)][k]
            sig = abs(row @ entry.prebeamformer @ entry.inner[:, k]) ** 2
            interference = 0.0
            for c2 in clusters:
                if c2 == c:
                    continue
                other = precoders.entries[c2]
                if (c, other.bs) not in realization.row_channels:
                    continue
                victim_row = realization.row_channels[(c, other.bs)][k]
                for k2 in range(users):
                    interference += abs(
                        victim_row @ other.prebeamformer @ other.inner[:, k2]
                    ) ** 2
            out[c, k] = sig / (interference + noise_power)
    return out


def slnr_oracle(realization, cluster, bs, prebeamformer, inner,
                noise_power) -> np.ndarray:
    """Term-by-term SLNR over every other cluster's user at the BS."""
    users = realization.users_per_cluster
    out = np.zeros(users)
    own_rows = realization.row_channels[(cluster, bs)]
    for k in range(users):
        column = prebeamformer @ inner[:, k]
        sig = abs(own_rows[k] @ column) ** 2
        leak = 0.0
        for (other, other_bs), rows in realization.row_channels.items():
            if other_bs != bs or other == cluster:
                continue
            for k2 in range(rows.shape[0]):
                leak += abs(rows[k2] @ column) ** 2
        out[k] = sig / (leak + noise_power)
    return out


def ring_azimuth_oracle(bs_position, bs_boresight, cluster_position,
                        ring_radius, samples=200_000):
    """Brute-force (theta, delta) by scanning points of the actual ring."""
    bs_position = np.asarray(bs_position, dtype=float)
    cluster_position = np.asarray(cluster_position, dtype=float)
    bore = np.asarray(bs_boresight, dtype=float)
    bore = bore / np.hypot(bore[0], bore[1])
    phi = 2.0 * np.pi * np.arange(samples) / samples
    points = cluster_position + ring_radius * np.stack(
        [np.cos(phi), np.sin(phi)], axis=1)
    diff = points - bs_position
    azimuth = np.arctan2(bore[0] * diff[:, 1] - bore[1] * diff[:, 0],
                         bore[0] * diff[:, 0] + bore[1] * diff[:, 1])
    return (float((azimuth.max() + azimuth.min()) / 2.0),
            float((azimuth.max() - azimuth.min()) / 2.0))


# ---------------------------------------------------------------------------
# instance helpers


def _instance(seed, num_clusters, num_bs=3, num_antennas=64, eps_rank=1e-3,
              users=3, power=100.0, ignore_sectors=False):
    cfg = NetworkConfig(num_bs=num_bs, num_clusters=num_clusters,
                        users_per_cluster=users, num_antennas=num_antennas,
                        per_user_power=power, rng_seed=int(seed),
                        eps_rank=eps_rank, ignore_sectors=ignore_sectors)
    scenario = place_network(cfg)
    models = build_cluster_models(scenario)
    return cfg, scenario, models


def drop_with_candidates(seed, num_clusters, category, num_bs=3,
                         num_antennas=64, eps_rank=1e-3, users=3,
                         power=100.0, ignore_sectors=False):
    """One fully prepared drop: scenario, models, realisation, candidates."""
    cfg, scenario, models = _instance(seed, num_clusters, num_bs,
                                      num_antennas, eps_rank, users, power,
                                      ignore_sectors)
    bases = {key: model.basis for key, model in models.items()}
    realization = sample_channels(bases, cfg.users_per_cluster,
                                  np.random.default_rng(int(seed) + 7919))
    stage1 = selection.prepare_candidates(scenario, models, category)
    candidates = selection.attach_inner_precoders(stage1, realization,
                                                  cfg.per_user_power)
    return cfg, scenario, models, realization, candidates


# ---------------------------------------------------------------------------
# suites


def run_covariance_suite(tuples=20, max_antennas=32, panels=1_000_000,
                         seed=20240601):
    """Quadrature against the Riemann oracle plus structural invariants."""
    rng = np.random.default_rng(seed)
    results = []
    worst_gap = 0.0
    for i in range(tuples):
        theta = float(rng.uniform(-75, 75)) * np.pi / 180.0
        delta = float(rng.uniform(0.5, 25.0)) * np.pi / 180.0
        n = int(rng.integers(4, max_antennas + 1))
        cov = build_covariance(theta, delta, n, 0.5)
        oracle = riemann_covariance(theta, delta, n, 0.5, panels)
        gap = float(np.max(np.abs(cov.matrix - oracle)))
        worst_gap = max(worst_gap, gap)

        matrix = cov.matrix
        hermitian = float(np.max(np.abs(matrix - matrix.conj().T)))
        diagonal = float(np.max(np.abs(np.diagonal(matrix) - 1.0)))
        toeplitz = 0.0
        for off in range(-(n - 1), n):
            ref = matrix[-off, 0] if off < 0 else matrix[0, off]
            toeplitz = max(toeplitz, float(np.max(np.abs(
                np.diagonal(matrix, off) - ref))))
        smallest = float(np.linalg.eigvalsh(matrix)[0])
        doubled = build_covariance(theta, delta, n, 0.5, num_nodes=400).matrix
        node_gap = float(np.max(np.abs(matrix - doubled)))
        ok = (gap <= 1e-8 and hermitian <= 1e-12 and diagonal <= 1e-10
              and toeplitz <= 1e-12 and smallest >= -1e-10
              and node_gap <= 1e-10)
        results.append(_result(
            f"covariance tuple {i} (N={n})", ok,
            f"oracle gap {gap:.2e}, PSD floor {smallest:.2e}, "
            f"node doubling {node_gap:.2e}"))
    results.append(_result("worst oracle gap <= 1e-8", worst_gap <= 1e-8,
                           f"{worst_gap:.2e}"))
    return results


def run_precoding_suite(nulling_instances=50, zf_instances=100, seed=20240602):
    """Nulling, orthonormality and zero-forcing contracts."""
    rng = np.random.default_rng(seed)
    results = []

    worst_null, worst_orth = 0.0, 0.0
    for i in range(nulling_instances):
        bases = []
        for _ in range(3):
            theta = float(rng.uniform(-60, 60)) * np.pi / 180.0
            delta = float(rng.uniform(3, 15)) * np.pi / 180.0
            bases.append(eigen_truncate(build_covariance(theta, delta, 64, 0.5)))
        beam = bd_prebeamformer(bases[0], bases[1:], 3)
        null = max(float(np.max(np.abs(b.vectors.conj().T @ beam)))
                   for b in bases[1:])
        orth = float(np.max(np.abs(beam.conj().T @ beam - np.eye(3))))
        worst_null, worst_orth = max(worst_null, null), max(worst_orth, orth)
    results.append(_result(
        f"exact nulling over {nulling_instances} instances",
        worst_null <= 1e-8 and worst_orth <= 1e-10,
        f"max residual {worst_null:.2e}, max orthonormality gap {worst_orth:.2e}"))

    bases = [eigen_truncate(build_covariance(t, 0.15, 32, 0.5))
             for t in (0.1, 0.3, -0.4)]
    exact = bd_prebeamformer(bases[0], bases[1:], 3)
    approx = abd_prebeamformer(bases[0], bases[1:], 3, keep=1.0)
    space_gap = float(np.linalg.norm(
        exact @ exact.conj().T - approx @ approx.conj().T))
    results.append(_result("keep-everything approximation equals exact nulling",
                           space_gap <= 1e-8, f"subspace gap {space_gap:.2e}"))

    worst_off, worst_power = 0.0, 0.0
    for _ in range(zf_instances):
        k = int(rng.integers(2, 5))
        m = k + int(rng.integers(0, 4))
        eff = rng.standard_normal((k, m)) + 1j * rng.standard_normal((k, m))
        power = float(rng.uniform(0.5, 50.0))
        inner = zf_inner_precoder(eff, power)
        received = eff @ inner
        diag = np.abs(np.diagonal(received))
        off = received - np.diag(np.diagonal(received))
        worst_off = max(worst_off, float(np.max(np.abs(off)) / diag.max()))
        col_power = np.sum(np.abs(inner) ** 2, axis=0)
        worst_power = max(worst_power,
                          float(np.max(np.abs(col_power - power)) / power))
    results.append(_result(
        f"zero forcing over {zf_instances} instances",
        worst_off <= 1e-8 and worst_power <= 1e-10,
        f"max relative off-diagonal {worst_off:.2e}, "
        f"max power error {worst_power:.2e}"))
    return results


def theorem1_instance(seed, num_clusters, num_antennas=64, num_bs=3):
    """Greedy-vs-exhaustive comparison on one exact-rank drop.

    Returns (relative objective gap, assignments equal, per-user SLNR/SINR
    relative gap) or None when the drop has an infeasible cluster.
    """
    try:
        cfg, scenario, models, realization, candidates = drop_with_candidates(
            seed, num_clusters, "first", num_bs=num_bs,
            num_antennas=num_antennas, eps_rank=0.0)
        greedy = selection.greedy_slnr_select(scenario, realization,
                                              candidates, cfg.noise_power)
        exhaustive = selection.exhaustive_sinr_select(
            scenario, realization, candidates, cfg.noise_power)
    except NoFeasibleBS:
        return None
    greedy_set = selection.assemble_precoders(candidates, greedy.assignment)
    record = metrics.compute_sinr(realization, greedy_set, cfg.noise_power)
    greedy_sum = float(np.sum(record.sinr))
    gap = abs(greedy_sum - exhaustive.objective_value) / exhaustive.objective_value

    slnr_gap = 0.0
    for c, l in enumerate(greedy.assignment):
        slnr, _, _ = metrics.compute_slnr(
            realization, c, l, candidates.prebeamformers[(c, l)],
            candidates.inners[(c, l)], cfg.noise_power)
        slnr_gap = max(slnr_gap, float(np.max(
            np.abs(slnr - record.sinr[c]) / record.sinr[c])))
    return gap, greedy.assignment == exhaustive.assignment, slnr_gap


def run_theorem1_suite(instances=100, seed=20240603):
    """Greedy SLNR selection is optimal for the sum-SINR problem under
    exact nulling; checked by full enumeration on small drops."""
    rng = np.random.default_rng(seed)
    results = []
    done = 0
    attempts = 0
    worst_gap, worst_slnr, mismatches = 0.0, 0.0, 0
    while done < instances and attempts < instances * 4:
        attempts += 1
        num_clusters = int(rng.integers(2, 7))
        outcome = theorem1_instance(int(rng.integers(2 ** 63)), num_clusters)
        if outcome is None:
            continue
        gap, same_assignment, slnr_gap = outcome
        worst_gap = max(worst_gap, gap)
        worst_slnr = max(worst_slnr, slnr_gap)
        if not same_assignment and gap > 1e-9:
            mismatches += 1
        done += 1
    results.append(_result(
        f"greedy equals exhaustive on {done} instances",
        done == instances and worst_gap <= 1e-9 and mismatches == 0,
        f"worst objective gap {worst_gap:.2e}"))
    results.append(_result(
        "per-user SLNR equals SINR under exact nulling",
        worst_slnr <= 1e-6, f"worst relative gap {worst_slnr:.2e}"))
    return results


def laslnr_bound_instance(seed, draws=2000, category="first"):
    """Monte Carlo test of the average-SLNR lower bound for one random
    (cluster, BS, prebeamformer) triple.

    Returns (bound, empirical mean, standard error).
    """
    rng = np.random.default_rng(seed)
    cfg, scenario, models = _instance(int(rng.integers(2 ** 63)),
                                      num_clusters=4, num_antennas=32,
                                      users=3, eps_rank=1e-3)
    stage1 = selection.prepare_candidates(scenario, models, category)
    pairs = sorted(stage1.prebeamformers)
    cluster, bs = pairs[int(rng.integers(len(pairs)))]
    beam = stage1.prebeamformers[(cluster, bs)]
    bound = metrics.compute_laslnr(models, cluster, bs, beam,
                                   cfg.users_per_cluster, cfg.per_user_power,
                                   cfg.noise_power)
    bases = {key: model.basis for key, model in models.items()}
    means = np.empty(draws)
    for t in range(draws):
        realization = sample_channels(bases, cfg.users_per_cluster, rng)
        inner = zf_from(realization, cluster, bs, beam, cfg.per_user_power)
        slnr, _, _ = metrics.compute_slnr(realization, cluster, bs, beam,
                                          inner, cfg.noise_power)
        means[t] = float(np.mean(slnr))
    return bound, float(means.mean()), float(means.std(ddof=1) / math.sqrt(draws))


def zf_from(realization, cluster, bs, beam, power):
    return zf_inner_precoder(realization.row_channels[(cluster, bs)] @ beam, power)


def run_laslnr_bound_suite(triples=20, draws=2000, seed=20240604):
    """Empirical mean SLNR must stay above the closed-form bound."""
    rng = np.random.default_rng(seed)
    results = []
    violations = 0
    for i in range(triples):
        category = "first" if i % 2 == 0 else "second"
        bound, empirical, stderr = laslnr_bound_instance(
            int(rng.integers(2 ** 63)), draws, category)
        ok = empirical >= bound - 3.0 * stderr
        if not ok:
            violations += 1
        results.append(_result(
            f"bound triple {i} ({category})", ok,
            f"bound {bound:.4g}, empirical {empirical:.4g} +- {stderr:.2g}"))
    results.append(_result("zero violations", violations == 0,
                           f"{violations} of {triples}"))
    return results


def ordering_checks(rows, category, require_exhaustive):
    """Ranking assertions over aggregated sweep rows of one experiment.

    The margin over the baselines holds at every sweep point; the
    greedy_laslnr agreement with greedy_slnr is a sweep-aggregate check
    (at the lowest power the value of instantaneous channel knowledge
    alone exceeds 5%, for any statistics-only selection rule).
    """
    by_value: dict = {}
    for row in rows:
        by_value.setdefault(row.sweep_value, {})[row.algorithm] = row
    results = []
    slnr_total = laslnr_total = 0.0
    point_gaps = []
    for value in sorted(by_value):
        table = by_value[value]
        for proposed in ("greedy_slnr", "greedy_laslnr"):
            for baseline in ("random", "largest_energy"):
                a, b = table[proposed], table[baseline]
                margin = a.mean_sum_rate - b.mean_sum_rate
                pooled = math.hypot(a.stderr, b.stderr)
                results.append(_result(
                    f"{category}: {proposed} > {baseline} at {value}",
                    margin > 2.0 * pooled,
                    f"margin {margin:.3g} vs 2*SE {2 * pooled:.3g}"))
        slnr, laslnr = table["greedy_slnr"], table["greedy_laslnr"]
        slnr_total += slnr.mean_sum_rate
        laslnr_total += laslnr.mean_sum_rate
        point_gaps.append(
            f"{value}: {100 * (slnr.mean_sum_rate - laslnr.mean_sum_rate) / slnr.mean_sum_rate:+.1f}%")
        if require_exhaustive:
            exhaustive = table["exhaustive_sinr"]
            rel = abs(exhaustive.mean_sum_rate - slnr.mean_sum_rate) / \
                exhaustive.mean_sum_rate
            results.append(_result(
                f"{category}: greedy_slnr equals exhaustive at {value}",
                rel <= 1e-9, f"relative gap {rel:.2e}"))
    results.append(_result(
        f"{category}: greedy_laslnr within 5% of greedy_slnr over the sweep",
        abs(slnr_total - laslnr_total) <= 0.05 * slnr_total,
        f"aggregate gap {100 * (slnr_total - laslnr_total) / slnr_total:+.2f}%"
        f" (per point: {', '.join(point_gaps)})"))
    return results


def shape_checks(rows):
    """Rise-then-fall of the greedy SLNR curve and the widening gap over
    random selection as the cluster count grows."""
    slnr = {r.sweep_value: r for r in rows if r.algorithm == "greedy_slnr"}
    rand = {r.sweep_value: r for r in rows if r.algorithm == "random"}
    values = sorted(slnr)
    means = [slnr[v].mean_sum_rate for v in values]
    errs = [slnr[v].stderr for v in values]
    peak = int(np.argmax(means))
    results = []

    unimodal = True
    for i in range(len(values) - 1):
        pooled = math.hypot(errs[i], errs[i + 1])
        if i < peak and means[i + 1] < means[i] - 2.0 * pooled:
            unimodal = False
        if i >= peak and means[i + 1] > means[i] + 2.0 * pooled:
            unimodal = False
    results.append(_result(
        "greedy_slnr sum-rate is unimodal over the cluster sweep", unimodal,
        f"peak at {values[peak]}"))
    interior = 0 < peak < len(values) - 1
    rises = means[peak] - means[0] > 2.0 * math.hypot(errs[peak], errs[0])
    falls = means[peak] - means[-1] > 2.0 * math.hypot(errs[peak], errs[-1])
    results.append(_result(
        "curve rises to an interior peak and falls after it",
        interior and rises and falls,
        f"peak {means[peak]:.4g} at {values[peak]}, "
        f"first {means[0]:.4g}, last {means[-1]:.4g}"))

    def gap(value):
        return slnr[value].mean_sum_rate - rand[value].mean_sum_rate

    results.append(_result(
        "greedy-vs-random gap grows from 4 to 12 clusters",
        gap(12) > gap(4), f"gap(12) {gap(12):.4g} vs gap(4) {gap(4):.4g}"))
    return results


def ordering_plan(category, num_drops=200, seed=424242,
                  pt_values=(0, 10, 20, 30), num_antennas=64):
    algorithms = ["greedy_slnr", "greedy_laslnr", "largest_energy", "random"]
    if category == "first":
        algorithms.insert(0, "exhaustive_sinr")
    return harness.ExperimentPlan(
        network=NetworkConfig(num_clusters=8, num_antennas=num_antennas,
                              rng_seed=seed),
        sweep_var=harness.SWEEP_POWER_DB, sweep_values=tuple(pt_values),
        algorithms=tuple(algorithms), category=category,
        num_drops=num_drops)


def cluster_sweep_plan(category="second", num_drops=200, seed=525252,
                       cluster_values=(2, 4, 6, 8, 10, 12, 14, 16),
                       num_antennas=64):
    return harness.ExperimentPlan(
        network=NetworkConfig(num_clusters=cluster_values[-1],
                              num_antennas=num_antennas,
                              per_user_power=100.0, rng_seed=seed),
        sweep_var=harness.SWEEP_CLUSTERS, sweep_values=tuple(cluster_values),
        algorithms=("greedy_slnr", "greedy_laslnr", "largest_energy", "random"),
        category=category, num_drops=num_drops)


def run_ordering_suite(num_drops=60, pt_values=(10, 20), workers=1,
                       cluster_drops=60):
    """Reduced-scale sweep orderings; the pytest acceptance module runs the
    same assertions at full scale."""
    results = []
    for category in ("first", "second"):
        plan = ordering_plan(category, num_drops=num_drops,
                             pt_values=pt_values)
        outcome = harness.run_experiment(plan, workers=workers)
        results.extend(ordering_checks(outcome.rows, category,
                                       require_exhaustive=(category == "first")))
        if outcome.failure_rows:
            results.append(_result(f"{category}: no failed drops", False,
                                   f"{len(outcome.failure_rows)} failures"))
    shape_outcome = harness.run_experiment(
        cluster_sweep_plan(num_drops=cluster_drops), workers=workers)
    results.extend(shape_checks(shape_outcome.rows))
    return results


SUITES = {
    "covariance": run_covariance_suite,
    "precoding": run_precoding_suite,
    "theorem1": run_theorem1_suite,
    "laslnr-bound": run_laslnr_bound_suite,
    "ordering": run_ordering_suite,
}
