"""Monte Carlo experiment runner: sweeps, drops, aggregation, CSV output.

Every (sweep point, drop) pair gets its own sub-seed derived from the
master seed, so any single drop can be replayed in isolation and results
do not depend on how drops are distributed over workers. Geometry is
redrawn per drop; covariances and eigenbases are rebuilt only when the
geometry changes.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import metrics, selection
from .channel import build_cluster_models, sample_channels
from .exceptions import (
    ConfigError,
    EmptyInput,
    SimulationError,
    UnknownDrop,
)
from .scenario import NetworkConfig, place_network

SWEEP_POWER_DB = "per_user_power_dB"
SWEEP_CLUSTERS = "num_clusters"
SWEEP_VARIABLES = (SWEEP_POWER_DB, SWEEP_CLUSTERS)

RESULTS_FIELDS = (
    "sweep_var", "sweep_value", "algorithm", "category",
    "mean_sum_rate", "stderr", "mean_per_cluster_rate", "drops", "seed",
)
DROPS_FIELDS = (
    "sweep_var", "sweep_value", "drop", "algorithm", "sum_rate",
    "per_cluster_rate",
)
FAILURES_FIELDS = ("sweep_value", "drop", "algorithm", "error_kind")


def db_to_linear(value_db: float) -> float:
    return 10.0 ** (value_db / 10.0)


@dataclass(frozen=True)
class ExperimentPlan:
    """A full experiment: base network, sweep, algorithms, drop counts."""

    network: NetworkConfig
    sweep_var: str
    sweep_values: tuple
    algorithms: tuple = selection.ALGORITHMS
    category: str = "first"
    num_drops: int = 200
    draws_per_drop: int = 1
    output_dir: str | None = None
    max_enumeration: int = selection.DEFAULT_MAX_ENUMERATION

    def validate(self) -> None:
        self.network.validate(prefix="network.")
        if self.sweep_var not in SWEEP_VARIABLES:
            raise ConfigError("sweep.variable",
                              f"must be one of {SWEEP_VARIABLES}")
        if len(self.sweep_values) == 0:
            raise ConfigError("sweep.values", "must not be empty")
        if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
            raise ConfigError("sweep.values", "must be strictly increasing")
        for name in self.algorithms:
            if name not in selection.ALGORITHMS:
                raise ConfigError("algorithms",
                                  f"unknown algorithm {name!r}")
        if not self.algorithms:
            raise ConfigError("algorithms", "must not be empty")
        if self.category not in ("first", "second"):
            raise ConfigError("category", "must be 'first' or 'second'")
        if self.num_drops < 1:
            raise ConfigError("num_drops", "must be at least 1")
        if self.draws_per_drop < 1:
            raise ConfigError("draws_per_drop", "must be at least 1")
        if "exhaustive_sinr" in self.algorithms:
            worst = self._worst_case_enumeration()
            if worst > self.max_enumeration:
                raise ConfigError(
                    "algorithms",
                    f"exhaustive search may need {worst} assignments, above the "
                    f"guard of {self.max_enumeration}",
                )
        for sv in self.sweep_values:
            self.config_at(sv).validate(prefix="network.")

    def _worst_case_enumeration(self) -> int:
        clusters = self.network.num_clusters
        if self.sweep_var == SWEEP_CLUSTERS:
            clusters = max(int(v) for v in self.sweep_values)
        return self.network.num_bs ** clusters

    def config_at(self, sweep_value) -> NetworkConfig:
        """Network config with the sweep variable applied."""
        if self.sweep_var == SWEEP_POWER_DB:
            return replace(self.network, per_user_power=db_to_linear(sweep_value))
        return replace(self.network, num_clusters=int(sweep_value))


def plan_from_dict(doc: dict) -> ExperimentPlan:
    """Parse the structured-text (JSON) plan document.

    Physical quantities are SI / linear; a network key suffixed ``_dB`` is
    converted. Unknown keys are rejected with their field path.
    """
    if not isinstance(doc, dict):
        raise ConfigError("plan", "top level must be an object")
    known_top = {"network", "sweep", "algorithms", "category", "num_drops",
                 "draws_per_drop", "output_dir", "max_enumeration"}
    for key in doc:
        if key not in known_top:
            raise ConfigError(key, "unknown plan field")
    net_doc = dict(doc.get("network", {}))
    if "per_user_power_dB" in net_doc:
        net_doc["per_user_power"] = db_to_linear(net_doc.pop("per_user_power_dB"))
    valid_fields = set(NetworkConfig.__dataclass_fields__)
    for key in net_doc:
        if key not in valid_fields:
            raise ConfigError(f"network.{key}", "unknown network field")
    try:
        network = NetworkConfig(**net_doc)
    except TypeError as exc:
        raise ConfigError("network", str(exc)) from exc
    sweep = doc.get("sweep", {})
    for key in sweep:
        if key not in ("variable", "values"):
            raise ConfigError(f"sweep.{key}", "unknown sweep field")
    plan = ExperimentPlan(
        network=network,
        sweep_var=sweep.get("variable", SWEEP_POWER_DB),
        sweep_values=tuple(sweep.get("values", ())),
        algorithms=tuple(doc.get("algorithms", selection.ALGORITHMS)),
        category=doc.get("category", "first"),
        num_drops=int(doc.get("num_drops", 200)),
        draws_per_drop=int(doc.get("draws_per_drop", 1)),
        output_dir=doc.get("output_dir"),
        max_enumeration=int(doc.get("max_enumeration",
                                    selection.DEFAULT_MAX_ENUMERATION)),
    )
    plan.validate()
    return plan


def plan_to_dict(plan: ExperimentPlan) -> dict:
    return {
        "network": asdict(plan.network),
        "sweep": {"variable": plan.sweep_var, "values": list(plan.sweep_values)},
        "algorithms": list(plan.algorithms),
        "category": plan.category,
        "num_drops": plan.num_drops,
        "draws_per_drop": plan.draws_per_drop,
        "output_dir": plan.output_dir,
        "max_enumeration": plan.max_enumeration,
    }


# ---------------------------------------------------------------------------
# single-drop execution


def _drop_seeds(master_seed: int, sweep_index: int, drop_index: int):
    root = np.random.SeedSequence(entropy=master_seed,
                                  spawn_key=(sweep_index, drop_index))
    return root.spawn(3)  # geometry, channels, random selection


def _run_algorithms(scenario, models, candidates, realization, algorithms,
                    noise_power, power, rand_rng, max_enumeration,
                    collect_results=False):
    """One channel draw: run every requested strategy, score its assignment.

    Returns (rates, errors, results) where rates maps algorithm to
    (sum_rate, per_cluster_rate).
    """
    rates, errors, results = {}, {}, {}
    for name in algorithms:
        try:
            if name == "greedy_slnr":
                result = selection.greedy_slnr_select(scenario, realization,
                                                      candidates, noise_power)
            elif name == "greedy_laslnr":
                result = selection.greedy_laslnr_select(scenario, models,
                                                        candidates, power,
                                                        noise_power)
            elif name == "exhaustive_sinr":
                result = selection.exhaustive_sinr_select(
                    scenario, realization, candidates, noise_power,
                    max_enumeration)
            elif name == "largest_energy":
                result = selection.largest_energy_select(scenario, realization)
            elif name == "random":
                result = selection.random_select(scenario, rand_rng)
            else:
                raise ConfigError("algorithms", f"unknown algorithm {name!r}")
            precoders = selection.assemble_precoders(candidates, result.assignment)
            record = metrics.compute_sinr(realization, precoders, noise_power)
            rates[name] = metrics.sum_rate(record.sinr)
            if collect_results:
                results[name] = (result, record)
        except SimulationError as exc:
            errors[name] = type(exc).__name__
    return rates, errors, results


def run_drop(network: NetworkConfig, category: str, algorithms: tuple,
             sweep_index: int, drop_index: int, draws_per_drop: int = 1,
             max_enumeration: int = selection.DEFAULT_MAX_ENUMERATION):
    """Execute one drop; returns ({alg: (rate, per_cluster)}, {alg: error_kind}).

    Rates are means over the drop's channel draws. An algorithm that fails
    on any draw is reported failed for the whole drop.
    """
    geom_seed, chan_seed, rand_seed = _drop_seeds(network.rng_seed,
                                                  sweep_index, drop_index)
    try:
        scenario = place_network(network, rng=np.random.default_rng(geom_seed))
        models = build_cluster_models(scenario)
        base_candidates = selection.prepare_candidates(scenario, models, category)
    except SimulationError as exc:
        return {}, {name: type(exc).__name__ for name in algorithms}

    bases = {key: model.basis for key, model in models.items()}
    rand_rng = np.random.default_rng(rand_seed)
    totals = {name: [] for name in algorithms}
    errors: dict = {}
    for draw_seed in chan_seed.spawn(draws_per_drop):
        realization = sample_channels(bases, network.users_per_cluster,
                                      np.random.default_rng(draw_seed))
        candidates = selection.attach_inner_precoders(base_candidates,
                                                      realization,
                                                      network.per_user_power)
        live = [name for name in algorithms if name not in errors]
        rates, draw_errors, _ = _run_algorithms(
            scenario, models, candidates, realization, live,
            network.noise_power, network.per_user_power, rand_rng,
            max_enumeration)
        errors.update(draw_errors)
        for name, value in rates.items():
            totals[name].append(value)
    results = {}
    for name in algorithms:
        if name in errors:
            continue
        pairs = totals[name]
        results[name] = (
            float(np.mean([p[0] for p in pairs])),
            float(np.mean([p[1] for p in pairs])),
        )
    return results, errors


def _drop_worker(payload):
    (network, category, algorithms, sweep_index, drop_index, draws,
     max_enumeration) = payload
    rates, errors = run_drop(network, category, algorithms, sweep_index,
                             drop_index, draws, max_enumeration)
    return sweep_index, drop_index, rates, errors


# ---------------------------------------------------------------------------
# experiment-level API


@dataclass(frozen=True)
class ResultRow:
    sweep_var: str
    sweep_value: float
    algorithm: str
    category: str
    mean_sum_rate: float
    stderr: float
    mean_per_cluster_rate: float
    drops: int
    seed: int


@dataclass(eq=False)
class ExperimentResult:
    plan: ExperimentPlan
    rows: list
    drop_rows: list      # (sweep_var, sweep_value, drop, algorithm, rate, pc_rate)
    failure_rows: list   # (sweep_value, drop, algorithm, error_kind)


def aggregate(values):
    """Mean and standard error of a sample; stderr is 0 for one value.

    Raises
    ------
    EmptyInput
        If no values are given.
    """
    values = list(values)
    if not values:
        raise EmptyInput("nothing to aggregate")
    mean = float(np.mean(values))
    if len(values) == 1:
        return mean, 0.0
    return mean, float(np.std(values, ddof=1) / math.sqrt(len(values)))


def run_experiment(plan: ExperimentPlan, workers: int = 1) -> ExperimentResult:
    """Run the full sweep and aggregate per (sweep value, algorithm).

    A failed drop is recorded in the failure rows and excluded from the
    aggregates; it is never silently skipped. Output is identical for any
    worker count.
    """
    plan.validate()
    payloads = []
    for sweep_index, sweep_value in enumerate(plan.sweep_values):
        config = plan.config_at(sweep_value)
        for drop_index in range(plan.num_drops):
            payloads.append((config, plan.category, plan.algorithms,
                             sweep_index, drop_index, plan.draws_per_drop,
                             plan.max_enumeration))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_drop_worker, payloads, chunksize=4))
    else:
        outcomes = [_drop_worker(p) for p in payloads]
    outcomes.sort(key=lambda item: (item[0], item[1]))

    by_sweep: dict = {}
    drop_rows, failure_rows = [], []
    for sweep_index, drop_index, rates, errors in outcomes:
        sweep_value = plan.sweep_values[sweep_index]
        for name in plan.algorithms:
            if name in rates:
                total, per_cluster = rates[name]
                by_sweep.setdefault((sweep_index, name), []).append(
                    (total, per_cluster))
                drop_rows.append((plan.sweep_var, sweep_value, drop_index,
                                  name, total, per_cluster))
            elif name in errors:
                failure_rows.append((sweep_value, drop_index, name,
                                     errors[name]))

    rows = []
    for sweep_index, sweep_value in enumerate(plan.sweep_values):
        for name in plan.algorithms:
            samples = by_sweep.get((sweep_index, name))
            if not samples:
                continue
            mean_rate, stderr = aggregate([s[0] for s in samples])
            mean_pc, _ = aggregate([s[1] for s in samples])
            rows.append(ResultRow(
                sweep_var=plan.sweep_var, sweep_value=sweep_value,
                algorithm=name, category=plan.category,
                mean_sum_rate=mean_rate, stderr=stderr,
                mean_per_cluster_rate=mean_pc, drops=len(samples),
                seed=plan.network.rng_seed,
            ))
    return ExperimentResult(plan=plan, rows=rows, drop_rows=drop_rows,
                            failure_rows=failure_rows)


# ---------------------------------------------------------------------------
# replay


@dataclass(eq=False)
class DropDetail:
    """Everything a replay prints about one drop."""

    scenario: object
    sweep_value: float
    drop_index: int
    selections: dict   # algorithm -> SelectionResult
    sinr: dict         # algorithm -> SinrRecord
    slnr: dict         # algorithm -> (C, K) array of per-user SLNR
    rates: dict        # algorithm -> (sum_rate, per_cluster_rate)
    errors: dict       # algorithm -> error kind


def replay_drop(plan: ExperimentPlan, sweep_index: int, drop_index: int,
                algorithms=None) -> DropDetail:
    """Re-execute exactly one (sweep point, drop) with full detail.

    Uses the first channel draw of the drop, which is the only draw when
    ``draws_per_drop == 1``.

    Raises
    ------
    UnknownDrop
        If the indices fall outside the plan.
    """
    plan.validate()
    if not 0 <= sweep_index < len(plan.sweep_values):
        raise UnknownDrop(f"sweep index {sweep_index} outside "
                          f"0..{len(plan.sweep_values) - 1}")
    if not 0 <= drop_index < plan.num_drops:
        raise UnknownDrop(f"drop {drop_index} outside 0..{plan.num_drops - 1}")
    algorithms = tuple(algorithms or plan.algorithms)
    network = plan.config_at(plan.sweep_values[sweep_index])
    geom_seed, chan_seed, rand_seed = _drop_seeds(network.rng_seed,
                                                  sweep_index, drop_index)
    scenario = place_network(network, rng=np.random.default_rng(geom_seed))
    models = build_cluster_models(scenario)
    base_candidates = selection.prepare_candidates(scenario, models,
                                                   plan.category)
    bases = {key: model.basis for key, model in models.items()}
    realization = sample_channels(bases, network.users_per_cluster,
                                  np.random.default_rng(chan_seed.spawn(1)[0]))
    candidates = selection.attach_inner_precoders(base_candidates, realization,
                                                  network.per_user_power)
    rates, errors, picked = _run_algorithms(
        scenario, models, candidates, realization, algorithms,
        network.noise_power, network.per_user_power,
        np.random.default_rng(rand_seed), plan.max_enumeration,
        collect_results=True)

    selections, sinr, slnr = {}, {}, {}
    for name, (result, record) in picked.items():
        selections[name] = result
        sinr[name] = record
        per_user = np.zeros_like(record.sinr)
        for c, l in enumerate(result.assignment):
            values, _, _ = metrics.compute_slnr(
                realization, c, l, candidates.prebeamformers[(c, l)],
                candidates.inners[(c, l)], network.noise_power)
            per_user[c] = values
        slnr[name] = per_user
    return DropDetail(scenario=scenario,
                      sweep_value=plan.sweep_values[sweep_index],
                      drop_index=drop_index, selections=selections,
                      sinr=sinr, slnr=slnr, rates=rates, errors=errors)


# ---------------------------------------------------------------------------
# text output


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_results_csv(rows, path) -> None:
    _write_csv(path, RESULTS_FIELDS, [
        (r.sweep_var, r.sweep_value, r.algorithm, r.category,
         r.mean_sum_rate, r.stderr, r.mean_per_cluster_rate, r.drops, r.seed)
        for r in rows
    ])


def write_drops_csv(drop_rows, path) -> None:
    _write_csv(path, DROPS_FIELDS, drop_rows)


def write_failures_csv(failure_rows, path) -> None:
    _write_csv(path, FAILURES_FIELDS, failure_rows)


def dump_matrix(matrix, path) -> None:
    """Debug dump of a complex matrix as whitespace-separated re/im pairs."""
    matrix = np.asarray(matrix)
    stacked = np.empty((matrix.shape[0], 2 * matrix.shape[1]))
    stacked[:, 0::2] = matrix.real
    stacked[:, 1::2] = matrix.imag
    np.savetxt(path, stacked, fmt="%.17e")
