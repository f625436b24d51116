import json

import numpy as np
import pytest

from bsselect.exceptions import ConfigError, EmptyInput, UnknownDrop
from bsselect.harness import (
    ExperimentPlan,
    SWEEP_CLUSTERS,
    SWEEP_POWER_DB,
    aggregate,
    db_to_linear,
    plan_from_dict,
    plan_to_dict,
    replay_drop,
    run_experiment,
    write_drops_csv,
    write_failures_csv,
    write_results_csv,
)
from bsselect.scenario import NetworkConfig


def tiny_plan(**kwargs):
    defaults = dict(
        network=NetworkConfig(num_clusters=3, num_antennas=32, rng_seed=17),
        sweep_var=SWEEP_POWER_DB, sweep_values=(10, 20),
        algorithms=("greedy_slnr", "greedy_laslnr", "largest_energy",
                    "random"),
        category="first", num_drops=3)
    defaults.update(kwargs)
    return ExperimentPlan(**defaults)


def test_aggregate_examples():
    assert aggregate([7.0]) == (7.0, 0.0)
    mean, stderr = aggregate([10.0, 14.0])
    assert mean == pytest.approx(12.0)
    assert stderr == pytest.approx(2.0)
    with pytest.raises(EmptyInput):
        aggregate([])


def test_single_drop_reports_zero_stderr():
    plan = tiny_plan(num_drops=1, sweep_values=(20,),
                     algorithms=("random",))
    outcome = run_experiment(plan)
    assert len(outcome.rows) == 1
    row = outcome.rows[0]
    assert row.stderr == 0.0
    assert row.drops == 1


def test_db_conversion():
    assert db_to_linear(0) == pytest.approx(1.0)
    assert db_to_linear(20) == pytest.approx(100.0)


def test_config_at_applies_sweep():
    plan = tiny_plan()
    assert plan.config_at(20).per_user_power == pytest.approx(100.0)
    cluster_plan = tiny_plan(sweep_var=SWEEP_CLUSTERS, sweep_values=(2, 3),
                             network=NetworkConfig(num_clusters=3,
                                                   num_antennas=32))
    assert cluster_plan.config_at(2).num_clusters == 2


def test_plan_validation():
    with pytest.raises(ConfigError):
        tiny_plan(sweep_values=(20, 10)).validate()
    with pytest.raises(ConfigError):
        tiny_plan(sweep_values=()).validate()
    with pytest.raises(ConfigError):
        tiny_plan(algorithms=("nonsense",)).validate()
    with pytest.raises(ConfigError):
        tiny_plan(category="third").validate()
    with pytest.raises(ConfigError):
        tiny_plan(num_drops=0).validate()
    # exhaustive guard: 3^16 assignments is far beyond the default bound
    big = ExperimentPlan(
        network=NetworkConfig(num_clusters=16, num_antennas=64),
        sweep_var=SWEEP_POWER_DB, sweep_values=(20,),
        algorithms=("exhaustive_sinr",), num_drops=1)
    with pytest.raises(ConfigError):
        big.validate()


def test_plan_dict_round_trip():
    plan = tiny_plan()
    assert plan_from_dict(plan_to_dict(plan)) == plan


def test_plan_from_dict_rejects_unknown_keys():
    doc = plan_to_dict(tiny_plan())
    doc["network"]["bogus"] = 1
    with pytest.raises(ConfigError) as excinfo:
        plan_from_dict(doc)
    assert "network.bogus" in str(excinfo.value)
    doc = plan_to_dict(tiny_plan())
    doc["surprise"] = True
    with pytest.raises(ConfigError):
        plan_from_dict(doc)


def test_plan_from_dict_converts_db_power():
    doc = plan_to_dict(tiny_plan())
    del doc["network"]["per_user_power"]
    doc["network"]["per_user_power_dB"] = 20
    plan = plan_from_dict(doc)
    assert plan.network.per_user_power == pytest.approx(100.0)


def test_rerun_is_deterministic_and_worker_independent(tmp_path):
    plan = tiny_plan(num_drops=4)
    serial = run_experiment(plan, workers=1)
    parallel = run_experiment(plan, workers=2)
    again = run_experiment(plan, workers=1)

    paths = []
    for tag, outcome in (("a", serial), ("b", parallel), ("c", again)):
        path = tmp_path / f"results_{tag}.csv"
        write_results_csv(outcome.rows, path)
        drops = tmp_path / f"drops_{tag}.csv"
        write_drops_csv(outcome.drop_rows, drops)
        paths.append((path, drops))
    ref = paths[0][0].read_bytes(), paths[0][1].read_bytes()
    for path, drops in paths[1:]:
        assert path.read_bytes() == ref[0]
        assert drops.read_bytes() == ref[1]


def test_replay_reproduces_drop_row():
    plan = tiny_plan(num_drops=3)
    outcome = run_experiment(plan)
    target = next(r for r in outcome.drop_rows
                  if r[2] == 1 and r[3] == "greedy_slnr" and r[1] == 20)
    detail = replay_drop(plan, sweep_index=1, drop_index=1)
    replayed = detail.rates["greedy_slnr"][0]
    assert f"{replayed:.6g}" == f"{target[4]:.6g}"
    assert replayed == pytest.approx(target[4], rel=1e-12)


def test_replay_rejects_unknown_drop():
    plan = tiny_plan()
    with pytest.raises(UnknownDrop):
        replay_drop(plan, sweep_index=5, drop_index=0)
    with pytest.raises(UnknownDrop):
        replay_drop(plan, sweep_index=0, drop_index=99)


def test_failed_drops_are_recorded_not_skipped():
    # a 1 m scattering ring leaves effective rank 1 < 3 streams everywhere,
    # so no algorithm can build precoders
    network = NetworkConfig(num_clusters=2, num_antennas=16,
                            scattering_ring_radius=1.0, rng_seed=4)
    plan = ExperimentPlan(network=network, sweep_var=SWEEP_POWER_DB,
                          sweep_values=(20,),
                          algorithms=("greedy_slnr", "largest_energy",
                                      "random"),
                          num_drops=2)
    outcome = run_experiment(plan)
    assert outcome.rows == []
    assert len(outcome.failure_rows) == 6
    kinds = {row[3] for row in outcome.failure_rows}
    assert "NoFeasibleBS" in kinds
    assert "RankDeficient" in kinds


def test_csv_formats(tmp_path):
    plan = tiny_plan(num_drops=2, sweep_values=(20,),
                     algorithms=("random",))
    outcome = run_experiment(plan)
    results = tmp_path / "results.csv"
    write_results_csv(outcome.rows, results)
    text = results.read_text(encoding="utf-8")
    lines = text.split("\n")
    assert lines[0] == ("sweep_var,sweep_value,algorithm,category,"
                        "mean_sum_rate,stderr,mean_per_cluster_rate,"
                        "drops,seed")
    assert "\r" not in text
    cells = lines[1].split(",")
    assert cells[0] == SWEEP_POWER_DB
    assert cells[2] == "random"
    # six significant digits
    assert len(cells[4].replace(".", "").replace("-", "").lstrip("0")) <= 6

    failures = tmp_path / "failed.csv"
    write_failures_csv([(20, 0, "random", "RankDeficient")], failures)
    assert failures.read_text(encoding="utf-8").split("\n")[0] == \
        "sweep_value,drop,algorithm,error_kind"


def test_multi_draw_drop_averages(tmp_path):
    plan = tiny_plan(num_drops=1, sweep_values=(20,), draws_per_drop=3,
                     algorithms=("greedy_slnr",))
    outcome = run_experiment(plan)
    assert outcome.rows[0].drops == 1
    single = tiny_plan(num_drops=1, sweep_values=(20,), draws_per_drop=1,
                       algorithms=("greedy_slnr",))
    single_outcome = run_experiment(single)
    # extra draws change the drop mean but keep determinism
    assert outcome.rows[0].mean_sum_rate != \
        single_outcome.rows[0].mean_sum_rate
    assert run_experiment(plan).rows[0].mean_sum_rate == \
        outcome.rows[0].mean_sum_rate
