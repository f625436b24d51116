"""Ready-made experiment plans, writable through the CLI."""

from __future__ import annotations

_BASE_NETWORK = {
    "cell_radius": 1000.0,
    "num_bs": 3,
    "num_clusters": 8,
    "users_per_cluster": 3,
    "num_antennas": 64,
    "antenna_spacing_ratio": 0.5,
    "scattering_ring_radius": 100.0,
    "noise_power": 1.0,
    "rng_seed": 1,
}


def _pt_sweep(category, with_exhaustive):
    algorithms = ["greedy_slnr", "greedy_laslnr", "largest_energy", "random"]
    if with_exhaustive:
        algorithms.insert(0, "exhaustive_sinr")
    return {
        "network": dict(_BASE_NETWORK),
        "sweep": {"variable": "per_user_power_dB", "values": [0, 10, 20, 30]},
        "algorithms": algorithms,
        "category": category,
        "num_drops": 200,
        "draws_per_drop": 1,
    }


def _cluster_sweep(category):
    network = dict(_BASE_NETWORK)
    network["num_clusters"] = 16
    network["per_user_power_dB"] = 20
    return {
        "network": network,
        "sweep": {"variable": "num_clusters",
                  "values": [2, 4, 6, 8, 10, 12, 14, 16]},
        "algorithms": ["greedy_slnr", "greedy_laslnr", "largest_energy",
                       "random"],
        "category": category,
        "num_drops": 200,
        "draws_per_drop": 1,
    }


def _fullscale():
    plan = _pt_sweep("first", with_exhaustive=True)
    plan["network"]["num_antennas"] = 128
    return plan


PRESETS = {
    "pt-sweep-first": (
        "per-user power sweep, desk scale (N=64), exact nulling, all five "
        "algorithms, 200 drops",
        lambda: _pt_sweep("first", with_exhaustive=True),
    ),
    "pt-sweep-second": (
        "per-user power sweep, desk scale (N=64), approximate nulling, "
        "200 drops",
        lambda: _pt_sweep("second", with_exhaustive=False),
    ),
    "cluster-sweep-first": (
        "cluster-count sweep at 20 dB, desk scale (N=64), exact nulling",
        lambda: _cluster_sweep("first"),
    ),
    "cluster-sweep-second": (
        "cluster-count sweep at 20 dB, desk scale (N=64), approximate nulling",
        lambda: _cluster_sweep("second"),
    ),
    "pt-sweep-fullscale": (
        "per-user power sweep at N=128 antennas; substantially slower",
        _fullscale,
    ),
}


def preset_plan(name: str) -> dict:
    return PRESETS[name][1]()
