"""Base-station selection for massive MIMO downlinks with two-stage precoding.

A library plus CLI that drops user clusters into a multi-BS cell, builds
one-ring channel covariances, constructs exact or approximate nulling
prebeamformers with zero-forcing inner precoders, and compares five
cluster-to-BS selection strategies by Monte Carlo sum-rate.
"""

from .channel import (
    ChannelRealization,
    ClusterChannelModel,
    Covariance,
    EigenBasis,
    build_cluster_models,
    build_covariance,
    eigen_truncate,
    sample_channels,
)
from .harness import (
    ExperimentPlan,
    ResultRow,
    aggregate,
    plan_from_dict,
    replay_drop,
    run_drop,
    run_experiment,
)
from .metrics import compute_laslnr, compute_sinr, compute_slnr, sum_rate
from .precoding import (
    PrecoderSet,
    abd_prebeamformer,
    bd_prebeamformer,
    build_precoder_set,
    zf_inner_precoder,
)
from .scenario import (
    NetworkConfig,
    Scenario,
    derive_one_ring_params,
    place_network,
)
from .selection import (
    ALGORITHMS,
    SelectionResult,
    attach_inner_precoders,
    exhaustive_sinr_select,
    greedy_laslnr_select,
    greedy_slnr_select,
    largest_energy_select,
    prepare_candidates,
    random_select,
)

__version__ = "0.1.0"
