"""Stochastic molecular-communication simulator for astrocyte networks.

Calcium and IP3 signalling between 3D-lattice-coupled astrocytes is run as
a multi-scale Gillespie simulation, with healthy and Alzheimer-type cell
models, four wiring schemes, and channel metrics (propagation extent,
molecular delay, gain).
"""

from .params import (
    ADParams,
    ConfigError,
    EngineParams,
    ErdosRenyi,
    GapJunctionParams,
    HealthyParams,
    LinkRadius,
    RegularDegree,
    Scenario,
    ScenarioConfig,
    Shortcut,
    StimulusKind,
    StimulusSpec,
    VgccParams,
    config_from_dict,
    config_to_dict,
    load_config,
    preset,
    save_config,
)
from .single_cell import (
    Model,
    Trajectory,
    ad_rest_state,
    ad_rhs,
    healthy_rhs,
    integrate,
    scan_oscillations,
)
from .gap_junction import GjProbabilities, GjState, gj_rates, gj_sample, gj_stationary, gj_step
from .topology import TissueGraph, bfs_distances, build_topology, cell_coord, cell_id, graph_stats
from .engine import (
    EventLog,
    QuiescentSystemError,
    Simulation,
    ip3_gap_flux,
    run,
    run_single_cell_ensemble,
    sample_j_prod,
    sample_tau,
    select_reaction,
)
from .comms import (
    apply_stimulus,
    channel_gain,
    molecular_delay,
    propagation_extent,
    run_experiment_matrix,
)

__version__ = "0.1.0"
