"""Location-privacy simulator for wireless ad hoc networks.

Builds quasi-unit-disk topologies, runs the EXTROUT route-extrapolation
scheme and its baselines under synchronized cover traffic, mounts a global
passive adversary on the resulting traffic trace, and reconciles measured
privacy/overhead numbers against the analytical formulas.
"""

from .topology import (
    Position,
    Topology,
    TopologyParams,
    average_degree,
    build_qudg,
    generate,
    link_probability,
    load_topology,
    place_nodes,
    save_topology,
)
from .routing import (
    ExtendedRoute,
    Route,
    UnreachableError,
    disjoint_paths,
    extrapolate,
    hop_distance,
    hop_distances,
    shortest_path,
)
from .protocols import (
    PlacementError,
    ProtocolVariant,
    ScenarioPlan,
    ScenarioSettings,
    TransmissionSchedule,
    TxEvent,
    build_scenario,
    dummy_schedule,
    pad_link,
    place_fake_pair,
)
from .simengine import TrafficTrace, run, transmission_matrix
from .adversary import (
    AttackerObservation,
    AttackSummary,
    AttackVerdict,
    active_subgraph,
    attack_trials,
    endpoint_candidates,
    observe,
    unlinkability_score,
)
from .metrics import (
    PrivacyReport,
    ReconciliationRecord,
    anonymity_extrout,
    anonymity_nfake,
    anonymity_pair,
    anonymity_single,
    reconcile,
    report_from_run,
    tof,
)

__version__ = "0.1.0"
