"""Distribution property testing under memory and communication constraints.

Every tester runs inside a runtime that charges the bits it keeps in
memory or sends over the wire, so resource claims can be checked as
exactly as error rates.
"""

from dtlab.comm import (
    Player,
    PlayerSource,
    Transcript,
    distributed_aggregate_uniformity,
    distributed_bipartite_uniformity,
    distributed_closeness,
    protocol_to_stream,
    query_player,
    unary_decode,
    unary_encode,
)
from dtlab.core_dist import (
    DiscreteDistribution,
    Rng,
    SampleMultiset,
    count_pairwise_collisions,
    draw,
    lp_distance,
    lp_norm,
    make_paninski_instance,
    make_uniform,
    multiset_mass,
    tv_distance,
)
from dtlab.experiments import ExperimentConfig, TrialReport, run_trials, tradeoff_grid
from dtlab.flattening import Flattener, build_flattener, flatten_distribution, flatten_sample
from dtlab.hashing import FourWiseHash, apply_hash, push_forward, sample_hash
from dtlab.kernels import BACKEND
from dtlab.l2_estimator import BucketCounts, estimate_l2_sq, l2_closeness_test
from dtlab.plot import emit_plot
from dtlab.streaming import (
    MemoryLedger,
    SampleStream,
    bipartite_collision_uniformity,
    closeness_memory,
    streaming_uniformity,
)
from dtlab.verdict import Decision, TestVerdict

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "apply_hash",
    "BACKEND",
    "bipartite_collision_uniformity",
    "BucketCounts",
    "build_flattener",
    "closeness_memory",
    "count_pairwise_collisions",
    "Decision",
    "DiscreteDistribution",
    "distributed_aggregate_uniformity",
    "distributed_bipartite_uniformity",
    "distributed_closeness",
    "draw",
    "emit_plot",
    "estimate_l2_sq",
    "ExperimentConfig",
    "flatten_distribution",
    "flatten_sample",
    "Flattener",
    "FourWiseHash",
    "l2_closeness_test",
    "lp_distance",
    "lp_norm",
    "make_paninski_instance",
    "make_uniform",
    "MemoryLedger",
    "multiset_mass",
    "Player",
    "PlayerSource",
    "protocol_to_stream",
    "push_forward",
    "query_player",
    "Rng",
    "run_trials",
    "sample_hash",
    "SampleMultiset",
    "SampleStream",
    "streaming_uniformity",
    "TestVerdict",
    "tradeoff_grid",
    "Transcript",
    "TrialReport",
    "tv_distance",
    "unary_decode",
    "unary_encode",
]
