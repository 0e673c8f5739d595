"""Reinforced random walks on multiple networks.

One walker per layer; walkers whose visiting histories look alike pull
each other's transition operators together.  See ``engine`` for the
iteration, ``accel`` for the approximate solvers and ``tasks`` for
community detection, link prediction and context sampling.
"""

from .accel import STRATEGIES, solve
from .engine import InitializationError, RwmConfig, WalkerState, run
from .multinet import (LoadError, MultiNetwork, Network, QuerySpec, as_general, as_multiplex, load_manifest,
                       network_from_arrays)
from .tasks import (Community, RankedPairs, WalkCorpus, detect_local_communities, precision_at_k,
                    predict_links, sample_contexts, sweep_cut)

__all__ = [
    "STRATEGIES", "solve", "InitializationError", "RwmConfig", "WalkerState", "run",
    "LoadError", "MultiNetwork", "Network", "QuerySpec", "as_general", "as_multiplex", "load_manifest",
    "network_from_arrays", "Community", "RankedPairs", "WalkCorpus", "detect_local_communities",
    "precision_at_k", "predict_links", "sample_contexts", "sweep_cut",
]
