"""Critical-node identification in complex networks.

A desk-scale pipeline: SIR simulation labeling, a GraphSAGE+Transformer
influence regressor pre-trained on synthetic networks and fine-tuned by
clustering/uncertainty active learning, diversity-constrained seed selection
for influence maximization, and rank-based evaluation metrics.
"""

from .graph import (
    DegreeStats,
    Graph,
    GraphFormatError,
    degree_stats,
    from_edges,
    gen_ba,
    gen_er,
    gen_ws,
    largest_component,
    load_edge_list,
    save_edge_list,
)
from .propagation import (
    Beta,
    InfluenceLabels,
    SingularThresholdError,
    SpreadResult,
    epidemic_threshold,
    ic_spread,
    lt_spread,
    si_spread_curve,
    sir_label,
    sir_run,
)
from .rng import StreamPool, derive_seed, substream

__version__ = "0.1.0"
