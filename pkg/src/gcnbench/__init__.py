"""GCN inference engine with exact full-neighborhood mini-batching and an
analytical accelerator-offload cost model."""

from .cost import (
    A100_40GB,
    CostReport,
    DeviceModel,
    WorkloadSpec,
    est_batchwise_expansion,
    est_batchwise_movement,
    est_fullgraph_offload,
    est_host_footprint,
    est_layerwise_footprint,
    est_layerwise_movement,
    max_batch_size,
    num_batches,
)
from .engine import (
    GcnModel,
    LayerWeights,
    build_norm_coefficients,
    dense_mm,
    full_graph_inference,
    make_model,
    relu,
    spmm,
)
from .graph import (
    CsrGraph,
    GraphStats,
    compute_stats,
    from_edges,
    gen_features,
    gen_random_graph,
    load_binary,
    load_edge_list,
    save_binary,
)
from .sampler import (
    MiniBatchPlan,
    SamplingConfig,
    expand_neighborhood,
    plan_batchwise,
    plan_layerwise,
    run_batchwise,
    run_layerwise,
)

__version__ = "0.1.0"
