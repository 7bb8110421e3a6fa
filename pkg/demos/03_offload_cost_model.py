"""Data movement and device footprint at papers scale.

Everything here is integer arithmetic on graph statistics; nothing is
allocated.

Run: python3 demos/03_offload_cost_model.py
"""

from gcnbench import cost
from gcnbench.cost import A100_40GB
from gcnbench.errors import CapacityError

bw = cost.papers_workload("batch-wise")
r = cost.est_batchwise_movement(bw, A100_40GB)
print("batch-wise, 64 targets, 30 neighbors per vertex, 3 layers of width 256")
print(f"  expanded set per batch : {r.expanded_vertices_per_batch:,} vertices")
print(f"  batches                : {r.num_batches:,}")
print(f"  moved per batch        : {cost.format_bytes(r.bytes_per_batch)}")
print(f"  moved in total         : {cost.format_bytes(r.total_movement)} "
      f"({r.est_transfer_seconds / 3600:.0f} h at 32 GB/s)")

lw = cost.papers_workload("layer-wise")
r = cost.est_layerwise_movement(lw, A100_40GB)
print("layer-wise, 1M targets reaching 15M vertices per batch")
print(f"  device footprint       : {cost.format_bytes(r.peak_device_footprint)}")
print(f"  moved in total         : {cost.format_bytes(r.total_movement)} "
      f"({r.est_transfer_seconds:.0f} s at 32 GB/s)")

try:
    cost.est_fullgraph_offload((cost.PAPERS_VERTICES, cost.PAPERS_EDGES), (256,) * 4, A100_40GB)
except CapacityError as exc:
    print("full graph:", exc)

# At small widths the whole graph fits, so the answer is capped at V.
print("\nlargest batch that fits 40 GB, by embedding width (batch-wise, 3 layers, 30 neighbors)")
for dim in (8, 32, 128, 256):
    w = cost.papers_workload("batch-wise", dim=dim)
    print(f"  width {dim:>3}: {cost.max_batch_size(w, A100_40GB):>5} targets")
