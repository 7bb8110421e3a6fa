"""When the device only fits tiny batches, sampling dominates.

The device capacity is set so that batch-wise inference can only take 100
targets at a time on a 100k-vertex graph.

Run: python3 demos/05_sampling_dominance.py
"""

from dataclasses import replace

from gcnbench import bench, cost, engine, graph
from gcnbench.cost import A100_40GB, WorkloadSpec
from gcnbench.sampler import SamplingConfig

g = graph.gen_random_graph("erdos-renyi", 100_000, 800_000, seed=7)
x = graph.gen_features(g.num_vertices, 16, seed=7)
model = engine.make_model([16, 16, 16], seed=7)

w = WorkloadSpec.from_stats(graph.compute_stats(g), model.dims, 100, "batch-wise")
dev = replace(A100_40GB, memory_capacity=cost.peak_footprint(w, A100_40GB))
b = cost.max_batch_size(w, dev)
print(f"modeled capacity {cost.format_bytes(dev.memory_capacity)} -> batch size {b}")

full = bench.run_characterization(g, x, model, "full", dev=A100_40GB, reps=3)
sampled = bench.run_characterization(g, x, model, "batch-wise", SamplingConfig("batch-wise", b), dev, reps=3)
for label, r in (("full graph", full), ("batch-wise", sampled)):
    parts = ", ".join(f"{c} {r.fractions[c]:.2f}" for c in bench.CATEGORIES)
    print(f"{label:>10}: {r.total_seconds:.3f} s  ({parts})")
print(f"batch-wise is {bench.compare_speedup(sampled, full):.0f}x slower than full-graph inference")
