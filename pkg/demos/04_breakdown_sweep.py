"""Execution-time breakdown across hidden widths.

SpMM, DenseMM and Sampling are measured; Glue is what is left of the wall
time; Offload is modeled from the bytes a 32 GB/s link would carry.

Run: python3 demos/04_breakdown_sweep.py
"""

from gcnbench import bench, graph
from gcnbench.cost import A100_40GB

g = graph.gen_random_graph("erdos-renyi", 50_000, 2_000_000, seed=11)
x = graph.gen_features(g.num_vertices, 8, seed=11)
template = bench.ModelTemplate(8, 8, 2, aggregation="sym-norm", self_loops=True)

res = bench.run_sweep(g, x, template, [8, 16, 32, 64, 128, 256], dev=A100_40GB, reps=5)
print(f"{'width':>5} " + " ".join(f"{c:>9}" for c in bench.CATEGORIES) + "   total")
for e in res.entries:
    fr = e.report.fractions
    print(f"{e.dim:>5} " + " ".join(f"{fr[c]:>9.3f}" for c in bench.CATEGORIES)
          + f"   {e.report.total_seconds * 1e3:.0f} ms")
