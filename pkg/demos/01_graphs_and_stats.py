"""Build graphs, look at their statistics and persist them.

Run: python3 demos/01_graphs_and_stats.py
"""

import tempfile
from pathlib import Path

from gcnbench import graph

# Dataset-table sizes can be summarized without materializing the graph.
for name, v, e in [("ddi", 4_267, 1_334_889), ("products", 2_449_029, 61_859_140),
                   ("papers", 111_059_956, 1_615_685_872)]:
    s = graph.compute_stats((v, e))
    print(f"{name:>9}: V={v:>11,} E={e:>13,} density={s.density:.3g} avg_degree={s.avg_degree:.1f}")

# Desk-scale stand-ins: uniform and skewed.
er = graph.gen_random_graph("erdos-renyi", 2**14, 2**17, seed=1)
rmat = graph.gen_random_graph("rmat", 2**14, 2**17, seed=1)
for label, g in (("erdos-renyi", er), ("rmat", rmat)):
    s = graph.compute_stats(g)
    print(f"{label:>11}: avg degree {s.avg_degree:.1f}, max degree {s.max_degree}")

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "rmat.csr"
    graph.save_binary(rmat, path)
    assert graph.load_binary(path) == rmat
    print(f"binary round trip ok, {path.stat().st_size:,} bytes on disk")
