"""Shared fixtures and brute-force oracles.

Oracles here use dense float64 matrices and plain Python loops so they
share no code path with the CSR kernels they check.
"""

from collections import deque

import numpy as np
import pytest

from gcnbench import graph


def dense_adjacency(g):
    a = np.zeros((g.num_vertices, g.num_vertices))
    for v in range(g.num_vertices):
        for e in range(g.row_offsets[v], g.row_offsets[v + 1]):
            a[v, g.col_indices[e]] += 1.0
    return a


def dense_operator(g, aggregation="sum", self_loops=False):
    """Dense aggregation matrix matching the engine's conventions."""
    a = dense_adjacency(g)
    if self_loops:
        a = a + np.eye(g.num_vertices)
    deg = a.sum(axis=1)
    inv = np.divide(1.0, deg, out=np.zeros_like(deg), where=deg > 0)
    if aggregation == "sum":
        return a
    if aggregation == "mean":
        return inv[:, None] * a
    s = np.sqrt(inv)
    return s[:, None] * a * s[None, :]


def dense_forward(g, x, model):
    op = dense_operator(g, model.aggregation, model.self_loops)
    h = np.asarray(x, dtype=np.float64)
    for i, layer in enumerate(model.layers):
        h = op @ h @ layer.weight.astype(np.float64)
        if layer.bias is not None:
            h = h + layer.bias
        if i < model.num_layers - 1:
            h = np.maximum(h, 0)
    return h


def naive_matmul(x, w):
    n, k = len(x), len(w)
    m = len(w[0]) if k else 0
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            s = 0.0
            for t in range(k):
                s += float(x[i][t]) * float(w[t][j])
            out[i][j] = s
    return np.array(out).reshape(n, m)


def bfs_within(g, seeds, hops):
    dist = {int(s): 0 for s in seeds}
    queue = deque(dist)
    while queue:
        v = queue.popleft()
        if dist[v] == hops:
            continue
        for u in g.neighbors(v):
            u = int(u)
            if u not in dist:
                dist[u] = dist[v] + 1
                queue.append(u)
    return sorted(dist)


def random_graph(rng, v, avg_degree):
    e = int(min(v * v, round(v * avg_degree)))
    return graph.gen_random_graph("erdos-renyi", v, e, int(rng.integers(1 << 30)))


@pytest.fixture
def rng():
    return np.random.default_rng(20221)


@pytest.fixture
def triangle():
    return graph.from_edges([0, 1, 2], [1, 2, 0], 3)


# -- acceptance summary -------------------------------------------------------

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict = {}


class criterion:
    """Record one acceptance criterion's outcome, including assertion failures."""

    def __init__(self, number, title):
        self.number, self.title = number, title
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        ok = exc_type is None
        detail = self.detail if ok else f"{self.detail} {exc}".strip()
        ACCEPTANCE[self.number] = (ok, self.title, detail)
        return False


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        line = f"criterion {n} {'PASS' if ok else 'FAIL'}: {title}"
        if detail:
            line += f" ({detail.splitlines()[0]})"
        terminalreporter.write_line(line)
