"""Exact full-neighborhood mini-batching.

Two schedules are provided. Batch-wise planning expands each batch of
target vertices by D hops and runs every layer on the resulting subgraph.
Layer-wise planning expands by one hop only and runs one layer at a time,
storing the full intermediate feature matrix between layers. Both reproduce
full-graph inference because subgraph coefficients are built from the
parent graph's degrees.
"""

from __future__ import annotations

from contextlib import nullcontext
from dataclasses import dataclass, field

import numpy as np

from .engine import (
    GcnModel,
    aggregation_inputs,
    apply_layer,
    check_model_shapes,
    graph_degrees,
)
from .errors import BoundsError, ConfigError, InvariantError, ShapeError
from .graph import FEATURE_DTYPE, INDEX_DTYPE, OFFSET_DTYPE, CsrGraph

MODES = ("batch-wise", "layer-wise")
ELEMENT_SIZE = FEATURE_DTYPE.itemsize


@dataclass(frozen=True)
class SamplingConfig:
    mode: str
    batch_size: int

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"sampling mode must be one of {MODES}, got {self.mode!r}")
        if int(self.batch_size) < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")

    def num_batches(self, num_vertices: int) -> int:
        return num_batches(num_vertices, self.batch_size)


def num_batches(num_vertices: int, batch_size: int) -> int:
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    return -(-int(num_vertices) // int(batch_size))


def batch_starts(num_vertices: int, batch_size: int) -> range:
    """Start ids of the contiguous ascending-id partition."""
    num_batches(num_vertices, batch_size)
    return range(0, int(num_vertices), int(batch_size))


@dataclass
class MiniBatchPlan:
    """One mini-batch: targets, nested vertex sets and the relabeled subgraph.

    ``vertex_sets[k]`` holds the global ids within k hops of the targets
    (batch-wise: k = 0..D, layer-wise: k = 0..1), ascending. Local id i
    corresponds to global id ``expanded[i]``. The subgraph has a row for
    every expanded vertex but edges only on rows that aggregate.
    """

    mode: str
    batch_index: int
    layer: int | None
    vertex_sets: list[np.ndarray]
    subgraph: CsrGraph
    coeffs: np.ndarray | None
    self_coeffs: np.ndarray | None
    local_sets: list[np.ndarray] = field(repr=False)

    @property
    def targets(self) -> np.ndarray:
        return self.vertex_sets[0]

    @property
    def expanded(self) -> np.ndarray:
        return self.vertex_sets[-1]

    def to_local(self, global_ids) -> np.ndarray:
        global_ids = np.asarray(global_ids, dtype=np.int64)
        local = np.searchsorted(self.expanded, global_ids)
        if np.any(local >= self.expanded.size) or np.any(self.expanded[np.minimum(local, self.expanded.size - 1)] != global_ids):
            raise BoundsError("vertex not part of this plan")
        return local

    def trace_record(self, d_in: int, d_out: int) -> dict:
        return {
            "mode": self.mode,
            "layer": self.layer,
            "batch_index": self.batch_index,
            "targets": int(self.targets.size),
            "expanded": int(self.expanded.size),
            "subgraph_edges": int(self.subgraph.num_edges),
            "bytes_in": int(self.expanded.size) * d_in * ELEMENT_SIZE,
            "bytes_out": int(self.targets.size) * d_out * ELEMENT_SIZE,
        }


@dataclass(frozen=True)
class LayerCheckpoint:
    layer_index: int
    features: np.ndarray


def _gather(g: CsrGraph, rows: np.ndarray):
    """Concatenated neighbor lists of ``rows`` plus per-row counts."""
    starts = g.row_offsets[rows]
    counts = g.row_offsets[rows + 1] - starts
    total = int(counts.sum())
    if total == 0:
        return np.zeros(0, dtype=np.int64), counts
    # index of every edge: start of its row + position within the row
    row_base = np.repeat(starts - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    idx = row_base + np.arange(total, dtype=np.int64)
    return g.col_indices[idx].astype(np.int64), counts


def _check_seeds(g: CsrGraph, seeds) -> np.ndarray:
    seeds = np.unique(np.asarray(seeds, dtype=np.int64))
    if seeds.size and (seeds[0] < 0 or seeds[-1] >= g.num_vertices):
        raise BoundsError(f"seed outside [0, {g.num_vertices})")
    return seeds


def expand_layers(g: CsrGraph, seeds, hops: int) -> list[np.ndarray]:
    """Vertex sets reachable within 0..hops out-edges, each ascending."""
    if hops < 0:
        raise ConfigError("hops must be >= 0")
    current = _check_seeds(g, seeds)
    sets = [current]
    visited = np.zeros(g.num_vertices, dtype=bool)
    visited[current] = True
    frontier = current
    for _ in range(hops):
        if frontier.size and current.size < g.num_vertices:
            nbrs, _ = _gather(g, frontier)
            fresh = np.unique(nbrs[~visited[nbrs]])
            visited[fresh] = True
            frontier = fresh
            current = np.union1d(current, fresh) if fresh.size else current
        sets.append(current)
    return sets


def expand_neighborhood(g: CsrGraph, seeds, hops: int) -> np.ndarray:
    return expand_layers(g, seeds, hops)[-1]


def _induced(g: CsrGraph, expanded: np.ndarray, agg_local: np.ndarray) -> CsrGraph:
    """Relabeled subgraph over ``expanded`` keeping the rows in ``agg_local``."""
    nbrs, counts = _gather(g, expanded[agg_local])
    local_cols = np.searchsorted(expanded, nbrs)
    if local_cols.size and np.any(expanded[np.minimum(local_cols, expanded.size - 1)] != nbrs):
        raise InvariantError("neighbor outside the expanded set")
    row_counts = np.zeros(expanded.size, dtype=np.int64)
    row_counts[agg_local] = counts
    offsets = np.zeros(expanded.size + 1, dtype=OFFSET_DTYPE)
    np.cumsum(row_counts, out=offsets[1:])
    return CsrGraph(expanded.size, local_cols.size, offsets, local_cols.astype(INDEX_DTYPE))


def _make_plan(g, model, degrees, sets, mode, batch_index, layer):
    expanded = sets[-1]
    local_sets = [np.searchsorted(expanded, s) for s in sets]
    sub = _induced(g, expanded, local_sets[-2] if len(sets) > 1 else local_sets[0])
    coeffs, self_coeffs = aggregation_inputs(sub, model, degrees[expanded])
    return MiniBatchPlan(mode, batch_index, layer, sets, sub, coeffs, self_coeffs, local_sets)


def _check_cfg(cfg: SamplingConfig, mode: str):
    if cfg.mode != mode:
        raise ConfigError(f"expected a {mode} config, got {cfg.mode}")


def plan_batchwise(g: CsrGraph, cfg: SamplingConfig, model: GcnModel):
    """Lazily yield one D-hop plan per contiguous batch of targets."""
    _check_cfg(cfg, "batch-wise")
    degrees = graph_degrees(g, model.self_loops)
    depth = model.num_layers
    for i, start in enumerate(batch_starts(g.num_vertices, cfg.batch_size)):
        targets = np.arange(start, min(start + cfg.batch_size, g.num_vertices), dtype=np.int64)
        sets = expand_layers(g, targets, depth)
        yield _make_plan(g, model, degrees, sets, "batch-wise", i, None)


def plan_layerwise(g: CsrGraph, cfg: SamplingConfig, model: GcnModel, layer_index: int = 0):
    """Lazily yield one 1-hop plan per batch for a single layer."""
    _check_cfg(cfg, "layer-wise")
    degrees = graph_degrees(g, model.self_loops)
    for i, start in enumerate(batch_starts(g.num_vertices, cfg.batch_size)):
        targets = np.arange(start, min(start + cfg.batch_size, g.num_vertices), dtype=np.int64)
        sets = expand_layers(g, targets, 1)
        yield _make_plan(g, model, degrees, sets, "layer-wise", i, layer_index)


def _section(timer, name):
    return nullcontext() if timer is None else timer.section(name)


def _prepare(g, x, model):
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != g.num_vertices:
        raise ShapeError(f"x must have {g.num_vertices} rows, got shape {x.shape}")
    check_model_shapes(g.num_vertices, x.shape[1], model)
    return np.ascontiguousarray(x, dtype=np.float32)


def run_batch(plan: MiniBatchPlan, x_local: np.ndarray, model: GcnModel, timer=None) -> np.ndarray:
    """All layers of one batch-wise plan; returns rows for the plan's targets.

    Layer l computes the vertices within D-1-l hops of the targets from
    features valid on the (D-l)-hop set, so the working matrix shrinks in
    validity each layer while keeping the local numbering.
    """
    depth = model.num_layers
    h = x_local
    for i, layer in enumerate(model.layers):
        rows = plan.local_sets[depth - 1 - i]
        last = i == depth - 1
        out = apply_layer(plan.subgraph, h, layer, i, last, plan.coeffs, plan.self_coeffs, rows, timer)
        if last:
            return out
        # rows outside `rows` are never read by the next layer
        h = np.zeros((plan.subgraph.num_vertices, layer.out_dim), dtype=np.float32)
        h[rows] = out
    raise InvariantError("model has no layers")


def run_batchwise(g, x, model, cfg, timer=None, trace=None, order=None) -> np.ndarray:
    """Batch-wise inference; output equals :func:`full_graph_inference`.

    ``order`` optionally permutes batch processing (results are independent
    of it). ``trace`` receives one record per batch.
    """
    x = _prepare(g, x, model)
    out = np.empty((g.num_vertices, model.dims[-1]), dtype=np.float32)
    plans = _timed_plans(plan_batchwise(g, cfg, model), timer)
    if order is not None:
        plans = list(plans)
        plans = [plans[i] for i in order]
    for plan in plans:
        with _section(timer, "Sampling"):
            x_local = x[plan.expanded]
        result = run_batch(plan, x_local, model, timer)
        out[plan.targets] = result
        if trace is not None:
            trace.append(plan.trace_record(model.dims[0], model.dims[-1]))
    return out


def _timed_plans(plans, timer):
    it = iter(plans)
    while True:
        with _section(timer, "Sampling"):
            plan = next(it, None)
        if plan is None:
            return
        yield plan


def run_layerwise(g, x, model, cfg, timer=None, trace=None, checkpoints=None) -> np.ndarray:
    """Layer-wise inference with a full-graph checkpoint after every layer."""
    x = _prepare(g, x, model)
    h = x
    last = model.num_layers - 1
    for i, layer in enumerate(model.layers):
        nxt = np.empty((g.num_vertices, layer.out_dim), dtype=np.float32)
        for plan in _timed_plans(plan_layerwise(g, cfg, model, i), timer):
            with _section(timer, "Sampling"):
                h_local = h[plan.expanded]
            rows = plan.local_sets[0]
            nxt[plan.targets] = apply_layer(
                plan.subgraph, h_local, layer, i, i == last, plan.coeffs, plan.self_coeffs, rows, timer
            )
            if trace is not None:
                trace.append(plan.trace_record(layer.in_dim, layer.out_dim))
        if nxt.shape != (g.num_vertices, layer.out_dim):
            raise InvariantError(f"checkpoint {i} has shape {nxt.shape}")
        h = nxt
        if checkpoints is not None:
            checkpoints.append(LayerCheckpoint(i, h))
    return h


def expansion_profile(g: CsrGraph, cfg: SamplingConfig, hops: int) -> list[int]:
    """Measured expanded-set size per batch, without building subgraphs."""
    sizes = []
    for start in batch_starts(g.num_vertices, cfg.batch_size):
        targets = np.arange(start, min(start + cfg.batch_size, g.num_vertices))
        sizes.append(int(expand_neighborhood(g, targets, hops).size))
    return sizes

