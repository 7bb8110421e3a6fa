"""Whole-graph GCN forward inference.

Each layer aggregates neighbor rows through a CSR SpMM, applies the dense
weight transform and, for every layer except the last, a ReLU.
"""

from __future__ import annotations

import os
import struct
from contextlib import nullcontext
from dataclasses import dataclass

import numba
import numpy as np

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the bundled TBB is too old; pick OpenMP to avoid the fallback warning
    numba.config.THREADING_LAYER = "omp"

from .errors import ConfigError, FormatError, NumericError, ShapeError, TruncatedFileError
from .graph import CsrGraph

AGGREGATIONS = ("sum", "mean", "sym-norm")

MODEL_MAGIC = b"GCNBMODL"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<8sIIBB")
_LAYER_HEADER = struct.Struct("<QQB")
_AGG_CODES = {name: i for i, name in enumerate(AGGREGATIONS)}


def configure_threads():
    """Apply the GCNBENCH_THREADS cap to the row-parallel kernels."""
    cap = os.environ.get("GCNBENCH_THREADS")
    if cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))
    return numba.get_num_threads()


@dataclass(frozen=True, eq=False)
class LayerWeights:
    weight: np.ndarray
    bias: np.ndarray | None = None

    def __post_init__(self):
        w = np.ascontiguousarray(self.weight, dtype=np.float32)
        if w.ndim != 2:
            raise ShapeError(f"weight must be 2-D, got shape {w.shape}")
        if not np.isfinite(w).all():
            raise NumericError("weight contains non-finite values")
        object.__setattr__(self, "weight", w)
        if self.bias is not None:
            b = np.ascontiguousarray(self.bias, dtype=np.float32)
            if b.shape != (w.shape[1],):
                raise ShapeError(f"bias must have shape ({w.shape[1]},), got {b.shape}")
            object.__setattr__(self, "bias", b)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def nbytes(self) -> int:
        return self.weight.nbytes + (0 if self.bias is None else self.bias.nbytes)


@dataclass(frozen=True)
class GcnModel:
    layers: tuple[LayerWeights, ...]
    self_loops: bool = False
    aggregation: str = "sum"

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if not self.layers:
            raise ConfigError("model needs at least one layer")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        for i, (a, b) in enumerate(zip(self.layers, self.layers[1:])):
            if a.out_dim != b.in_dim:
                raise ShapeError(f"layer {i} out_dim {a.out_dim} != layer {i + 1} in_dim {b.in_dim}")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].in_dim] + [layer.out_dim for layer in self.layers]

    @property
    def nbytes(self) -> int:
        return sum(layer.nbytes for layer in self.layers)


def make_model(dims, seed=0, aggregation="sum", self_loops=False, bias=False) -> GcnModel:
    """Random model with weights uniform in +-1/sqrt(in_dim)."""
    dims = [int(d) for d in dims]
    if len(dims) < 2 or min(dims) < 1:
        raise ConfigError(f"need at least two positive dims, got {dims}")
    rng = np.random.default_rng(seed)
    layers = []
    for d_in, d_out in zip(dims, dims[1:]):
        bound = 1.0 / np.sqrt(d_in)
        w = rng.uniform(-bound, bound, size=(d_in, d_out)).astype(np.float32)
        b = rng.uniform(-bound, bound, size=d_out).astype(np.float32) if bias else None
        layers.append(LayerWeights(w, b))
    return GcnModel(tuple(layers), self_loops=self_loops, aggregation=aggregation)


def check_model_shapes(num_vertices: int, feature_dim: int, model: GcnModel) -> list[tuple[int, int]]:
    """Validate a configuration without allocating; returns per-layer output shapes."""
    if feature_dim != model.layers[0].in_dim:
        raise ShapeError(f"feature dim {feature_dim} != first layer in_dim {model.layers[0].in_dim}")
    return [(int(num_vertices), layer.out_dim) for layer in model.layers]


# -- kernels -----------------------------------------------------------------


@numba.njit(parallel=True, cache=True)
def _spmm_rows(offsets, cols, coeffs, use_coeffs, self_coeffs, use_self, rows, x, out):
    dim = x.shape[1]
    for i in numba.prange(rows.shape[0]):
        r = rows[i]
        acc = out[i]
        for k in range(dim):
            acc[k] = 0.0
        for e in range(offsets[r], offsets[r + 1]):
            u = cols[e]
            if use_coeffs:
                c = coeffs[e]
                for k in range(dim):
                    acc[k] += c * x[u, k]
            else:
                for k in range(dim):
                    acc[k] += x[u, k]
        if use_self:
            c = self_coeffs[r]
            for k in range(dim):
                acc[k] += c * x[r, k]


_EMPTY_F32 = np.zeros(0, dtype=np.float32)


class Workspace:
    """Reusable float32 buffers for layer intermediates.

    Arrays above the allocator's mmap threshold are page-faulted afresh on
    every allocation; reusing them across layers and repeated calls keeps
    that cost out of kernel timings. Not safe to share between threads.
    """

    def __init__(self):
        self._bufs = {}

    def get(self, key, shape) -> np.ndarray:
        k = (key, tuple(int(s) for s in shape))
        buf = self._bufs.get(k)
        if buf is None:
            buf = self._bufs[k] = np.empty(k[1], dtype=np.float32)
        return buf


def _check_out(out, shape):
    if out.shape != shape or out.dtype != np.float32 or not out.flags.c_contiguous:
        raise ShapeError(f"out must be a C-contiguous float32 array of shape {shape}")
    return out


def spmm(g: CsrGraph, x, coeffs=None, self_coeffs=None, rows=None, out=None) -> np.ndarray:
    """Sparse aggregation ``out[v] = sum_(v,u) coeff(v,u) * x[u]``.

    Each output row is accumulated sequentially in column order, so results
    are bit-reproducible regardless of thread count. ``rows`` restricts the
    computation to a subset of output rows (returned in that order);
    ``self_coeffs`` adds a per-vertex self term after the neighbor sum.
    ``out`` receives the result when given.
    """
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != g.num_vertices:
        raise ShapeError(f"x must have shape ({g.num_vertices}, dim), got {x.shape}")
    x = np.ascontiguousarray(x, dtype=np.float32)
    if coeffs is not None:
        coeffs = np.ascontiguousarray(coeffs, dtype=np.float32)
        if coeffs.shape != (g.num_edges,):
            raise ShapeError(f"coeffs must have length {g.num_edges}, got {coeffs.shape}")
    if self_coeffs is not None:
        self_coeffs = np.ascontiguousarray(self_coeffs, dtype=np.float32)
        if self_coeffs.shape != (g.num_vertices,):
            raise ShapeError(f"self_coeffs must have length {g.num_vertices}")
    if rows is None:
        rows = np.arange(g.num_vertices, dtype=np.int64)
    else:
        rows = np.ascontiguousarray(rows, dtype=np.int64)
    shape = (rows.shape[0], x.shape[1])
    out = np.empty(shape, dtype=np.float32) if out is None else _check_out(out, shape)
    if rows.shape[0] and x.shape[1]:
        _spmm_rows(
            g.row_offsets, g.col_indices,
            _EMPTY_F32 if coeffs is None else coeffs, coeffs is not None,
            _EMPTY_F32 if self_coeffs is None else self_coeffs, self_coeffs is not None,
            rows, x, out,
        )
    return out


def dense_mm(x, w: LayerWeights, out=None) -> np.ndarray:
    x = np.asarray(x, dtype=np.float32)
    if x.ndim != 2 or x.shape[1] != w.in_dim:
        raise ShapeError(f"x has shape {x.shape}, layer expects dim {w.in_dim}")
    if out is None:
        out = x @ w.weight
    else:
        np.matmul(x, w.weight, out=_check_out(out, (x.shape[0], w.out_dim)))
    if w.bias is not None:
        out += w.bias
    return out


def relu(x, out=None) -> np.ndarray:
    return np.maximum(x, np.float32(0), out=out)


def graph_degrees(g: CsrGraph, self_loops: bool = False) -> np.ndarray:
    deg = g.degrees
    return deg + 1 if self_loops else deg


def build_norm_coefficients(g: CsrGraph, mode: str, global_degrees=None) -> np.ndarray:
    """Per-edge aggregation scale for ``mode``.

    ``sum`` gives 1, ``mean`` gives 1/deg(v) and ``sym-norm`` gives
    1/sqrt(deg(v) deg(u)) for edge (v, u). Degrees come from
    ``global_degrees`` (indexed by this graph's vertex ids) when supplied,
    which is how subgraphs keep the parent graph's normalization. A zero
    degree yields a zero coefficient.
    """
    if mode not in AGGREGATIONS:
        raise ConfigError(f"unknown aggregation mode {mode!r}")
    if mode == "sum":
        return np.ones(g.num_edges, dtype=np.float32)
    if global_degrees is None:
        deg = g.degrees
    else:
        deg = np.asarray(global_degrees)
        if deg.shape[0] < g.num_vertices:
            raise ShapeError("global_degrees shorter than the vertex range")
    deg = deg.astype(np.float64)
    inv = np.zeros_like(deg)
    np.divide(1.0, deg, out=inv, where=deg > 0)
    src, dst = g.edges()
    if mode == "mean":
        c = inv[src]
    else:
        c = np.sqrt(inv[src] * inv[dst])
    return c.astype(np.float32)


def build_self_coefficients(degrees, mode: str) -> np.ndarray:
    """Scale of the implicit self-loop term; ``degrees`` already include it."""
    deg = np.asarray(degrees, dtype=np.float64)
    if mode == "sum":
        return np.ones(deg.shape[0], dtype=np.float32)
    inv = np.zeros_like(deg)
    np.divide(1.0, deg, out=inv, where=deg > 0)
    # sym-norm self term is 1/sqrt(d*d) == 1/d
    return inv.astype(np.float32)


def aggregation_inputs(g: CsrGraph, model: GcnModel, global_degrees=None):
    """Edge and self coefficients for ``model`` over ``g`` (``None`` means unit/absent)."""
    if global_degrees is None:
        global_degrees = graph_degrees(g, model.self_loops)
    coeffs = None
    if model.aggregation != "sum":
        coeffs = build_norm_coefficients(g, model.aggregation, global_degrees)
    self_coeffs = None
    if model.self_loops:
        self_coeffs = build_self_coefficients(global_degrees[: g.num_vertices], model.aggregation)
    return coeffs, self_coeffs


def _section(timer, name):
    return nullcontext() if timer is None else timer.section(name)


def apply_layer(g, h, layer, index, last, coeffs, self_coeffs, rows=None, timer=None, workspace=None):
    """One layer: aggregate, transform and (unless last) activate.

    With a ``workspace`` the aggregate and any non-final output live in
    reused buffers; the final layer's output is always freshly allocated.
    """
    n = g.num_vertices if rows is None else len(rows)
    agg_buf = out_buf = None
    if workspace is not None:
        agg_buf = workspace.get(("agg", index), (n, h.shape[1]))
        if not last:
            out_buf = workspace.get(("out", index), (n, layer.out_dim))
    with _section(timer, "SpMM"):
        agg = spmm(g, h, coeffs, self_coeffs, rows, out=agg_buf)
    with _section(timer, "DenseMM"):
        out = dense_mm(agg, layer, out=out_buf)
    if not last:
        with _section(timer, "Activation"):
            relu(out, out=out)
    if not np.isfinite(out).all():
        raise NumericError(f"non-finite values in output of layer {index}")
    return out


def full_graph_inference(g: CsrGraph, x, model: GcnModel, timer=None, workspace=None) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[0] != g.num_vertices:
        raise ShapeError(f"x must have {g.num_vertices} rows, got shape {x.shape}")
    check_model_shapes(g.num_vertices, x.shape[1], model)
    coeffs, self_coeffs = aggregation_inputs(g, model)
    h = np.ascontiguousarray(x, dtype=np.float32)
    last = model.num_layers - 1
    for i, layer in enumerate(model.layers):
        h = apply_layer(g, h, layer, i, i == last, coeffs, self_coeffs, timer=timer, workspace=workspace)
    return h


def save_model(model: GcnModel, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_MODEL_HEADER.pack(
            MODEL_MAGIC, MODEL_VERSION, model.num_layers,
            int(model.self_loops), _AGG_CODES[model.aggregation],
        ))
        for layer in model.layers:
            fh.write(_LAYER_HEADER.pack(layer.in_dim, layer.out_dim, layer.bias is not None))
            fh.write(layer.weight.astype("<f4").tobytes())
            if layer.bias is not None:
                fh.write(layer.bias.astype("<f4").tobytes())


def load_model(path) -> GcnModel:
    def read(fh, n):
        raw = fh.read(n)
        if len(raw) != n:
            raise TruncatedFileError(f"{path}: truncated model file")
        return raw

    with open(path, "rb") as fh:
        raw = fh.read(_MODEL_HEADER.size)
        if raw[: len(MODEL_MAGIC)] != MODEL_MAGIC:
            raise FormatError(f"{path}: not a gcnbench model file")
        if len(raw) < _MODEL_HEADER.size:
            raise TruncatedFileError(f"{path}: truncated model header")
        _, version, count, loops, agg = _MODEL_HEADER.unpack(raw)
        if version != MODEL_VERSION:
            raise FormatError(f"{path}: unsupported model version {version}")
        layers = []
        for _ in range(count):
            d_in, d_out, has_bias = _LAYER_HEADER.unpack(read(fh, _LAYER_HEADER.size))
            w = np.frombuffer(read(fh, 4 * d_in * d_out), dtype="<f4").reshape(d_in, d_out)
            b = np.frombuffer(read(fh, 4 * d_out), dtype="<f4") if has_bias else None
            layers.append(LayerWeights(w.copy(), None if b is None else b.copy()))
    return GcnModel(tuple(layers), self_loops=bool(loops), aggregation=AGGREGATIONS[agg])
