"""Analytical host/device footprint and data-movement model.

Byte counts are exact Python integers (petabyte-scale products do not fit in
32 bits); only transfer times are floats. Sampled modes count feature
upload and output download per batch; the CSR index upload is reported
separately and only enters the movement total for full-graph offload.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace
from fractions import Fraction

from .errors import CapacityError, ConfigError, InfeasibleError
from .graph import GraphStats, INDEX_DTYPE, OFFSET_DTYPE, compute_stats

MODES = ("full", "batch-wise", "layer-wise")


@dataclass(frozen=True)
class DeviceModel:
    memory_capacity: int
    link_bandwidth: float
    element_size: int = 4

    def __post_init__(self):
        if self.memory_capacity <= 0 or self.link_bandwidth <= 0 or self.element_size <= 0:
            raise ConfigError("device capacity, bandwidth and element size must be positive")


# 40 GB device behind a 32 GB/s PCIe 4.0 link (decimal units)
A100_40GB = DeviceModel(memory_capacity=40 * 10**9, link_bandwidth=32e9)

# ogbn-papers100M as listed in the dataset table
PAPERS_VERTICES = 111_059_956
PAPERS_EDGES = 1_615_685_872


@dataclass(frozen=True)
class WorkloadSpec:
    """A GCN workload described by graph size, depth and widths.

    ``avg_degree`` may be an int, float or Fraction. ``expanded_vertices``
    overrides the estimated per-batch expanded set (useful when it has been
    measured).
    """

    num_vertices: int
    avg_degree: float | Fraction
    layer_dims: tuple[int, ...]
    batch_size: int
    mode: str = "batch-wise"
    expanded_vertices: int | None = None
    bias: bool = False

    def __post_init__(self):
        object.__setattr__(self, "layer_dims", tuple(int(d) for d in self.layer_dims))
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if len(self.layer_dims) < 2:
            raise ConfigError("layer_dims needs input and output dims")
        if min(self.layer_dims) < 1:
            raise ConfigError(f"all dims must be >= 1, got {self.layer_dims}")
        if self.num_vertices < 1:
            raise ConfigError("num_vertices must be >= 1")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.avg_degree > 0:
            raise ConfigError("avg_degree must be positive")

    @classmethod
    def from_stats(cls, stats, layer_dims, batch_size=None, mode="full", **kw):
        if not isinstance(stats, GraphStats):
            stats = compute_stats(stats)
        b = stats.num_vertices if batch_size is None else batch_size
        degree = Fraction(stats.num_edges, stats.num_vertices) if stats.num_edges else Fraction(1, 10**9)
        return cls(stats.num_vertices, degree, layer_dims, b, mode, **kw)

    @property
    def num_layers(self) -> int:
        return len(self.layer_dims) - 1

    @property
    def d_in(self) -> int:
        return self.layer_dims[0]

    @property
    def d_out(self) -> int:
        return self.layer_dims[-1]

    @property
    def widest_layer(self) -> int:
        """Largest input+output width over the layers."""
        return max(a + b for a, b in zip(self.layer_dims, self.layer_dims[1:]))

    def with_batch_size(self, b: int) -> "WorkloadSpec":
        return replace(self, batch_size=int(b))


@dataclass(frozen=True)
class CostReport:
    mode: str
    expanded_vertices_per_batch: int
    uncapped_expansion: int
    num_batches: int
    bytes_per_batch: int
    total_movement: int
    peak_device_footprint: int
    est_transfer_seconds: float
    adjacency_bytes: int = 0
    layers: int = 1

    def to_dict(self) -> dict:
        d = asdict(self)
        d["human"] = {
            "bytes_per_batch": format_bytes(self.bytes_per_batch),
            "total_movement": format_bytes(self.total_movement),
            "peak_device_footprint": format_bytes(self.peak_device_footprint),
            "adjacency_bytes": format_bytes(self.adjacency_bytes),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CostReport":
        d = {k: v for k, v in d.items() if k != "human"}
        return cls(**d)


def format_bytes(n: int) -> str:
    """Decimal-unit rendering, e.g. ``3.07 PB``."""
    units = ["B", "KB", "MB", "GB", "TB", "PB", "EB"]
    value = float(n)
    for unit in units:
        if abs(value) < 1000 or unit == units[-1]:
            return f"{value:.3g} {unit}" if unit != "B" else f"{int(n)} B"
        value /= 1000
    raise AssertionError("unreachable")


def num_batches(num_vertices: int, batch_size: int) -> int:
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    return -(-int(num_vertices) // int(batch_size))


def transfer_seconds(nbytes: int, dev: DeviceModel) -> float:
    return nbytes / dev.link_bandwidth


def model_bytes(w: WorkloadSpec, element_size: int = 4) -> int:
    dims = w.layer_dims
    n = sum(a * b for a, b in zip(dims, dims[1:]))
    if w.bias:
        n += sum(dims[1:])
    return n * element_size


def adjacency_bytes(num_vertices: int, num_edges: int) -> int:
    return (num_vertices + 1) * OFFSET_DTYPE.itemsize + num_edges * INDEX_DTYPE.itemsize


def batch_bytes(expanded: int, targets: int, d_in: int, d_out: int, element_size: int = 4) -> int:
    """Feature upload plus output download for one mini-batch."""
    return (expanded * d_in + targets * d_out) * element_size


def _ceil(x: Fraction) -> int:
    return math.ceil(x)


def uncapped_batchwise_expansion(w: WorkloadSpec) -> int:
    return _ceil(w.batch_size * Fraction(w.avg_degree) ** w.num_layers)


def est_batchwise_expansion(w: WorkloadSpec) -> int:
    """Estimated D-hop set size of one batch, ``b * d^D`` capped at V."""
    if w.expanded_vertices is not None:
        return min(w.num_vertices, w.expanded_vertices)
    return min(w.num_vertices, uncapped_batchwise_expansion(w))


def est_layerwise_expansion(w: WorkloadSpec) -> int:
    if w.expanded_vertices is not None:
        return min(w.num_vertices, w.expanded_vertices)
    return min(w.num_vertices, _ceil(w.batch_size * Fraction(w.avg_degree)))


def _batchwise_footprint(w, element_size):
    return est_batchwise_expansion(w) * w.widest_layer * element_size + model_bytes(w, element_size)


def est_batchwise_movement(w: WorkloadSpec, dev: DeviceModel) -> CostReport:
    e = dev.element_size
    expansion = est_batchwise_expansion(w)
    batches = num_batches(w.num_vertices, w.batch_size)
    per_batch = batch_bytes(expansion, w.batch_size, w.d_in, w.d_out, e)
    total = per_batch * batches
    return CostReport(
        mode="batch-wise",
        expanded_vertices_per_batch=expansion,
        uncapped_expansion=uncapped_batchwise_expansion(w),
        num_batches=batches,
        bytes_per_batch=per_batch,
        total_movement=total,
        peak_device_footprint=_batchwise_footprint(w, e),
        est_transfer_seconds=transfer_seconds(total, dev),
        layers=w.num_layers,
    )


def est_layerwise_footprint(w: WorkloadSpec, dev: DeviceModel) -> int:
    """Device bytes for the widest layer's mini-batch plus the weights."""
    e = dev.element_size
    return est_layerwise_expansion(w) * w.widest_layer * e + model_bytes(w, e)


def est_layerwise_movement(w: WorkloadSpec, dev: DeviceModel) -> CostReport:
    e = dev.element_size
    expansion = est_layerwise_expansion(w)
    batches = num_batches(w.num_vertices, w.batch_size)
    dims = w.layer_dims
    per_layer = [batch_bytes(expansion, w.batch_size, a, b, e) for a, b in zip(dims, dims[1:])]
    total = sum(p * batches for p in per_layer)
    return CostReport(
        mode="layer-wise",
        expanded_vertices_per_batch=expansion,
        uncapped_expansion=_ceil(w.batch_size * Fraction(w.avg_degree)),
        num_batches=batches * w.num_layers,
        bytes_per_batch=max(per_layer),
        total_movement=total,
        peak_device_footprint=est_layerwise_footprint(w, dev),
        est_transfer_seconds=transfer_seconds(total, dev),
        layers=w.num_layers,
    )


def est_host_footprint(w: WorkloadSpec, mode: str | None = None, element_size: int = 4) -> int:
    """Host feature memory: the input matrix, plus one output matrix for layer-wise."""
    mode = mode or w.mode
    v = w.num_vertices
    if mode == "layer-wise":
        return v * w.widest_layer * element_size
    if mode in ("batch-wise", "full"):
        return v * w.d_in * element_size
    raise ConfigError(f"unknown mode {mode!r}")


def peak_footprint(w: WorkloadSpec, dev: DeviceModel, mode: str | None = None) -> int:
    mode = mode or w.mode
    if mode == "batch-wise":
        return _batchwise_footprint(w, dev.element_size)
    if mode == "layer-wise":
        return est_layerwise_footprint(w, dev)
    raise ConfigError(f"batch size is only defined for sampled modes, got {mode!r}")


def max_batch_size(w: WorkloadSpec, dev: DeviceModel, mode: str | None = None) -> int:
    """Largest batch whose modeled device footprint fits ``dev``.

    The expanded-set estimate is used even when ``w`` carries a measured
    override, since that value only holds for one batch size.
    """
    mode = mode or w.mode
    template = replace(w, expanded_vertices=None, mode=mode)

    def fits(b):
        return peak_footprint(template.with_batch_size(b), dev, mode) <= dev.memory_capacity

    if not fits(1):
        raise InfeasibleError(
            f"a single target vertex needs {format_bytes(peak_footprint(template.with_batch_size(1), dev, mode))}, "
            f"device holds {format_bytes(dev.memory_capacity)}"
        )
    lo, hi = 1, w.num_vertices
    while lo < hi:  # footprint is non-decreasing in b
        mid = (lo + hi + 1) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def est_fullgraph_offload(stats, layer_dims, dev: DeviceModel, bias: bool = False) -> CostReport:
    """Whole-graph offload: CSR arrays, input features and the result."""
    if not isinstance(stats, GraphStats):
        stats = compute_stats(stats)
    w = WorkloadSpec.from_stats(stats, layer_dims, mode="full", bias=bias)
    e = dev.element_size
    v = w.num_vertices
    adj = adjacency_bytes(v, stats.num_edges)
    movement = adj + v * w.d_in * e + v * w.d_out * e
    footprint = adj + v * w.widest_layer * e + model_bytes(w, e)
    if footprint > dev.memory_capacity:
        raise CapacityError(
            f"full graph needs {format_bytes(footprint)} on device "
            f"(capacity {format_bytes(dev.memory_capacity)}); use batch-wise or layer-wise sampling"
        )
    return CostReport(
        mode="full",
        expanded_vertices_per_batch=v,
        uncapped_expansion=v,
        num_batches=1,
        bytes_per_batch=movement,
        total_movement=movement,
        peak_device_footprint=footprint,
        est_transfer_seconds=transfer_seconds(movement, dev),
        adjacency_bytes=adj,
        layers=w.num_layers,
    )


def estimate(w: WorkloadSpec, dev: DeviceModel, num_edges: int | None = None) -> CostReport:
    """Dispatch on ``w.mode``."""
    if w.mode == "batch-wise":
        return est_batchwise_movement(w, dev)
    if w.mode == "layer-wise":
        return est_layerwise_movement(w, dev)
    if num_edges is None:
        num_edges = _ceil(w.num_vertices * Fraction(w.avg_degree))
    return est_fullgraph_offload((w.num_vertices, num_edges), w.layer_dims, dev, bias=w.bias)


def report_from_trace(records, dev: DeviceModel, layer_dims, batch_size: int) -> CostReport:
    """Cost report built from measured per-batch expansion counts."""
    records = list(records)
    if not records:
        raise ConfigError("empty trace")
    mode = records[0]["mode"]
    e = dev.element_size
    dims = tuple(layer_dims)
    per_batch = []
    for r in records:
        layer = r["layer"]
        if mode == "layer-wise":
            d_in, d_out = dims[layer], dims[layer + 1]
        else:
            d_in, d_out = dims[0], dims[-1]
        per_batch.append(batch_bytes(r["expanded"], r["targets"], d_in, d_out, e))
    total = sum(per_batch)
    widest = max(a + b for a, b in zip(dims, dims[1:]))
    weights = sum(a * b for a, b in zip(dims, dims[1:])) * e
    peak_expanded = max(r["expanded"] for r in records)
    return CostReport(
        mode=mode,
        expanded_vertices_per_batch=peak_expanded,
        uncapped_expansion=peak_expanded,
        num_batches=len(records),
        bytes_per_batch=max(per_batch),
        total_movement=total,
        peak_device_footprint=peak_expanded * widest * e + weights,
        est_transfer_seconds=transfer_seconds(total, dev),
        layers=len(dims) - 1,
    )


def papers_workload(mode: str = "batch-wise", dim: int = 256, **kw) -> WorkloadSpec:
    """The papers graph at a uniform embedding width.

    Batch-wise uses 64 targets and 30 edges per vertex; layer-wise uses 1M
    targets whose 1-hop sets reach about 15M vertices.
    """
    dims = (dim,) * 4
    if mode == "batch-wise":
        defaults = dict(avg_degree=30, batch_size=64)
    else:
        defaults = dict(avg_degree=Fraction(PAPERS_EDGES, PAPERS_VERTICES), batch_size=10**6,
                        expanded_vertices=15 * 10**6)
    defaults.update(kw)
    return WorkloadSpec(PAPERS_VERTICES, layer_dims=dims, mode=mode, **defaults)
