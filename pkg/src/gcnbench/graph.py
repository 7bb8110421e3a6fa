"""CSR graph representation, ingestion, synthetic generators and persistence.

Graphs are directed: an undirected input must list both directions. Edge
weights are not supported; aggregation scaling lives in the engine.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BoundsError,
    CapacityError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    ParseError,
    TruncatedFileError,
)

OFFSET_DTYPE = np.dtype("<i8")
INDEX_DTYPE = np.dtype("<i4")
FEATURE_DTYPE = np.dtype("<f4")

GRAPH_MAGIC = b"GCNBCSR\x00"
FEATURE_MAGIC = b"GCNBFEAT"
FORMAT_VERSION = 1
_GRAPH_HEADER = struct.Struct("<8sIQQ")
_FEATURE_HEADER = struct.Struct("<8sIQQ")

# R-MAT quadrant probabilities (a, b, c, d); the Graph500 defaults.
RMAT_PROBS = (0.57, 0.19, 0.19, 0.05)


@dataclass(frozen=True, eq=False)
class CsrGraph:
    num_vertices: int
    num_edges: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    def __post_init__(self):
        offsets = np.ascontiguousarray(self.row_offsets, dtype=OFFSET_DTYPE)
        cols = np.ascontiguousarray(self.col_indices, dtype=INDEX_DTYPE)
        offsets.flags.writeable = False
        cols.flags.writeable = False
        object.__setattr__(self, "row_offsets", offsets)
        object.__setattr__(self, "col_indices", cols)
        object.__setattr__(self, "num_vertices", int(self.num_vertices))
        object.__setattr__(self, "num_edges", int(self.num_edges))
        self.validate()

    def validate(self):
        """Raise if any CSR invariant is violated."""
        v, e = self.num_vertices, self.num_edges
        offsets, cols = self.row_offsets, self.col_indices
        if v < 0 or e < 0:
            raise ConfigError("negative vertex or edge count")
        if v > np.iinfo(INDEX_DTYPE).max:
            raise CapacityError(f"{v} vertices exceed 32-bit vertex ids")
        if offsets.shape != (v + 1,):
            raise ConfigError(f"row_offsets must have length {v + 1}, got {offsets.shape}")
        if cols.shape != (e,):
            raise ConfigError(f"col_indices must have length {e}, got {cols.shape}")
        if offsets[0] != 0 or offsets[-1] != e:
            raise ConfigError("row_offsets must start at 0 and end at num_edges")
        if np.any(np.diff(offsets) < 0):
            raise ConfigError("row_offsets must be non-decreasing")
        if e:
            if cols.min() < 0 or cols.max() >= v:
                raise BoundsError("column index outside [0, num_vertices)")
            step = np.diff(cols)
            # positions where consecutive entries belong to different rows
            boundary = offsets[1:-1]
            boundary = boundary[(boundary > 0) & (boundary < e)] - 1
            check = np.ones(e - 1, dtype=bool)
            check[boundary] = False
            if np.any(step[check] <= 0):
                raise ConfigError("columns within a row must be strictly increasing")

    @property
    def degrees(self) -> np.ndarray:
        """Out-degree per vertex."""
        return np.diff(self.row_offsets)

    def neighbors(self, v: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[v]:self.row_offsets[v + 1]]

    def edges(self) -> tuple[np.ndarray, np.ndarray]:
        src = np.repeat(np.arange(self.num_vertices, dtype=np.int64), self.degrees)
        return src, self.col_indices.astype(np.int64)

    def __eq__(self, other):
        if not isinstance(other, CsrGraph):
            return NotImplemented
        return (
            self.num_vertices == other.num_vertices
            and self.num_edges == other.num_edges
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
        )

    def __repr__(self):
        return f"CsrGraph(V={self.num_vertices}, E={self.num_edges})"


@dataclass(frozen=True)
class GraphStats:
    num_vertices: int
    num_edges: int
    density: float
    avg_degree: float
    max_degree: int

    def to_dict(self):
        return {
            "num_vertices": self.num_vertices,
            "num_edges": self.num_edges,
            "density": self.density,
            "avg_degree": self.avg_degree,
            "max_degree": self.max_degree,
        }


def from_edges(src, dst, num_vertices: int) -> CsrGraph:
    """Build a canonical CSR graph; duplicate edges collapse."""
    src = np.asarray(src, dtype=np.int64).ravel()
    dst = np.asarray(dst, dtype=np.int64).ravel()
    if src.shape != dst.shape:
        raise ConfigError("src and dst must have the same length")
    num_vertices = int(num_vertices)
    if src.size:
        lo = min(src.min(), dst.min())
        hi = max(src.max(), dst.max())
        if lo < 0:
            raise BoundsError("negative vertex id")
        if hi >= num_vertices:
            raise BoundsError(f"vertex id {hi} >= num_vertices {num_vertices}")
    keys = np.unique(src * num_vertices + dst)
    return _from_sorted_keys(keys, num_vertices)


def _from_sorted_keys(keys: np.ndarray, num_vertices: int) -> CsrGraph:
    if num_vertices == 0:
        return CsrGraph(0, 0, np.zeros(1, dtype=OFFSET_DTYPE), np.zeros(0, dtype=INDEX_DTYPE))
    src = keys // num_vertices
    dst = keys % num_vertices
    counts = np.bincount(src, minlength=num_vertices)
    offsets = np.zeros(num_vertices + 1, dtype=OFFSET_DTYPE)
    np.cumsum(counts, out=offsets[1:])
    return CsrGraph(num_vertices, keys.size, offsets, dst)


def load_edge_list(path, num_vertices: int | None = None) -> CsrGraph:
    """Read a whitespace-separated ``src dst`` edge list.

    Lines starting with ``#`` and blank lines are skipped. When
    ``num_vertices`` is omitted it is inferred as the largest id plus one.
    """
    src, dst = [], []
    with open(path, "r") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 2:
                raise ParseError(f"expected 2 fields, got {len(parts)}", lineno)
            try:
                a, b = int(parts[0]), int(parts[1])
            except ValueError:
                raise ParseError(f"non-integer vertex id in {text!r}", lineno) from None
            if a < 0 or b < 0:
                raise ParseError("negative vertex id", lineno)
            if num_vertices is not None and max(a, b) >= num_vertices:
                raise BoundsError(f"line {lineno}: vertex id {max(a, b)} >= num_vertices {num_vertices}")
            src.append(a)
            dst.append(b)
    if num_vertices is None:
        num_vertices = max(max(src, default=-1), max(dst, default=-1)) + 1
    return from_edges(src, dst, num_vertices)


def save_edge_list(g: CsrGraph, path) -> None:
    src, dst = g.edges()
    np.savetxt(path, np.column_stack([src, dst]), fmt="%d", header=f"V={g.num_vertices} E={g.num_edges}")


def compute_stats(g) -> GraphStats:
    """Table-style statistics. Also accepts a bare ``(V, E)`` pair."""
    if isinstance(g, CsrGraph):
        v, e = g.num_vertices, g.num_edges
        max_degree = int(g.degrees.max()) if v else 0
    else:
        v, e = (int(n) for n in g)
        max_degree = -1  # unknown without the adjacency
    if v == 0:
        raise DegenerateInputError("graph has no vertices")
    return GraphStats(v, e, e / (v * v), e / v, max_degree)


def gen_random_graph(model: str, num_vertices: int, num_edges: int, seed: int) -> CsrGraph:
    """Generate a directed graph with exactly ``num_edges`` distinct edges.

    ``model`` is ``"erdos-renyi"`` (uniform over all ordered pairs, self-loops
    included) or ``"rmat"`` (recursive quadrant sampling, heavy-tailed
    degrees). Output depends only on the arguments.
    """
    v, e = int(num_vertices), int(num_edges)
    if v < 0 or e < 0:
        raise ConfigError("vertex and edge counts must be non-negative")
    if e > v * v:
        raise CapacityError(f"{e} edges cannot fit in a {v}-vertex digraph (max {v * v})")
    rng = np.random.default_rng(seed)
    if model in ("erdos-renyi", "er"):
        keys = _er_keys(rng, v, e)
    elif model == "rmat":
        keys = _rmat_keys(rng, v, e)
    else:
        raise ConfigError(f"unknown graph model {model!r}")
    return _from_sorted_keys(np.sort(keys), v)


def _er_keys(rng, v, e):
    if e == 0:
        return np.zeros(0, dtype=np.int64)
    return rng.choice(v * v, size=e, replace=False, shuffle=False).astype(np.int64)


def _rmat_keys(rng, v, e, max_rounds=64):
    if e == 0:
        return np.zeros(0, dtype=np.int64)
    scale = max(1, math.ceil(math.log2(v)))
    cum = np.cumsum(RMAT_PROBS)
    keys = np.zeros(0, dtype=np.int64)
    for _ in range(max_rounds):
        need = e - keys.size
        if need <= 0:
            break
        n = int(need * 1.25) + 64
        src = np.zeros(n, dtype=np.int64)
        dst = np.zeros(n, dtype=np.int64)
        for bit in range(scale):
            q = np.searchsorted(cum, rng.random(n), side="right")
            src |= (q >> 1).astype(np.int64) << bit
            dst |= (q & 1).astype(np.int64) << bit
        ok = (src < v) & (dst < v)
        cand = np.concatenate([keys, src[ok] * v + dst[ok]])
        _, first = np.unique(cand, return_index=True)
        keys = cand[np.sort(first)][:e]
    if keys.size < e:
        # saturated quadrants: top up uniformly from the unused pairs
        free = np.setdiff1d(np.arange(v * v, dtype=np.int64), keys, assume_unique=True)
        keys = np.concatenate([keys, rng.choice(free, size=e - keys.size, replace=False)])
    return keys


def gen_features(num_rows: int, dim: int, seed: int) -> np.ndarray:
    """Seeded float32 feature matrix, uniform in [-1, 1)."""
    if dim < 1:
        raise DegenerateInputError("feature dim must be >= 1")
    if num_rows < 0:
        raise ConfigError("num_rows must be non-negative")
    rng = np.random.default_rng(seed)
    x = rng.random((num_rows, dim), dtype=np.float32)
    x *= 2
    x -= 1
    return x


def check_features(x, num_rows: int | None = None) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 2:
        raise ConfigError(f"feature matrix must be 2-D, got shape {x.shape}")
    if num_rows is not None and x.shape[0] != num_rows:
        raise ConfigError(f"expected {num_rows} feature rows, got {x.shape[0]}")
    if not np.isfinite(x).all():
        raise ConfigError("feature matrix contains non-finite values")
    return np.ascontiguousarray(x, dtype=np.float32)


def save_binary(g: CsrGraph, path) -> None:
    with open(path, "wb") as fh:
        fh.write(_GRAPH_HEADER.pack(GRAPH_MAGIC, FORMAT_VERSION, g.num_vertices, g.num_edges))
        fh.write(g.row_offsets.astype(OFFSET_DTYPE).tobytes())
        fh.write(g.col_indices.astype(INDEX_DTYPE).tobytes())


def _read_header(fh, header, magic, path):
    raw = fh.read(header.size)
    if len(raw) < len(magic) or raw[: len(magic)] != magic:
        raise FormatError(f"{path}: not a gcnbench file (bad magic)")
    if len(raw) < header.size:
        raise TruncatedFileError(f"{path}: truncated header")
    _, version, a, b = header.unpack(raw)
    if version != FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    return a, b


def _read_array(fh, dtype, count, path):
    nbytes = dtype.itemsize * count
    raw = fh.read(nbytes)
    if len(raw) != nbytes:
        raise TruncatedFileError(f"{path}: truncated payload ({len(raw)} of {nbytes} bytes)")
    return np.frombuffer(raw, dtype=dtype).copy()


def load_binary(path) -> CsrGraph:
    with open(path, "rb") as fh:
        v, e = _read_header(fh, _GRAPH_HEADER, GRAPH_MAGIC, path)
        offsets = _read_array(fh, OFFSET_DTYPE, v + 1, path)
        cols = _read_array(fh, INDEX_DTYPE, e, path)
    return CsrGraph(v, e, offsets, cols)


def save_features(x: np.ndarray, path) -> None:
    x = np.ascontiguousarray(x, dtype=FEATURE_DTYPE)
    with open(path, "wb") as fh:
        fh.write(_FEATURE_HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION, x.shape[0], x.shape[1]))
        fh.write(x.tobytes())


def load_features(path) -> np.ndarray:
    with open(path, "rb") as fh:
        rows, dim = _read_header(fh, _FEATURE_HEADER, FEATURE_MAGIC, path)
        values = _read_array(fh, FEATURE_DTYPE, rows * dim, path)
    return values.reshape(rows, dim).astype(np.float32)


def load_graph(path) -> CsrGraph:
    """Load either format, sniffing the binary magic."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(len(GRAPH_MAGIC))
    if head == GRAPH_MAGIC:
        return load_binary(path)
    return load_edge_list(path)
