"""Timed characterization runs, embedding-dimension sweeps and reports.

Wall time is split into SpMM, DenseMM and Sampling sections; Glue is the
remainder of the wall time (activation, allocation, bookkeeping). Offload
is never measured: it is the cost model's transfer time for the bytes the
run would move, and reports flag it as modeled.
"""

from __future__ import annotations

import csv
import gc
import hashlib
import json
import statistics
import time
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cost as costmod
from .engine import Workspace, configure_threads, full_graph_inference, make_model, spmm
from .errors import CapacityError, ComparisonError, ConfigError
from .graph import CsrGraph, compute_stats, from_edges
from .sampler import SamplingConfig, run_batchwise, run_layerwise

CATEGORIES = ("SpMM", "DenseMM", "Glue", "Offload", "Sampling")
MEASURED = ("SpMM", "DenseMM", "Sampling")
MODES = ("full", "batch-wise", "layer-wise")

# timing-dependent keys, excluded when comparing reports for work determinism
TIMING_KEY = "timing"


class CategoryTimer:
    """Accumulates monotonic nanoseconds per named section."""

    def __init__(self):
        self.ns = defaultdict(int)

    @contextmanager
    def section(self, name):
        t0 = time.perf_counter_ns()
        try:
            yield
        finally:
            self.ns[name] += time.perf_counter_ns() - t0

    def seconds(self, name) -> float:
        return self.ns.get(name, 0) / 1e9


@dataclass
class BreakdownReport:
    seconds: dict
    fractions: dict
    total_seconds: float
    workload: dict
    output_digest: str
    offload_modeled: bool = False
    cost: costmod.CostReport | None = None
    rep_totals: list = field(default_factory=list)
    activation_seconds: float = 0.0
    warnings: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "kind": "breakdown",
            "workload": self.workload,
            "output_digest": self.output_digest,
            "offload_modeled": self.offload_modeled,
            "cost": None if self.cost is None else self.cost.to_dict(),
            TIMING_KEY: {
                "seconds": self.seconds,
                "fractions": self.fractions,
                "total_seconds": self.total_seconds,
                "rep_totals": self.rep_totals,
                "activation_seconds": self.activation_seconds,
                "warnings": self.warnings,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BreakdownReport":
        t = d[TIMING_KEY]
        return cls(
            seconds=t["seconds"],
            fractions=t["fractions"],
            total_seconds=t["total_seconds"],
            workload=d["workload"],
            output_digest=d["output_digest"],
            offload_modeled=d["offload_modeled"],
            cost=None if d["cost"] is None else costmod.CostReport.from_dict(d["cost"]),
            rep_totals=t["rep_totals"],
            activation_seconds=t["activation_seconds"],
            warnings=t["warnings"],
        )


@dataclass
class SweepEntry:
    dim: int
    report: BreakdownReport | None
    cost: costmod.CostReport | None
    infeasible: str | None = None

    def to_dict(self):
        return {
            "dim": self.dim,
            "infeasible": self.infeasible,
            "cost": None if self.cost is None else self.cost.to_dict(),
            "report": None if self.report is None else self.report.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            dim=d["dim"],
            report=None if d["report"] is None else BreakdownReport.from_dict(d["report"]),
            cost=None if d["cost"] is None else costmod.CostReport.from_dict(d["cost"]),
            infeasible=d["infeasible"],
        )


@dataclass
class SweepResult:
    entries: list

    def __post_init__(self):
        dims = [e.dim for e in self.entries]
        if any(b <= a for a, b in zip(dims, dims[1:])):
            raise ConfigError(f"sweep dims must be strictly increasing, got {dims}")

    @property
    def dims(self):
        return [e.dim for e in self.entries]

    def to_dict(self):
        return {"kind": "sweep", "entries": [e.to_dict() for e in self.entries]}

    @classmethod
    def from_dict(cls, d):
        return cls([SweepEntry.from_dict(e) for e in d["entries"]])


@dataclass(frozen=True)
class ModelTemplate:
    """Fixed input/output widths with a variable hidden width."""

    in_dim: int
    out_dim: int
    num_layers: int = 2
    aggregation: str = "sum"
    self_loops: bool = False
    bias: bool = False

    def dims(self, hidden: int) -> list[int]:
        if self.num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        return [self.in_dim] + [hidden] * (self.num_layers - 1) + [self.out_dim]

    def build(self, hidden: int, seed: int):
        return make_model(self.dims(hidden), seed=seed, aggregation=self.aggregation,
                          self_loops=self.self_loops, bias=self.bias)


def digest(x: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(x).tobytes()).hexdigest()


_warm = False


def warmup():
    """Compile the SpMM kernel outside any timed region."""
    global _warm
    if not _warm:
        g = from_edges([0, 1], [1, 0], 2)
        spmm(g, np.ones((2, 1), dtype=np.float32), np.ones(2, dtype=np.float32), np.ones(2, dtype=np.float32))
        _warm = True


def normalize_mode(mode: str) -> str:
    aliases = {"batchwise": "batch-wise", "layerwise": "layer-wise", "full-graph": "full"}
    mode = aliases.get(mode, mode)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    return mode


def _run_once(g, x, model, mode, cfg, timer, trace, workspace=None):
    if mode == "full":
        return full_graph_inference(g, x, model, timer=timer, workspace=workspace)
    if mode == "batch-wise":
        return run_batchwise(g, x, model, cfg, timer=timer, trace=trace)
    return run_layerwise(g, x, model, cfg, timer=timer, trace=trace)


class _Characterization:
    """State of one characterization whose repetitions may be interleaved with others."""

    def __init__(self, g, x, model, mode, cfg, dev, seed):
        mode = normalize_mode(mode)
        if mode != "full":
            if cfg is None:
                raise ConfigError(f"{mode} needs a SamplingConfig")
            if cfg.mode != mode:
                raise ConfigError(f"config mode {cfg.mode} does not match {mode}")
        self.g, self.x, self.model, self.mode, self.cfg, self.dev, self.seed = g, x, model, mode, cfg, dev, seed
        self.stats = compute_stats(g)
        self.cost = None
        if mode == "full" and dev is not None:
            bias = model.layers[0].bias is not None
            self.cost = costmod.est_fullgraph_offload(self.stats, model.dims, dev, bias=bias)
        self.workspace = Workspace()
        self.runs = []
        self.records = []
        self.out_digest = None

    def measure_once(self):
        timer = CategoryTimer()
        rep_trace = [] if not self.runs else None
        # collector pauses land on whichever section is running, so keep them out of reps
        gc.collect()
        was_enabled = gc.isenabled()
        gc.disable()
        try:
            t0 = time.perf_counter_ns()
            out = _run_once(self.g, self.x, self.model, self.mode, self.cfg, timer, rep_trace, self.workspace)
            wall = (time.perf_counter_ns() - t0) / 1e9
        finally:
            if was_enabled:
                gc.enable()
        d = digest(out)
        if self.out_digest is None:
            self.out_digest, self.records = d, rep_trace
        elif d != self.out_digest:
            raise AssertionError("inference output differs between repetitions")
        self.runs.append((wall, timer))

    def report(self, threads) -> BreakdownReport:
        dims = self.model.dims
        cost = self.cost
        if self.mode != "full" and self.dev is not None:
            cost = costmod.report_from_trace(self.records, self.dev, dims, self.cfg.batch_size)
        offload = cost.est_transfer_seconds if cost is not None else 0.0
        # per-category median over repetitions; Glue is each rep's unmeasured remainder
        per_rep = []
        for wall, timer in self.runs:
            measured = {c: timer.seconds(c) for c in MEASURED}
            measured["Glue"] = max(0.0, wall - sum(measured.values()))
            measured["Activation"] = timer.seconds("Activation")
            per_rep.append(measured)
        seconds = {c: 0.0 for c in CATEGORIES}
        for c in ("SpMM", "DenseMM", "Glue", "Sampling"):
            seconds[c] = statistics.median(r[c] for r in per_rep)
        seconds["Offload"] = offload
        total = sum(seconds.values())
        warnings = []
        if statistics.median(w for w, _ in self.runs) < 1e-6:
            warnings.append("total below 1 us; timer precision insufficient")
        fractions = {c: (seconds[c] / total if total > 0 else 0.0) for c in CATEGORIES}
        if total <= 0:
            fractions["Glue"] = 1.0
        dev, cfg = self.dev, self.cfg
        workload = {
            "graph": self.stats.to_dict(),
            "layer_dims": list(dims),
            "aggregation": self.model.aggregation,
            "self_loops": self.model.self_loops,
            "mode": self.mode,
            "batch_size": None if cfg is None else cfg.batch_size,
            "seed": self.seed,
            "reps": len(self.runs),
            "threads": threads,
            "device": None if dev is None else {
                "memory_capacity": dev.memory_capacity,
                "link_bandwidth": dev.link_bandwidth,
                "element_size": dev.element_size,
            },
        }
        return BreakdownReport(
            seconds=seconds,
            fractions=fractions,
            total_seconds=total,
            workload=workload,
            output_digest=self.out_digest,
            offload_modeled=dev is not None,
            cost=cost,
            rep_totals=[w for w, _ in self.runs],
            activation_seconds=statistics.median(r["Activation"] for r in per_rep),
            warnings=warnings,
        )


def run_characterization(g: CsrGraph, x, model, mode="full", cfg: SamplingConfig | None = None,
                         dev: costmod.DeviceModel | None = None, reps: int = 5,
                         seed: int | None = None, trace: list | None = None) -> BreakdownReport:
    """Run one pipeline ``reps`` times and report per-category medians.

    Offload is the modeled transfer time when ``dev`` is given, else 0. For
    the full-graph pipeline a graph that does not fit ``dev`` raises
    :class:`CapacityError` before any work is done.
    """
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    run = _Characterization(g, x, model, mode, cfg, dev, seed)
    threads = configure_threads()
    warmup()
    for _ in range(reps):
        run.measure_once()
    if trace is not None and run.records:
        trace.extend(run.records)
    return run.report(threads)


def run_sweep(g: CsrGraph, x, template: ModelTemplate, dims, mode="full",
              cfg: SamplingConfig | None = None, dev: costmod.DeviceModel | None = None,
              reps: int = 5, seed: int = 0) -> SweepResult:
    """One characterization per hidden width; infeasible widths are recorded, not raised.

    Repetitions are interleaved round-robin across widths so that slow
    phases of the machine are spread over every sweep point.
    """
    mode = normalize_mode(mode)
    dims = [int(d) for d in dims]
    if not dims:
        raise ConfigError("sweep needs at least one dim")
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ConfigError(f"sweep dims must be strictly increasing, got {dims}")
    if reps < 1:
        raise ConfigError("reps must be >= 1")
    if np.asarray(x).shape[1] != template.in_dim:
        raise ConfigError("feature width must equal the template input dim")
    stats = compute_stats(g)
    slots = []
    for hidden in dims:
        layer_dims = template.dims(hidden)
        entry_cfg = cfg
        try:
            est = None
            if mode == "full":
                if dev is not None:
                    est = costmod.est_fullgraph_offload(stats, layer_dims, dev, bias=template.bias)
            else:
                if entry_cfg is None:
                    if dev is None:
                        raise ConfigError("sampled sweep needs a batch size or a device to solve one")
                    w = costmod.WorkloadSpec.from_stats(stats, layer_dims, 1, mode, bias=template.bias)
                    entry_cfg = SamplingConfig(mode, costmod.max_batch_size(w, dev))
                w = costmod.WorkloadSpec.from_stats(stats, layer_dims, entry_cfg.batch_size, mode,
                                                    bias=template.bias)
                if dev is not None:
                    need = costmod.peak_footprint(w, dev)
                    if need > dev.memory_capacity:
                        raise CapacityError(
                            f"batch of {entry_cfg.batch_size} needs {costmod.format_bytes(need)} on device"
                        )
                    est = costmod.estimate(w, dev)
        except CapacityError as exc:
            slots.append((hidden, None, None, str(exc)))
            continue
        run = _Characterization(g, x, template.build(hidden, seed), mode, entry_cfg, dev, seed)
        slots.append((hidden, run, est, None))

    threads = configure_threads()
    warmup()
    for _ in range(reps):
        for _, run, _, _ in slots:
            if run is not None:
                run.measure_once()
    entries = [
        SweepEntry(hidden, None if run is None else run.report(threads), est, infeasible)
        for hidden, run, est, infeasible in slots
    ]
    return SweepResult(entries)


_WORKLOAD_KEYS = ("layer_dims", "aggregation", "self_loops")


def compare_speedup(a: BreakdownReport, b: BreakdownReport) -> float:
    """``a.total_seconds / b.total_seconds`` for reports of the same workload."""
    ga, gb = a.workload["graph"], b.workload["graph"]
    if (ga["num_vertices"], ga["num_edges"]) != (gb["num_vertices"], gb["num_edges"]):
        raise ComparisonError("reports describe different graphs")
    for key in _WORKLOAD_KEYS:
        if a.workload.get(key) != b.workload.get(key):
            raise ComparisonError(f"reports differ in {key}")
    if b.total_seconds <= 0:
        raise ComparisonError("reference report has zero total time")
    return a.total_seconds / b.total_seconds


def _hidden_dim(report: BreakdownReport) -> int:
    dims = report.workload["layer_dims"]
    return dims[1] if len(dims) > 2 else dims[0]


def _csv_rows(r):
    if isinstance(r, BreakdownReport):
        items = [(_hidden_dim(r), r, None)]
    else:
        items = [(e.dim, e.report, e.infeasible) for e in r.entries]
    for dim, rep, infeasible in items:
        for c in CATEGORIES:
            if rep is None:
                yield [dim, c, "", "", "", "infeasible"]
            else:
                modeled = int(c == "Offload" and rep.offload_modeled)
                yield [dim, c, repr(rep.seconds[c]), repr(rep.fractions[c]), modeled, "ok"]


def emit_report(r, fmt: str, path) -> Path:
    path = Path(path)
    try:
        if fmt == "json":
            with open(path, "w") as fh:
                json.dump(r.to_dict(), fh, indent=2)
                fh.write("\n")
        elif fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(["dim", "category", "seconds", "fraction", "modeled", "status"])
                w.writerows(_csv_rows(r))
        else:
            raise ConfigError(f"format must be json or csv, got {fmt!r}")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write report: {exc.strerror}", str(path)) from exc
    return path


def load_report(path):
    with open(path) as fh:
        d = json.load(fh)
    if d.get("kind") == "sweep":
        return SweepResult.from_dict(d)
    return BreakdownReport.from_dict(d)


def strip_timing(d):
    """Copy of a report dict without wall-clock-dependent fields."""
    if isinstance(d, dict):
        return {k: strip_timing(v) for k, v in d.items() if k != TIMING_KEY}
    if isinstance(d, list):
        return [strip_timing(v) for v in d]
    return d

