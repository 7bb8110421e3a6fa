import csv
import json

import numpy as np
import pytest

from gcnbench import bench, cost, engine, graph
from gcnbench.bench import CATEGORIES, ModelTemplate
from gcnbench.errors import ComparisonError, ConfigError
from gcnbench.sampler import SamplingConfig


@pytest.fixture(scope="module")
def small():
    g = graph.gen_random_graph("erdos-renyi", 2000, 20000, 3)
    x = graph.gen_features(2000, 8, 1)
    return g, x


def check_fractions(report):
    fr = report.fractions
    assert set(fr) == set(CATEGORIES)
    assert abs(sum(fr.values()) - 1) <= 1e-9
    assert all(0 <= f <= 1 for f in fr.values())


def test_full_mode_without_device(small):
    g, x = small
    r = bench.run_characterization(g, x, engine.make_model([8, 16, 4]), reps=3)
    check_fractions(r)
    assert r.fractions["Offload"] == 0 and r.fractions["Sampling"] == 0
    assert not r.offload_modeled and r.cost is None
    assert r.fractions["SpMM"] > 0 and r.fractions["DenseMM"] > 0
    assert len(r.rep_totals) == 3


def test_seconds_exhaustive(small):
    g, x = small
    r = bench.run_characterization(g, x, engine.make_model([8, 16, 4]), reps=3)
    assert sum(r.seconds.values()) == pytest.approx(r.total_seconds, rel=1e-12)


@pytest.mark.parametrize("mode", ["batch-wise", "layer-wise"])
def test_sampled_modes_with_device(small, mode):
    g, x = small
    model = engine.make_model([8, 16, 4])
    r = bench.run_characterization(g, x, model, mode, SamplingConfig(mode, 250), cost.A100_40GB, reps=2)
    check_fractions(r)
    assert r.offload_modeled
    assert r.seconds["Offload"] == r.cost.est_transfer_seconds > 0
    assert r.seconds["Sampling"] > 0
    assert r.output_digest == bench.digest(engine.full_graph_inference(g, x, model))


def test_full_mode_modeled_offload(small):
    g, x = small
    r = bench.run_characterization(g, x, engine.make_model([8, 16, 4]), dev=cost.A100_40GB, reps=1)
    assert r.cost.mode == "full"
    assert r.seconds["Offload"] == r.cost.est_transfer_seconds


def test_work_determinism(small):
    g, x = small
    model = engine.make_model([8, 8, 4], aggregation="mean")
    cfg = SamplingConfig("batch-wise", 300)
    a = bench.run_characterization(g, x, model, "batch-wise", cfg, cost.A100_40GB, reps=2, seed=4)
    b = bench.run_characterization(g, x, model, "batch-wise", cfg, cost.A100_40GB, reps=2, seed=4)
    assert bench.strip_timing(a.to_dict()) == bench.strip_timing(b.to_dict())
    assert set(a.seconds) == set(b.seconds)


def test_config_errors(small):
    g, x = small
    model = engine.make_model([8, 4])
    with pytest.raises(ConfigError):
        bench.run_characterization(g, x, model, reps=0)
    with pytest.raises(ConfigError):
        bench.run_characterization(g, x, model, "batch-wise")
    with pytest.raises(ConfigError):
        bench.run_characterization(g, x, model, "batch-wise", SamplingConfig("layer-wise", 5))


def test_json_round_trip(small, tmp_path):
    g, x = small
    r = bench.run_characterization(g, x, engine.make_model([8, 4]), "layer-wise",
                                   SamplingConfig("layer-wise", 500), cost.A100_40GB, reps=1)
    p = bench.emit_report(r, "json", tmp_path / "r.json")
    back = bench.load_report(p)
    assert back == r
    assert json.loads(p.read_text())["timing"]["fractions"] == r.fractions


def test_sweep_six_dims_and_csv(small, tmp_path):
    g, x = small
    dims = [8, 16, 32, 64, 128, 256]
    res = bench.run_sweep(g, x, ModelTemplate(8, 4), dims, dev=cost.A100_40GB, reps=1)
    assert res.dims == dims
    assert all(e.report is not None and e.cost is not None for e in res.entries)
    p = bench.emit_report(res, "csv", tmp_path / "s.csv")
    rows = list(csv.DictReader(p.open()))
    assert len(rows) == len(dims) * 5
    for d in dims:
        fr = [float(r["fraction"]) for r in rows if int(r["dim"]) == d]
        assert abs(sum(fr) - 1) <= 1e-9
    assert {r["modeled"] for r in rows if r["category"] == "Offload"} == {"1"}
    back = bench.load_report(bench.emit_report(res, "json", tmp_path / "s.json"))
    assert back == res


def test_sweep_single_dim_matches_characterization(small):
    g, x = small
    t = ModelTemplate(8, 4, aggregation="sym-norm", self_loops=True)
    res = bench.run_sweep(g, x, t, [8], reps=1, seed=9)
    single = bench.run_characterization(g, x, t.build(8, 9), reps=1, seed=9)
    assert len(res.entries) == 1
    assert bench.strip_timing(res.entries[0].report.to_dict()) == bench.strip_timing(single.to_dict())


def test_sweep_offload_fraction_falls(small):
    g, x = small
    res = bench.run_sweep(g, x, ModelTemplate(8, 4), [8, 256], dev=cost.A100_40GB, reps=3)
    lo, hi = (e.report.fractions["Offload"] for e in res.entries)
    assert hi < lo


def test_sweep_records_infeasible_entries(small):
    g, x = small
    dev = cost.DeviceModel(2000 * 8 * 8 + 2000 * 4 * 8 + 25 * 10**4, 32e9)
    res = bench.run_sweep(g, x, ModelTemplate(8, 4), [8, 512], dev=dev, reps=1)
    assert res.entries[0].infeasible is None and res.entries[0].report is not None
    assert res.entries[1].infeasible and res.entries[1].report is None
    assert len(list(bench._csv_rows(res))) == 10


def test_sweep_sampled_solves_batch_size(small):
    g, x = small
    dev = cost.DeviceModel(10**5, 32e9)
    res = bench.run_sweep(g, x, ModelTemplate(8, 4), [8, 32], "batchwise", dev=dev, reps=1)
    for e in res.entries:
        assert e.report.workload["batch_size"] < 2000
        assert e.cost.peak_device_footprint <= dev.memory_capacity


def test_sweep_dims_validation(small):
    g, x = small
    with pytest.raises(ConfigError):
        bench.run_sweep(g, x, ModelTemplate(8, 4), [16, 8])
    with pytest.raises(ConfigError):
        bench.run_sweep(g, x, ModelTemplate(8, 4), [])
    with pytest.raises(ConfigError):
        bench.run_sweep(g, x, ModelTemplate(5, 4), [8])


def _fake(total, dims=(8, 16, 4), v=10):
    return bench.BreakdownReport(
        seconds={c: total / 5 for c in CATEGORIES},
        fractions={c: 0.2 for c in CATEGORIES},
        total_seconds=total,
        workload={"graph": {"num_vertices": v, "num_edges": 20}, "layer_dims": list(dims),
                  "aggregation": "sum", "self_loops": False},
        output_digest="x",
    )


def test_compare_speedup():
    assert bench.compare_speedup(_fake(2.0), _fake(2.0)) == 1.0
    assert bench.compare_speedup(_fake(1.0), _fake(2.0)) == 0.5
    with pytest.raises(ComparisonError):
        bench.compare_speedup(_fake(1.0), _fake(1.0, dims=(8, 32, 4)))
    with pytest.raises(ComparisonError):
        bench.compare_speedup(_fake(1.0), _fake(1.0, v=11))


def test_compare_real_runs(small):
    g, x = small
    model = engine.make_model([8, 8, 4])
    full = bench.run_characterization(g, x, model, reps=1)
    sampled = bench.run_characterization(g, x, model, "layer-wise", SamplingConfig("layer-wise", 500), reps=1)
    assert bench.compare_speedup(sampled, full) > 0


def test_emit_report_errors(small, tmp_path):
    with pytest.raises(ConfigError):
        bench.emit_report(_fake(1.0), "xml", tmp_path / "r")
    with pytest.raises(OSError, match="missing"):
        bench.emit_report(_fake(1.0), "json", tmp_path / "missing" / "r.json")


def test_strip_timing_nested():
    d = {"a": 1, "timing": {"x": 2}, "entries": [{"timing": 3, "b": [4]}]}
    assert bench.strip_timing(d) == {"a": 1, "entries": [{"b": [4]}]}


def test_timer_sections():
    t = bench.CategoryTimer()
    with t.section("SpMM"):
        np.ones(1000).sum()
    with t.section("SpMM"):
        pass
    assert t.seconds("SpMM") > 0
    assert t.seconds("Glue") == 0


def test_template_dims():
    assert ModelTemplate(128, 47, 3).dims(64) == [128, 64, 64, 47]
    assert ModelTemplate(8, 2, 1).dims(99) == [8, 2]


def test_normalize_mode():
    assert bench.normalize_mode("batchwise") == "batch-wise"
    with pytest.raises(ConfigError):
        bench.normalize_mode("fixed")


def test_gc_restored_after_reps(small):
    import gc
    g, x = small
    assert gc.isenabled()
    bench.run_characterization(g, x, engine.make_model([8, 4]), reps=2)
    assert gc.isenabled()
