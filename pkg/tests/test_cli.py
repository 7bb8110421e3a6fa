import csv
import json

import pytest

from gcnbench import bench, graph
from gcnbench.cli import main


@pytest.fixture
def gpath(tmp_path):
    p = tmp_path / "g.csr"
    assert main(["gen", "--vertices", "300", "--edges", "2000", "--seed", "2", "--out", str(p)]) == 0
    return p


def test_gen_and_stats(gpath, capsys):
    assert graph.load_binary(gpath) == graph.gen_random_graph("erdos-renyi", 300, 2000, 2)
    assert main(["stats", str(gpath)]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["num_edges"] == 2000 and stats["density"] == 2000 / 300**2


def test_gen_rmat_text(tmp_path):
    p = tmp_path / "r.txt"
    assert main(["gen", "--model", "rmat", "--vertices", "64", "--edges", "300", "--out", str(p), "--text"]) == 0
    assert graph.load_edge_list(p, 64).num_edges == 300


def test_convert(tmp_path):
    src = tmp_path / "e.txt"
    src.write_text("# tiny\n0 1\n1 0\n1 2\n")
    out = tmp_path / "e.csr"
    assert main(["convert", str(src), str(out)]) == 0
    assert graph.load_binary(out).row_offsets.tolist() == [0, 1, 3, 3]


def test_convert_parse_error_is_io(tmp_path, capsys):
    src = tmp_path / "bad.txt"
    src.write_text("0 1\nzz\n")
    assert main(["convert", str(src), str(tmp_path / "o.csr")]) == 4
    assert "line 2" in capsys.readouterr().err


@pytest.mark.parametrize("mode", ["full", "batchwise", "layerwise"])
def test_infer_modes(gpath, tmp_path, mode):
    report = tmp_path / "r.json"
    trace = tmp_path / "t.jsonl"
    args = ["infer", "--graph", str(gpath), "--dims", "8,16,4", "--mode", mode, "--batch-size", "50",
            "--reps", "2", "--report", str(report), "--trace", str(trace),
            "--device-capacity", "40e9", "--bandwidth", "32e9"]
    assert main(args) == 0
    r = bench.load_report(report)
    assert r.workload["mode"] in ("full", "batch-wise", "layer-wise")
    assert r.offload_modeled
    lines = trace.read_text().splitlines()
    expected = {"full": 0, "batchwise": 6, "layerwise": 12}[mode]
    assert len(lines) == expected


def test_infer_with_feature_file(gpath, tmp_path, capsys):
    feats = tmp_path / "x.bin"
    graph.save_features(graph.gen_features(300, 8, 0), feats)
    assert main(["infer", "--graph", str(gpath), "--features", str(feats), "--dims", "8,4", "--reps", "1"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["kind"] == "breakdown"


def test_infer_csv(gpath, tmp_path):
    p = tmp_path / "r.csv"
    assert main(["infer", "--graph", str(gpath), "--dims", "8,32,4", "--reps", "1",
                 "--report", str(p), "--format", "csv"]) == 0
    rows = list(csv.DictReader(p.open()))
    assert [r["category"] for r in rows] == list(bench.CATEGORIES)
    assert {r["dim"] for r in rows} == {"32"}


def test_sweep(gpath, tmp_path):
    p = tmp_path / "s.csv"
    assert main(["sweep", "--graph", str(gpath), "--dims-list", "8,16,32", "--in-dim", "8", "--out-dim", "4",
                 "--reps", "1", "--bandwidth", "32e9", "--report", str(p), "--format", "csv"]) == 0
    assert len(list(csv.DictReader(p.open()))) == 15


def test_cost_papers(capsys):
    assert main(["cost", "--stats", "111059956,1615685872", "--dims", "256,256,256,256",
                 "--mode", "batchwise", "--batch-size", "64", "--avg-degree", "30"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["expanded_vertices_per_batch"] == 1_728_000
    assert out["num_batches"] == 1_735_312
    assert out["human"]["total_movement"] == "3.07 PB"


def test_cost_solve_batch_size(capsys):
    assert main(["cost", "--stats", "100000,1000000", "--dims", "64,64,64", "--mode", "layerwise",
                 "--solve-batch-size", "--device-capacity", "1e8"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["peak_device_footprint"] <= 10**8
    assert out["host_footprint"] == 100000 * 128 * 4


def test_cost_full_graph_exit_codes(gpath, capsys):
    assert main(["cost", "--graph", str(gpath), "--dims", "8,4", "--mode", "full"]) == 0
    assert main(["cost", "--stats", "111059956,1615685872", "--dims", "256,256", "--mode", "full"]) == 3
    assert "sampling" in capsys.readouterr().err


def test_exit_codes(gpath, tmp_path):
    assert main([]) == 2
    assert main(["infer", "--graph", str(gpath), "--dims", "8,x"]) == 2
    assert main(["infer", "--graph", str(gpath), "--dims", "8,4", "--reps", "0"]) == 2
    assert main(["infer", "--graph", str(tmp_path / "nope.csr"), "--dims", "8,4"]) == 4
    bad = tmp_path / "empty.csr"
    bad.write_bytes(b"GCNBCSR\x00")
    assert main(["stats", str(bad)]) == 4
    assert main(["gen", "--vertices", "2", "--edges", "5", "--out", str(tmp_path / "x")]) == 3
    assert main(["cost", "--stats", "10", "--dims", "4,4"]) == 2
    assert main(["--help"]) == 0


def test_infeasible_solve_exit_code():
    assert main(["cost", "--stats", "1000,5000", "--dims", "64,64", "--solve-batch-size",
                 "--device-capacity", "100"]) == 3


def test_module_entry_point(gpath):
    import subprocess
    import sys
    res = subprocess.run([sys.executable, "-m", "gcnbench", "stats", str(gpath)], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout)["num_vertices"] == 300
