"""Command-line entry point: ``gcnbench gen|convert|stats|infer|cost|sweep``.

Exit codes: 0 success, 2 configuration error, 3 capacity/infeasibility,
4 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import bench, cost, engine, graph
from .errors import CapacityError, FormatError, GcnBenchError, ParseError, TruncatedFileError
from .sampler import SamplingConfig

log = logging.getLogger("gcnbench")

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_IO = 0, 2, 3, 4


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _number(text):
    """Integer byte counts may be written as 40e9."""
    value = float(text)
    return int(value) if value.is_integer() else value


def _device(args):
    if args.device_capacity is None and args.bandwidth is None:
        return None
    return cost.DeviceModel(
        memory_capacity=int(args.device_capacity or cost.A100_40GB.memory_capacity),
        link_bandwidth=float(args.bandwidth or cost.A100_40GB.link_bandwidth),
    )


def _add_device_args(p):
    p.add_argument("--device-capacity", type=_number, help="modeled device memory in bytes")
    p.add_argument("--bandwidth", type=_number, help="modeled host-device link in bytes/s")


def _add_model_args(p):
    p.add_argument("--aggregation", choices=engine.AGGREGATIONS, default="sum")
    p.add_argument("--self-loops", action="store_true")
    p.add_argument("--weight-seed", type=int, default=0)


def _load_inputs(args, in_dim):
    g = graph.load_graph(args.graph)
    if args.features:
        x = graph.load_features(args.features)
    else:
        x = graph.gen_features(g.num_vertices, in_dim, args.feat_seed)
    return g, x


def _sampling_cfg(mode, batch_size, num_vertices):
    if mode == "full":
        return None
    return SamplingConfig(mode, batch_size or num_vertices)


def cmd_gen(args):
    g = graph.gen_random_graph(args.model, args.vertices, args.edges, args.seed)
    if args.text:
        graph.save_edge_list(g, args.out)
    else:
        graph.save_binary(g, args.out)
    log.info("wrote %r to %s", g, args.out)


def cmd_convert(args):
    g = graph.load_edge_list(args.input, args.num_vertices)
    graph.save_binary(g, args.output)
    log.info("wrote %r to %s", g, args.output)


def cmd_stats(args):
    stats = graph.compute_stats(graph.load_graph(args.graph))
    print(json.dumps(stats.to_dict(), indent=2))


def cmd_infer(args):
    dims = args.dims
    mode = bench.normalize_mode(args.mode)
    g, x = _load_inputs(args, dims[0])
    model = engine.make_model(dims, args.weight_seed, args.aggregation, args.self_loops)
    cfg = _sampling_cfg(mode, args.batch_size, g.num_vertices)
    trace = [] if args.trace else None
    report = bench.run_characterization(g, x, model, mode, cfg, _device(args), args.reps,
                                        seed=args.feat_seed, trace=trace)
    if args.trace:
        with open(args.trace, "w") as fh:
            for rec in trace:
                fh.write(json.dumps(rec) + "\n")
    _emit(report, args)


def cmd_cost(args):
    mode = bench.normalize_mode(args.mode)
    if args.graph:
        stats = graph.compute_stats(graph.load_graph(args.graph))
    elif args.stats:
        if len(args.stats) != 2:
            raise GcnBenchError("--stats expects V,E")
        stats = graph.compute_stats(tuple(args.stats))
    else:
        raise GcnBenchError("cost needs --stats V,E or --graph PATH")
    dev = _device(args) or cost.A100_40GB
    extra = {}
    if args.expanded is not None:
        extra["expanded_vertices"] = args.expanded
    w = cost.WorkloadSpec.from_stats(stats, args.dims, args.batch_size, mode, **extra)
    if args.avg_degree is not None:
        w = replace(w, avg_degree=args.avg_degree)
    if args.solve_batch_size:
        w = w.with_batch_size(cost.max_batch_size(w, dev, mode))
    report = cost.estimate(w, dev, num_edges=stats.num_edges)
    out = report.to_dict()
    out["batch_size"] = w.batch_size
    out["host_footprint"] = cost.est_host_footprint(w, mode, dev.element_size)
    print(json.dumps(out, indent=2))


def cmd_sweep(args):
    mode = bench.normalize_mode(args.mode)
    template = bench.ModelTemplate(args.in_dim, args.out_dim, args.layers, args.aggregation, args.self_loops)
    g, x = _load_inputs(args, args.in_dim)
    cfg = _sampling_cfg(mode, args.batch_size, g.num_vertices) if args.batch_size else None
    if mode != "full" and cfg is None and _device(args) is None:
        cfg = _sampling_cfg(mode, None, g.num_vertices)
    result = bench.run_sweep(g, x, template, args.dims_list, mode, cfg, _device(args), args.reps,
                             seed=args.weight_seed)
    _emit(result, args)


def _emit(result, args):
    if args.report:
        bench.emit_report(result, args.format, args.report)
        log.info("report written to %s", args.report)
    else:
        print(json.dumps(result.to_dict(), indent=2))


def build_parser():
    parser = argparse.ArgumentParser(prog="gcnbench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic graph")
    p.add_argument("--model", choices=["erdos-renyi", "rmat"], default="erdos-renyi")
    p.add_argument("--vertices", type=int, required=True)
    p.add_argument("--edges", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--text", action="store_true", help="write an edge list instead of binary CSR")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("convert", help="edge list to binary CSR")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--num-vertices", type=int)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", help="print graph statistics")
    p.add_argument("graph")
    p.set_defaults(func=cmd_stats)

    run_parent = argparse.ArgumentParser(add_help=False)
    run_parent.add_argument("--graph", required=True)
    feats = run_parent.add_mutually_exclusive_group()
    feats.add_argument("--features", help="binary feature matrix")
    feats.add_argument("--feat-seed", type=int, default=0)
    run_parent.add_argument("--mode", default="full", choices=["full", "batchwise", "layerwise"])
    run_parent.add_argument("--batch-size", type=int)
    run_parent.add_argument("--reps", type=int, default=5)
    run_parent.add_argument("--report")
    run_parent.add_argument("--format", choices=["json", "csv"], default="json")
    _add_device_args(run_parent)
    _add_model_args(run_parent)

    p = sub.add_parser("infer", parents=[run_parent], help="timed inference with category breakdown")
    p.add_argument("--dims", type=_int_list, required=True, help="layer widths, e.g. 128,256,47")
    p.add_argument("--trace", help="write per-batch JSON-lines records here")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("sweep", parents=[run_parent], help="hidden-width sweep")
    p.add_argument("--dims-list", type=_int_list, required=True)
    p.add_argument("--in-dim", type=int, required=True)
    p.add_argument("--out-dim", type=int, required=True)
    p.add_argument("--layers", type=int, default=2)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cost", help="analytical movement/footprint estimate")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--stats", type=_int_list, help="V,E")
    src.add_argument("--graph")
    p.add_argument("--dims", type=_int_list, required=True)
    p.add_argument("--mode", default="batchwise", choices=["full", "batchwise", "layerwise"])
    size = p.add_mutually_exclusive_group()
    size.add_argument("--batch-size", type=int)
    size.add_argument("--solve-batch-size", action="store_true")
    p.add_argument("--avg-degree", type=float, help="override E/V")
    p.add_argument("--expanded", type=int, help="override the per-batch expanded vertex count")
    _add_device_args(p)
    p.set_defaults(func=cmd_cost)
    return parser


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, CapacityError):
        return EXIT_CAPACITY
    if isinstance(exc, (OSError, FormatError, ParseError, TruncatedFileError)):
        return EXIT_IO
    return EXIT_CONFIG


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        args.func(args)
    except (GcnBenchError, OSError, ValueError) as exc:
        print(f"gcnbench: error: {exc}", file=sys.stderr)
        return exit_code(exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
