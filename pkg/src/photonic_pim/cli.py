"""Command-line entry point: simulate, dse, validate, report.

Exit codes: 0 success, 1 validation/check failure, 2 configuration error,
3 mapping error, 4 memory-conflict error.  Given the same config and seed,
every artifact is byte-identical across runs and worker counts.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import executor, perf, reference, workloads
from .config import RunConfig, load_config
from .errors import ConfigError, InterferenceError, MappingError, MemoryConflictError
from .mapper import build_network_plans
from .validate import run_validation_suite

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_MAPPING = 3
EXIT_CONFLICT = 4

_EXACT_MODE_MAC_LIMIT = 50_000_000


def _resolve_workload(cfg: RunConfig):
    net = (
        workloads.load_network(cfg.workload)
        if cfg.workload.endswith(".json") or os.path.sep in cfg.workload
        else workloads.load_builtin(cfg.workload)
    )
    if cfg.operand_bits != net.operand_bits:
        net = dataclasses.replace(net, operand_bits=cfg.operand_bits)
    return net


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


def _write_layers_csv(path: str, plans, results) -> None:
    cols = [
        "layer", "kind", "mac_count", "slot_count", "tdm_passes", "lanes",
        "utilization", "processing_ns", "writeback_ns",
    ] + [f"energy_{c}_pj" for c in perf.ENERGY_CATEGORIES] + ["energy_total_pj"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for plan, res in zip(plans, results):
            row = [
                res.layer_name, res.kind, res.mac_count, res.slot_count,
                res.tdm_passes, plan.lanes, _fmt(res.utilization),
                _fmt(res.processing_ns), _fmt(res.writeback_ns),
            ]
            row += [_fmt(res.energy_pj[c]) for c in perf.ENERGY_CATEGORIES]
            row.append(_fmt(res.total_energy_pj))
            w.writerow(row)


def _write_plot_data(path: str, header: str, rows) -> None:
    with open(path, "w") as fh:
        fh.write(f"# {header}\n")
        for row in rows:
            fh.write(" ".join(_fmt(v) for v in row) + "\n")


def cmd_simulate(cfg: RunConfig) -> int:
    net = _resolve_workload(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    resolved, plans = build_network_plans(net, cfg.geometry)

    def one_result(plan):
        return perf.layer_result(
            plan, cfg.models.timing, cfg.models.energy, cfg.models.power, cfg.geometry
        )

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        results = list(pool.map(one_result, plans))

    functional_check = None
    if cfg.exact_mode:
        total_macs = sum(p.mac_count for p in plans)
        if total_macs > _EXACT_MODE_MAC_LIMIT:
            raise ConfigError(
                f"exact-mode functional check is limited to {_EXACT_MODE_MAC_LIMIT:,} "
                f"MACs; workload {net.name!r} has {total_macs:,}. Use a smaller "
                "workload file for functional verification."
            )
        rng = np.random.default_rng(cfg.seed)
        hi = 1 << net.operand_bits
        x = rng.integers(0, hi, size=net.input_shape, dtype=np.int64)
        weights = executor.synthesize_weights(net, rng)
        cell = cfg.models.cell.as_ideal()
        outputs, _ = executor.execute_network(
            net, resolved, cfg.geometry, cell, x, weights=weights, exact_mode=True
        )
        expected = reference.reference_inference(net, weights, x)
        mismatched = [
            name for name in outputs if not np.array_equal(outputs[name], expected[name])
        ]
        functional_check = "PASS" if not mismatched else f"FAIL: {mismatched}"
        print(f"functional-equality check: {functional_check}")

    _write_layers_csv(os.path.join(cfg.out_dir, "layers.csv"), plans, results)
    with open(os.path.join(cfg.out_dir, "plans.json"), "w") as fh:
        json.dump([p.to_dict() for p in plans], fh, indent=1, sort_keys=True)
        fh.write("\n")
    _write_plot_data(
        os.path.join(cfg.out_dir, "latency_breakdown.dat"),
        "layer_index processing_ns writeback_ns",
        [(i, r.processing_ns, r.writeback_ns) for i, r in enumerate(results)],
    )
    with open(os.path.join(cfg.out_dir, "energy_breakdown.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["category", "energy_pj"])
        for cat in perf.ENERGY_CATEGORIES:
            w.writerow([cat, _fmt(sum(r.energy_pj[cat] for r in results))])

    power_both = perf.power_breakdown(cfg.geometry, cfg.models.power, "both")
    epb, fps, fps_per_watt = perf.efficiency_metrics(
        results, power_both["total"], net.operand_bits
    )
    total_proc = sum(r.processing_ns for r in results)
    total_wb = sum(r.writeback_ns for r in results)
    summary = {
        "workload": net.name,
        "operand_bits": net.operand_bits,
        "seed": cfg.seed,
        "mac_count": sum(r.mac_count for r in results),
        "slot_count": sum(r.slot_count for r in results),
        "processing_ns": round(total_proc, 6),
        "writeback_ns": round(total_wb, 6),
        "total_latency_ns": round(total_proc + total_wb, 6),
        "total_energy_pj": round(sum(r.total_energy_pj for r in results), 6),
        "power_w": {k: round(v, 6) for k, v in power_both.items()},
        "energy_per_bit_j": epb,
        "fps": fps,
        "fps_per_watt": fps_per_watt,
        "functional_check": functional_check,
    }
    with open(os.path.join(cfg.out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(
        f"{net.name} ({net.operand_bits}-bit): processing {total_proc / 1e6:.3f} ms, "
        f"writeback {total_wb / 1e6:.3f} ms, energy {summary['total_energy_pj'] / 1e12:.6f} J"
    )
    print(f"artifacts written to {cfg.out_dir}")
    return EXIT_OK


def cmd_dse(cfg: RunConfig) -> int:
    os.makedirs(cfg.out_dir, exist_ok=True)

    def one_row(g):
        geo = dataclasses.replace(cfg.geometry, group_count=g)
        return perf.dse_grouping(
            cfg.geometry, cfg.models.power, cfg.models.timing, candidates=(g,)
        )[0]

    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        rows = list(pool.map(one_row, cfg.dse_candidates))
    with open(os.path.join(cfg.out_dir, "dse.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["group_count", "power_w", "normalized_power", "mac_throughput_per_s",
             "rows_available", "mac_per_watt"]
        )
        for r in rows:
            w.writerow(
                [r.group_count, _fmt(r.power_w), _fmt(r.normalized_power),
                 _fmt(r.mac_throughput), r.rows_available, _fmt(r.mac_per_watt)]
            )
    _write_plot_data(
        os.path.join(cfg.out_dir, "dse_power.dat"), "group_count normalized_power",
        [(r.group_count, r.normalized_power) for r in rows],
    )
    _write_plot_data(
        os.path.join(cfg.out_dir, "dse_mac_per_watt.dat"), "group_count mac_per_watt",
        [(r.group_count, r.mac_per_watt) for r in rows],
    )
    best = max(rows, key=lambda r: r.mac_per_watt)
    print(f"peak MAC/W at G={best.group_count}")
    print(f"artifacts written to {cfg.out_dir}")
    return EXIT_OK


def cmd_validate() -> int:
    items = run_validation_suite()
    width = max(len(i.name) for i in items)
    ok = True
    for item in items:
        status = "PASS" if item.passed else "FAIL"
        ok &= item.passed
        print(f"{item.name:<{width}}  {status}  {item.detail}")
    return EXIT_OK if ok else EXIT_FAIL


def cmd_report(out_dir: str) -> int:
    summary_path = os.path.join(out_dir, "summary.json")
    if not os.path.exists(summary_path):
        raise ConfigError(f"no summary.json under {out_dir!r}; run simulate first")
    with open(summary_path) as fh:
        summary = json.load(fh)
    print(f"workload: {summary['workload']} ({summary['operand_bits']}-bit)")
    print(f"MACs: {summary['mac_count']:,}   compute slots: {summary['slot_count']:,}")
    print(
        f"latency: {summary['total_latency_ns'] / 1e6:.3f} ms "
        f"(processing {summary['processing_ns'] / 1e6:.3f}, "
        f"writeback {summary['writeback_ns'] / 1e6:.3f})"
    )
    print(f"energy: {summary['total_energy_pj'] / 1e12:.6f} J")
    print(
        f"efficiency: {summary['energy_per_bit_j']:.3e} J/bit, "
        f"{summary['fps']:.2f} FPS, {summary['fps_per_watt']:.4f} FPS/W"
    )
    if summary.get("functional_check"):
        print(f"functional check: {summary['functional_check']}")
    layers_path = os.path.join(out_dir, "layers.csv")
    if os.path.exists(layers_path):
        with open(layers_path) as fh:
            n_layers = sum(1 for _ in fh) - 1
        print(f"per-layer table: {layers_path} ({n_layers} rows)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="photonic-pim",
        description="Simulator for an optical in-memory CNN accelerator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file (defaults merged in)")
        p.add_argument("--workload", help="built-in name or path to a network JSON")
        p.add_argument("--bits", type=int, choices=(4, 8), help="operand width")
        p.add_argument("--seed", type=int, help="random seed for synthetic tensors")
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int, help="parallel workers")

    p_sim = sub.add_parser("simulate", help="map a workload and account its cost")
    add_common(p_sim)
    p_sim.add_argument(
        "--exact-mode", action="store_true",
        help="also run the functional path and check it against the reference",
    )
    p_dse = sub.add_parser("dse", help="sweep the subarray-group count")
    add_common(p_dse)
    sub.add_parser("validate", help="run the built-in validation suite")
    p_rep = sub.add_parser("report", help="summarize a previous run directory")
    p_rep.add_argument("--out", default="out", help="run directory to summarize")
    return parser


def _config_from_args(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.workload:
        cfg.workload = args.workload
    if args.bits:
        cfg.operand_bits = args.bits
    if getattr(args, "exact_mode", False):
        cfg.exact_mode = True
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out_dir = args.out
    if args.workers:
        cfg.workers = args.workers
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(_config_from_args(args))
        if args.command == "dse":
            return cmd_dse(_config_from_args(args))
        if args.command == "validate":
            return cmd_validate()
        if args.command == "report":
            return cmd_report(args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MappingError as exc:
        print(f"mapping error: {exc}", file=sys.stderr)
        return EXIT_MAPPING
    except (MemoryConflictError, InterferenceError) as exc:
        print(f"conflict error: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
