"""Catalog validation plus 4-bit vs 8-bit latency/energy for every model.

Run: python demos/06_workload_report.py
"""

import dataclasses

from photonic_pim.config import load_config
from photonic_pim.mapper import build_network_plans
from photonic_pim.perf import efficiency_metrics, layer_result, power_breakdown
from photonic_pim.workloads import catalog, validate_catalog

cfg = load_config()
geometry, models = cfg.geometry, cfg.models

print("parameter-count validation:")
for row in validate_catalog():
    mark = "ok" if row.match else f"OFF BY {row.computed - row.declared:+,}"
    print(f"  {row.name:13s} computed {row.computed:>12,}  declared {row.declared:>12,}  {mark}")

power_w = power_breakdown(geometry, models.power, "both")["total"]
print(f"\nlatency / energy under the default timing assumptions ({power_w:.1f} W):")
print(f"{'model':13s} {'bits':>4} {'MACs':>9} {'proc ms':>9} {'wb ms':>9} "
      f"{'energy J':>10} {'nJ/bit':>9} {'FPS':>8}")
for name, net in catalog().items():
    for bits in (4, 8):
        variant = dataclasses.replace(net, operand_bits=bits)
        _, plans = build_network_plans(variant, geometry)
        results = [
            layer_result(p, models.timing, models.energy, models.power, geometry)
            for p in plans
        ]
        epb, fps, _ = efficiency_metrics(results, power_w, bits)
        proc = sum(r.processing_ns for r in results) / 1e6
        wb = sum(r.writeback_ns for r in results) / 1e6
        energy = sum(r.total_energy_pj for r in results) / 1e12
        macs = sum(r.mac_count for r in results)
        print(
            f"{name:13s} {bits:>4} {macs / 1e6:>8.0f}M {proc:>9.3f} {wb:>9.3f} "
            f"{energy:>10.4f} {epb * 1e9:>9.3f} {fps:>8.2f}"
        )

print("\nwriteback dominates every model at both operand widths; the tower")
print("network's per-MAC processing latency exceeds the residual network's,")
print("a consequence of its utilization statistics rather than any model-")
print("specific constant in the scheduler.")
