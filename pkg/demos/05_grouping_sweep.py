"""Subarray-grouping trade-off: parallelism vs power vs memory availability.

Writes plot-ready columns to demo_out/ and prints the sweep table.

Run: python demos/05_grouping_sweep.py
"""

import os

from photonic_pim import MemoryGeometry, dse_grouping, power_breakdown
from photonic_pim.perf import PowerParams, TimingParams

geometry = MemoryGeometry()
power = PowerParams()  # shipped calibration
timing = TimingParams()

rows = dse_grouping(geometry, power, timing)
print(f"{'G':>3} {'power W':>9} {'norm':>6} {'MAC/s':>11} {'rows free':>9} {'MAC/W':>11}")
for r in rows:
    print(
        f"{r.group_count:>3} {r.power_w:>9.2f} {r.normalized_power:>6.3f} "
        f"{r.mac_throughput:>11.3e} {r.rows_available:>9} {r.mac_per_watt:>11.4e}"
    )
best = max(rows, key=lambda r: r.mac_per_watt)
print(f"\npeak throughput efficiency at G = {best.group_count}")

bd = power_breakdown(geometry, power, "both")
print("\npower breakdown at the chosen point (W):")
for cat, watts in bd.items():
    if cat != "total":
        print(f"  {cat:15s} {watts:7.3f}")
print(f"  {'total':15s} {bd['total']:7.3f}")

os.makedirs("demo_out", exist_ok=True)
with open("demo_out/grouping_power.dat", "w") as fh:
    fh.write("# group_count normalized_power\n")
    for r in rows:
        fh.write(f"{r.group_count} {r.normalized_power:.6f}\n")
with open("demo_out/grouping_efficiency.dat", "w") as fh:
    fh.write("# group_count mac_per_watt\n")
    for r in rows:
        fh.write(f"{r.group_count} {r.mac_per_watt:.6e}\n")
print("\nplot data written to demo_out/grouping_*.dat")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax1 = plt.subplots(figsize=(6, 4))
    gs = [r.group_count for r in rows]
    ax1.plot(gs, [r.normalized_power for r in rows], "o-", label="normalized power")
    ax1.plot(gs, [r.rows_available / 64 for r in rows], "s-", label="rows available / 64")
    ax2 = ax1.twinx()
    ax2.plot(gs, [r.mac_per_watt for r in rows], "^--", color="tab:green",
             label="MAC/W")
    ax1.set_xscale("log", base=2)
    ax1.set_xlabel("subarray groups")
    ax1.legend(loc="upper left")
    ax2.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig("demo_out/grouping_sweep.png", dpi=150)
    print("figure written to demo_out/grouping_sweep.png")
except ImportError:
    pass
