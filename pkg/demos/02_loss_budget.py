"""Optical loss budgeting: read paths, amplifier placement, laser sizing.

Run: python demos/02_loss_budget.py
"""

import dataclasses

from photonic_pim import (
    CellLocation,
    LossParams,
    MemoryGeometry,
    OpcmCellModel,
    build_read_path,
    path_loss_db,
    required_laser_power_dbm,
)

geometry = MemoryGeometry()
loss = LossParams()
cell = OpcmCellModel()

print("read-path budgets (cell budgeted at its crystalline worst case)\n")
for label, loc in [
    ("nearest subarray", CellLocation(0, 0, 0, 0, 0)),
    ("mid grid", CellLocation(0, 32, 32, 128, 256)),
    ("farthest subarray", CellLocation(3, 63, 63, 255, 511)),
]:
    for source in ("local_mdl", "external_laser"):
        path = build_read_path(loc, geometry, loss, source=source, cell=cell)
        net_db = path_loss_db(path, loss, cell)
        amps = sum(1 for el in path if el.kind == "soa")
        dbm = required_laser_power_dbm(path, loss, -20.0, 3.0, cell)
        print(
            f"{label:18s} {source:14s} elements={len(path):2d} amplifiers={amps} "
            f"net loss={net_db:7.3f} dB  required laser={dbm:7.3f} dBm"
        )

print("\nwith a 10x coarser floorplan pitch, routing loss crosses the amplifier")
print("insertion threshold and the loss-aware placement kicks in:")
coarse = dataclasses.replace(geometry, pitch_cm=0.5)
far = CellLocation(3, 63, 63, 255, 511)
path = build_read_path(far, coarse, loss, source="external_laser", cell=cell)
amps = sum(1 for el in path if el.kind == "soa")
print(
    f"farthest subarray  external_laser amplifiers={amps} "
    f"net loss={path_loss_db(path, loss, cell):7.3f} dB  "
    f"required laser={required_laser_power_dbm(path, loss, -20, 3, cell):7.3f} dBm"
)

print("\nper-element reference losses (dB):")
print(f"  directional coupler {loss.directional_coupler_db}")
print(f"  ring drop {loss.mr_drop_db} / through {loss.mr_through_db}")
print(f"  access ring drop {loss.eo_mr_drop_db} / through {loss.eo_mr_through_db}")
print(f"  propagation {loss.propagation_db_per_cm} per cm, bend {loss.bend_db_per_90deg}")
print(f"  waveguide crossing {loss.crossing_db:.3e} (fraction {loss.crossing_loss_fraction})")
print(f"  amplifier gain {loss.soa_gain_db}")
