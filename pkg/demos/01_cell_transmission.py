"""Multi-level cell behavior: transmission maps, contrast, write energy.

Run: python demos/01_cell_transmission.py
"""

import numpy as np

from photonic_pim import OpcmCellModel, cell_write_energy, transmission_of_level
from photonic_pim.devices import transmission_with_scatter

cell = OpcmCellModel()  # physical map: crystalline floor 0.04, contrast 0.96
ideal = cell.as_ideal()

print(f"{cell.levels} programmable levels, contrast {cell.contrast:.2f}")
print(f"{'level':>5} {'ideal':>8} {'physical':>9}")
for level in range(cell.levels):
    print(
        f"{level:>5} {transmission_of_level(ideal, level):>8.4f} "
        f"{transmission_of_level(cell, level):>9.4f}"
    )

print("\nwrite energy: reprogram costs the full pulse, same-level writes are free")
print(f"  3 -> 12: {cell_write_energy(cell, 3, 12):.0f} pJ")
print(f"  7 ->  7: {cell_write_energy(cell, 7, 7):.0f} pJ")

rng = np.random.default_rng(0)
noisy = transmission_with_scatter(cell, np.arange(16), rng)
clean = transmission_of_level(cell, np.arange(16))
print(
    "\nscatter-perturbed readout stays within the design bound: "
    f"max deviation {np.max(np.abs(noisy - clean)):.4f} "
    f"(bound {cell.scatter_bound})"
)
