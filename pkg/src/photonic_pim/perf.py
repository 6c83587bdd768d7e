"""Analytical latency, energy, and power accounting over mapping plans.

No time constants for the memory substrate are published, so the timing
defaults here are explicit assumptions (flagged per field); every claim
derived from them is a trend or calibration statement, never an absolute
one.  The power model's group-dependent coefficients come from the shipped
calibration file, which is fitted, not derived: the aggregation/interface
demultiplexing term grows as G*log2(G) so that throughput-per-watt peaks
at an interior group count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .devices import EnergyParams
from .memory import MemoryGeometry

__all__ = [
    "TimingParams",
    "PowerParams",
    "LayerResult",
    "DseRow",
    "NetworkRun",
    "layer_latency",
    "layer_energy",
    "layer_result",
    "power_breakdown",
    "dse_grouping",
    "efficiency_metrics",
    "peak_mac_throughput",
]

ENERGY_CATEGORIES = (
    "opcm_read", "opcm_write", "adc", "dac", "mdl",
    "eo_tuning", "soa", "aggregation", "eoe",
)

POWER_CATEGORIES = (
    "external_laser", "mdl", "eo_tuning", "soa", "aggregation", "eoe",
)


@dataclass(frozen=True)
class TimingParams:
    """Time constants.  All values are assumptions, not measured data.

    pim_cycle_hz:        laser modulation/readout rate (assumed 5 GHz)
    opcm_write_pulse_ns: per-row programming pulse (assumed 150 ns)
    adc_conversion_ns:   per-slot conversion time (assumed 0.5 ns)
    aggregation_add_ns:  one digital partial-sum add (assumed 0.1 ns)
    eoe_transfer_ns_per_bit: controller transfer+nonlinearity per bit
    mem_read_ns:         ring switching + demodulation for a memory read
    write_parallel_rows: rows programmable concurrently during writeback
    """

    pim_cycle_hz: float = 5.0e9
    opcm_write_pulse_ns: float = 150.0
    adc_conversion_ns: float = 0.5
    aggregation_add_ns: float = 0.1
    eoe_transfer_ns_per_bit: float = 0.01
    mem_read_ns: float = 5.0
    write_parallel_rows: int = 1

    def __post_init__(self) -> None:
        for name in (
            "pim_cycle_hz", "opcm_write_pulse_ns", "adc_conversion_ns",
            "aggregation_add_ns", "eoe_transfer_ns_per_bit", "mem_read_ns",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be > 0")
        if self.write_parallel_rows < 1:
            raise ValueError("write_parallel_rows must be >= 1")

    @property
    def pim_cycle_ns(self) -> float:
        return 1.0e9 / self.pim_cycle_hz


@dataclass(frozen=True)
class PowerParams:
    """Power model coefficients (defaults = the shipped calibration).

    The per-group-and-log demux coefficients make aggregation/interface
    power superlinear in the group count; they are fitted so that the
    16-group design point totals 55.9 W with the laser arrays and the
    electrical-optical interface as the two dominant categories.
    """

    external_laser_w: float = 5.284512
    mdl_mw_per_laser: float = 0.009
    eo_tuning_mw_per_mr: float = 0.2
    eo_base_w: float = 0.8
    soa_bias_mw: float = 2.56
    aggregation_w_per_lane: float = 0.2
    aggregation_demux_w: float = 0.153
    eoe_base_w: float = 1.0
    eoe_demux_w: float = 0.25
    sram_w: float = 0.4

    def __post_init__(self) -> None:
        for name in self.__dataclass_fields__:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class LayerResult:
    """Cost of one layer: latencies plus a per-component energy breakdown."""

    layer_name: str
    kind: str
    mac_count: int
    slot_count: int
    tdm_passes: int
    utilization: float
    processing_ns: float
    writeback_ns: float
    energy_pj: dict = field(default_factory=dict)

    @property
    def total_energy_pj(self) -> float:
        return sum(self.energy_pj.values())

    @property
    def total_latency_ns(self) -> float:
        return self.processing_ns + self.writeback_ns


def _w_ns_to_pj(watts: float, ns: float) -> float:
    return watts * ns * 1000.0


def layer_latency(plan, timing: TimingParams, geometry: MemoryGeometry) -> tuple[float, float]:
    """(processing_ns, writeback_ns) of one plan.

    Processing serializes the compute slots (each one optical readout plus
    one pipelined conversion), the digital partial-sum adds (one adder per
    wavelength per lane), and the staging reads for the driven operand.
    Writeback covers the controller transfer/nonlinearity pass plus the
    row programming pulses, batched by the write parallelism.
    """
    cols = geometry.cols_per_subarray
    slot_ns = timing.pim_cycle_ns + timing.adc_conversion_ns
    add_lanes = max(1, plan.lanes) * cols
    processing = (
        plan.slot_count * slot_ns
        + math.ceil(plan.adds / add_lanes) * timing.aggregation_add_ns
        + math.ceil(plan.mem_fetch_cells / cols) * timing.mem_read_ns
    )
    wb = plan.writeback
    bits_out = wb.cells_to_program * geometry.bit_density
    writeback = (
        bits_out * timing.eoe_transfer_ns_per_bit
        + math.ceil(wb.row_writes / timing.write_parallel_rows)
        * (timing.opcm_write_pulse_ns if wb.row_writes else 0.0)
    )
    return processing, writeback


def layer_energy(
    plan,
    energy: EnergyParams,
    power: PowerParams,
    timing: TimingParams,
    geometry: MemoryGeometry,
) -> dict:
    """Additive per-category energy (pJ) of one plan.

    Event-priced components use the per-event table (cell reads/writes,
    conversions, laser drives); bias/static components integrate power
    over the active time.
    """
    cols = geometry.cols_per_subarray
    cell_bits = geometry.bit_density
    processing_ns, writeback_ns = layer_latency(plan, timing, geometry)
    cycle_ns = timing.pim_cycle_ns
    breakdown = {
        "opcm_read": (plan.products + plan.mem_fetch_cells) * energy.opcm_read_pj,
        "opcm_write": plan.writeback.cells_to_program * energy.opcm_write_pj,
        "adc": plan.bins * energy.adc_conversion_pj,
        "dac": plan.products * cell_bits * energy.dac_pj_per_bit,
        "mdl": plan.products * power.mdl_mw_per_laser * cycle_ns,
        "eo_tuning": 2.0 * power.eo_tuning_mw_per_mr * cycle_ns * plan.products / cols,
        "soa": power.soa_bias_mw * 2.0 * max(1, plan.lanes) * processing_ns,
        "aggregation": (
            _w_ns_to_pj(power.aggregation_w_per_lane * max(1, plan.lanes), processing_ns)
            + plan.adds * energy.sram_access_pj
        ),
        "eoe": _w_ns_to_pj(power.eoe_base_w, processing_ns + writeback_ns),
    }
    return breakdown


def layer_result(
    plan,
    timing: TimingParams,
    energy: EnergyParams,
    power: PowerParams,
    geometry: MemoryGeometry,
) -> LayerResult:
    processing, writeback = layer_latency(plan, timing, geometry)
    return LayerResult(
        layer_name=plan.layer_name,
        kind=plan.kind,
        mac_count=plan.mac_count,
        slot_count=plan.slot_count,
        tdm_passes=plan.tdm_passes,
        utilization=plan.utilization,
        processing_ns=processing,
        writeback_ns=writeback,
        energy_pj=layer_energy(plan, energy, power, timing, geometry),
    )


def power_breakdown(
    geometry: MemoryGeometry,
    power: PowerParams,
    mode: str = "both",
) -> dict:
    """Steady-state power per category (W) plus ``total``.

    Laser arrays and the ring tuning scale linearly with the group count;
    the aggregation stage carries a per-lane cost plus a demultiplexing
    term growing as G*log2(G), and the electrical-optical interface
    likewise.  ``memory_only`` zeroes the compute-side categories,
    ``pim_only`` drops the external memory laser.
    """
    if mode not in ("memory_only", "pim_only", "both"):
        raise ValueError(f"unknown power mode {mode!r}")
    g = geometry.group_count
    lanes = math.ceil(g / 4)
    glg = g * math.log2(g) if g > 1 else 0.0
    lasers = geometry.banks * g * geometry.subarray_grid * geometry.cols_per_subarray
    rings = 2 * geometry.banks * g * geometry.subarray_grid
    soas = 2 * geometry.banks * geometry.subarray_grid
    pim = mode in ("pim_only", "both")
    mem = mode in ("memory_only", "both")
    breakdown = {
        "external_laser": power.external_laser_w if mem else 0.0,
        "mdl": power.mdl_mw_per_laser * lasers / 1000.0 if pim else 0.0,
        "eo_tuning": power.eo_base_w
        + (power.eo_tuning_mw_per_mr * rings / 1000.0 if pim else 0.0),
        "soa": power.soa_bias_mw * soas / 1000.0,
        "aggregation": (
            power.aggregation_w_per_lane * lanes + power.aggregation_demux_w * glg
        )
        if pim
        else 0.0,
        "eoe": power.eoe_base_w + (power.eoe_demux_w * glg if pim else 0.0),
        "sram": power.sram_w,
    }
    breakdown["total"] = sum(v for k, v in breakdown.items() if k != "total")
    return breakdown


def peak_mac_throughput(geometry: MemoryGeometry, timing: TimingParams) -> float:
    """Peak MAC/s: every group's active subarray row, all wavelengths, each cycle."""
    per_cycle = (
        geometry.banks
        * geometry.group_count
        * geometry.subarray_grid
        * geometry.cols_per_subarray
    )
    return per_cycle * timing.pim_cycle_hz


@dataclass(frozen=True)
class DseRow:
    group_count: int
    power_w: float
    normalized_power: float
    mac_throughput: float
    rows_available: int
    mac_per_watt: float


def dse_grouping(
    geometry: MemoryGeometry,
    power: PowerParams,
    timing: TimingParams,
    candidates=(1, 2, 4, 8, 16, 32, 64),
) -> list[DseRow]:
    """Sweep the subarray-group count; power normalized to the 16-group point."""
    from dataclasses import replace

    for g in candidates:
        if geometry.subarray_grid % g != 0:
            raise ValueError(f"candidate {g} does not divide {geometry.subarray_grid}")
    ref_geo = replace(geometry, group_count=min(16, geometry.subarray_grid))
    ref_power = power_breakdown(ref_geo, power, "both")["total"]
    rows = []
    for g in candidates:
        geo = replace(geometry, group_count=g)
        total = power_breakdown(geo, power, "both")["total"]
        throughput = peak_mac_throughput(geo, timing)
        rows.append(
            DseRow(
                group_count=g,
                power_w=total,
                normalized_power=total / ref_power,
                mac_throughput=throughput,
                rows_available=geometry.subarray_grid - g,
                mac_per_watt=throughput / total,
            )
        )
    return rows


def efficiency_metrics(
    results: list[LayerResult],
    total_power_w: float,
    operand_bits: int,
) -> tuple[float, float, float]:
    """(energy per bit J/bit, frames/s, frames/s/W) for one inference.

    Bits processed are counted as mac_count * operand_bits (convention:
    each MAC consumes one operand of the declared width).
    """
    total_pj = sum(r.total_energy_pj for r in results)
    total_ns = sum(r.total_latency_ns for r in results)
    bits = sum(r.mac_count for r in results) * operand_bits
    if bits == 0 or total_ns == 0 or total_power_w == 0:
        raise ValueError("efficiency metrics need nonzero work, latency, and power")
    epb = total_pj * 1e-12 / bits
    fps = 1.0e9 / total_ns
    return epb, fps, fps / total_power_w


@dataclass
class NetworkRun:
    """Everything produced by mapping (and optionally executing) a network."""

    network: object
    plans: list
    results: list[LayerResult]
    outputs: dict | None = None
    schedule_sample: object | None = None

    @property
    def total_processing_ns(self) -> float:
        return sum(r.processing_ns for r in self.results)

    @property
    def total_writeback_ns(self) -> float:
        return sum(r.writeback_ns for r in self.results)

    @property
    def total_energy_pj(self) -> float:
        return sum(r.total_energy_pj for r in self.results)

    @property
    def total_mac_count(self) -> int:
        return sum(r.mac_count for r in self.results)

    @property
    def total_slot_count(self) -> int:
        return sum(r.slot_count for r in self.results)
