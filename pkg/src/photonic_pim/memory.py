"""Addressable phase-change main-memory model.

Covers the memory geometry, address <-> cell-location codec, optical
read-path construction with loss budgeting and amplifier insertion, laser
power sizing, read/write event accounting, and the partition of subarray
rows between in-memory compute and ordinary memory traffic.

Geometry recap: ``banks`` banks, each a ``subarray_grid x subarray_grid``
grid of subarrays, each subarray ``rows_per_subarray x cols_per_subarray``
multi-level cells.  The subarray rows of a bank are divided into
``group_count`` groups; one subarray row per group is compute-active at a
time while the rest keep serving memory traffic.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .devices import EnergyParams, LossParams, OpcmCellModel
from .errors import MemoryConflictError

__all__ = [
    "MemoryGeometry",
    "CellLocation",
    "PathElement",
    "SignalPath",
    "BankState",
    "MemEvent",
    "capacity_bits",
    "capacity_bytes",
    "available_memory_rows",
    "decode_address",
    "encode_address",
    "build_read_path",
    "path_loss_db",
    "element_loss_db",
    "required_laser_power_dbm",
    "propagation_time_ns",
    "mem_access",
    "mem_access_retry",
    "export_trace_csv",
]

PATH_ELEMENT_KINDS = frozenset(
    {
        "directional_coupler",
        "mr_drop",
        "mr_through",
        "eo_mr_drop",
        "eo_mr_through",
        "propagation",
        "bend",
        "crossing",
        "gst_switch",
        "soa",
        "cell",
    }
)

# Group velocity used to turn propagation length into time (n_g ~ 4.2).
_LIGHT_SPEED_CM_PER_NS = 29.9792458 / 4.2


@dataclass(frozen=True)
class MemoryGeometry:
    """Physical organization of the optical main memory."""

    banks: int = 4
    subarray_grid: int = 64
    rows_per_subarray: int = 256
    cols_per_subarray: int = 512
    bit_density: int = 4
    group_count: int = 16
    pitch_cm: float = 0.05

    def __post_init__(self) -> None:
        if not (1 <= self.banks <= 4):
            raise ValueError("banks must be in 1..4 (mode-division degree bound)")
        for name in ("subarray_grid", "rows_per_subarray", "cols_per_subarray"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.bit_density < 1:
            raise ValueError("bit_density must be >= 1")
        if not (1 <= self.group_count <= self.subarray_grid):
            raise ValueError("group_count must be in 1..subarray_grid")
        if self.subarray_grid % self.group_count != 0:
            raise ValueError("groups must partition the subarray rows evenly")
        if self.pitch_cm <= 0:
            raise ValueError("pitch_cm must be > 0")

    @property
    def subarray_rows_per_group(self) -> int:
        return self.subarray_grid // self.group_count

    def pim_active_row(self, group: int) -> int:
        """Subarray row reserved for compute in ``group`` (first of its block)."""
        if not (0 <= group < self.group_count):
            raise ValueError(f"group {group} out of range")
        return group * self.subarray_rows_per_group


def capacity_bits(geometry: MemoryGeometry) -> int:
    g = geometry
    return (
        g.banks
        * g.subarray_grid
        * g.subarray_grid
        * g.rows_per_subarray
        * g.cols_per_subarray
        * g.bit_density
    )


def capacity_bytes(geometry: MemoryGeometry) -> int:
    bits = capacity_bits(geometry)
    if bits % 8 != 0:
        raise ValueError("capacity is not byte-aligned for this geometry")
    return bits // 8


def available_memory_rows(geometry: MemoryGeometry) -> int:
    """Subarray rows left for memory traffic: one row per group is compute-active."""
    return geometry.subarray_grid - geometry.group_count


@dataclass(frozen=True)
class CellLocation:
    bank: int
    subarray_row: int
    subarray_col: int
    row: int
    col: int

    def validate(self, geometry: MemoryGeometry) -> None:
        g = geometry
        ok = (
            0 <= self.bank < g.banks
            and 0 <= self.subarray_row < g.subarray_grid
            and 0 <= self.subarray_col < g.subarray_grid
            and 0 <= self.row < g.rows_per_subarray
            and 0 <= self.col < g.cols_per_subarray
        )
        if not ok:
            raise ValueError(f"{self} outside geometry bounds")


def decode_address(byte_address: int, geometry: MemoryGeometry) -> CellLocation:
    """Map a byte address to the location of its first cell.

    Bit-slicing order, most to least significant:
    bank | subarray_row | subarray_col | row | column.  The returned
    ``col`` is the starting column of the byte's cells (a byte spans
    ``8 / bit_density`` cells).
    """
    g = geometry
    if byte_address < 0 or byte_address >= capacity_bytes(g):
        raise ValueError(f"address {byte_address} out of range")
    if 8 % g.bit_density != 0:
        raise ValueError("bit_density must divide 8 for byte addressing")
    cells_per_byte = 8 // g.bit_density
    bytes_per_row = g.cols_per_subarray // cells_per_byte
    a, byte_in_row = divmod(byte_address, bytes_per_row)
    a, row = divmod(a, g.rows_per_subarray)
    a, scol = divmod(a, g.subarray_grid)
    bank, srow = divmod(a, g.subarray_grid)
    return CellLocation(bank, srow, scol, row, byte_in_row * cells_per_byte)


def encode_address(location: CellLocation, geometry: MemoryGeometry) -> int:
    """Inverse of :func:`decode_address`; ``col`` must be byte-aligned."""
    g = geometry
    location.validate(g)
    cells_per_byte = 8 // g.bit_density
    if location.col % cells_per_byte != 0:
        raise ValueError("column is not byte-aligned")
    bytes_per_row = g.cols_per_subarray // cells_per_byte
    a = location.bank
    a = a * g.subarray_grid + location.subarray_row
    a = a * g.subarray_grid + location.subarray_col
    a = a * g.rows_per_subarray + location.row
    return a * bytes_per_row + location.col // cells_per_byte


@dataclass(frozen=True)
class PathElement:
    kind: str
    length_cm: float = 0.0
    quarter_turns: int = 1

    def __post_init__(self) -> None:
        if self.kind not in PATH_ELEMENT_KINDS:
            raise ValueError(f"unknown path element kind {self.kind!r}")
        if self.kind == "propagation" and self.length_cm <= 0.0:
            raise ValueError("propagation length must be > 0 cm")


SignalPath = list  # list[PathElement]; ordered source -> detector


def element_loss_db(
    element: PathElement,
    loss: LossParams,
    cell: OpcmCellModel | None = None,
) -> float:
    """Signed dB contribution of one element (amplifier gain is negative).

    The storage cell itself is budgeted at its worst case, the fully
    crystalline (lowest transmission) state, so the laser budget holds for
    every stored level.
    """
    kind = element.kind
    if kind == "directional_coupler":
        return loss.directional_coupler_db
    if kind == "mr_drop":
        return loss.mr_drop_db
    if kind == "mr_through":
        return loss.mr_through_db
    if kind == "eo_mr_drop":
        return loss.eo_mr_drop_db
    if kind == "eo_mr_through":
        return loss.eo_mr_through_db
    if kind == "propagation":
        return loss.propagation_db_per_cm * element.length_cm
    if kind == "bend":
        return loss.bend_db_per_90deg * element.quarter_turns
    if kind == "crossing":
        return loss.crossing_db
    if kind == "gst_switch":
        return loss.gst_switch_db
    if kind == "soa":
        return -loss.soa_gain_db
    if kind == "cell":
        floor = cell.t_crystalline if cell is not None else OpcmCellModel().t_crystalline
        if floor <= 0.0:
            raise ValueError("cell transmission floor must be > 0 for budgeting")
        return -10.0 * math.log10(floor)
    raise ValueError(f"unknown path element kind {kind!r}")


def path_loss_db(
    path: SignalPath,
    loss: LossParams,
    cell: OpcmCellModel | None = None,
) -> float:
    """Net loss of a path in dB; additive over elements, gains subtract."""
    return sum(element_loss_db(el, loss, cell) for el in path)


def propagation_time_ns(path: SignalPath) -> float:
    length = sum(el.length_cm for el in path if el.kind == "propagation")
    return length / _LIGHT_SPEED_CM_PER_NS


def _with_soas(
    elements: list[PathElement], loss: LossParams, cell, soa_interval_db: float
) -> list[PathElement]:
    """Insert one amplifier each time the running loss crosses the interval.

    Loss-aware amplification: banks and subarrays have constant losses
    once designed, so amplifier positions are fixed per geometry.
    """
    out: list[PathElement] = []
    running = 0.0
    for el in elements:
        out.append(el)
        running += element_loss_db(el, loss, cell)
        if running >= soa_interval_db:
            out.append(PathElement("soa"))
            running -= loss.soa_gain_db
    return out


def build_read_path(
    location: CellLocation,
    geometry: MemoryGeometry,
    loss: LossParams,
    source: str = "local_mdl",
    cell: OpcmCellModel | None = None,
    soa_interval_db: float = 20.0,
) -> SignalPath:
    """Deterministic optical path for reading one cell.

    Composition rule (fixed per geometry):
      - external_laser: bank switch, subarray switch, routing propagation
        proportional to the subarray's grid position, access ring (drop),
        the cell, readout ring (drop), then the readout propagation with
        one waveguide crossing per subarray column passed.
      - local_mdl: a directional coupler replaces the external routing
        chain; the path starts at the subarray itself.

    Amplifiers are inserted whenever the accumulated loss reaches
    ``soa_interval_db`` (default: one amplifier per full gain's worth of
    loss; the placement rule is configurable).
    """
    location.validate(geometry)
    if source not in ("external_laser", "local_mdl"):
        raise ValueError(f"unknown source {source!r}")
    hops = location.subarray_row + location.subarray_col
    route_cm = geometry.pitch_cm * (1 + hops)
    elements: list[PathElement] = []
    if source == "external_laser":
        elements.append(PathElement("gst_switch"))  # bank select
        elements.append(PathElement("gst_switch"))  # subarray select
        elements.append(PathElement("propagation", length_cm=route_cm))
        elements.append(PathElement("bend"))
    else:
        elements.append(PathElement("directional_coupler"))
    elements.append(PathElement("eo_mr_drop"))  # access control
    elements.append(PathElement("cell"))
    elements.append(PathElement("eo_mr_drop"))  # readout coupling
    readout_cm = geometry.pitch_cm * (1 + location.subarray_col)
    elements.append(PathElement("propagation", length_cm=readout_cm))
    for _ in range(location.subarray_col):
        elements.append(PathElement("crossing"))
    return _with_soas(elements, loss, cell, soa_interval_db)


def required_laser_power_dbm(
    path: SignalPath,
    loss: LossParams,
    pd_sensitivity_dbm: float = -20.0,
    margin_db: float = 3.0,
    cell: OpcmCellModel | None = None,
) -> float:
    """Laser power needed so the detector still sees its sensitivity floor."""
    total = path_loss_db(path, loss, cell)
    if not math.isfinite(total):
        raise ValueError("path loss is not finite")
    return pd_sensitivity_dbm + total + margin_db


@dataclass(frozen=True)
class MemEvent:
    kind: str
    location: CellLocation
    latency_ns: float
    energy_pj: float


@dataclass
class BankState:
    """Mutable per-bank state: compute-reserved rows and stored cell levels.

    Storage is allocated lazily per subarray, so even the 1 GiB default
    geometry costs nothing until rows are actually written.  Mutate one
    bank from one thread at a time; the geometry itself is shared and
    immutable.
    """

    geometry: MemoryGeometry
    pim_running: bool = False
    trace: list = field(default_factory=list)

    def __post_init__(self) -> None:
        self._arrays: dict[tuple[int, int, int], np.ndarray] = {}
        self._pim_rows: set[tuple[int, int]] = set()

    def start_pim(self) -> None:
        """Flag one subarray row per group, in every bank, as compute-active."""
        self._pim_rows = {
            (bank, self.geometry.pim_active_row(g))
            for bank in range(self.geometry.banks)
            for g in range(self.geometry.group_count)
        }
        self.pim_running = True

    def stop_pim(self) -> None:
        self._pim_rows = set()
        self.pim_running = False

    def is_pim_active(self, bank: int, subarray_row: int) -> bool:
        return (bank, subarray_row) in self._pim_rows

    def pim_active_count(self) -> int:
        return len(self._pim_rows)

    def _subarray(self, bank: int, srow: int, scol: int) -> np.ndarray:
        key = (bank, srow, scol)
        arr = self._arrays.get(key)
        if arr is None:
            g = self.geometry
            arr = np.zeros((g.rows_per_subarray, g.cols_per_subarray), dtype=np.int64)
            self._arrays[key] = arr
        return arr


def mem_access(
    state: BankState,
    location: CellLocation,
    kind: str,
    payload: np.ndarray | None = None,
    *,
    loss: LossParams | None = None,
    energy: EnergyParams | None = None,
    cell: OpcmCellModel | None = None,
    mem_read_ns: float = 5.0,
    write_pulse_ns: float = 100.0,
    length: int | None = None,
) -> MemEvent:
    """One row-segment read or write through the external-laser path.

    Reads return the stored levels from ``location.col`` onward and cost
    path propagation + ring switching/demodulation time.  Writes program
    ``payload`` levels and charge the write energy only for cells whose
    level actually changes.  Accesses to a compute-active subarray row are
    refused (the compute schedule owns that row; refusing keeps both
    streams uncorrupted).
    """
    geometry = state.geometry
    location.validate(geometry)
    loss = loss or LossParams()
    energy = energy or EnergyParams()
    cell = cell or OpcmCellModel()
    if state.is_pim_active(location.bank, location.subarray_row):
        raise MemoryConflictError(
            f"subarray row (bank {location.bank}, row {location.subarray_row}) "
            "is reserved for in-memory compute"
        )
    arr = state._subarray(location.bank, location.subarray_row, location.subarray_col)
    path = build_read_path(location, geometry, loss, source="external_laser", cell=cell)
    prop_ns = propagation_time_ns(path)

    if kind == "read":
        n = length if length is not None else geometry.cols_per_subarray - location.col
        if location.col + n > geometry.cols_per_subarray:
            raise ValueError("read runs past the end of the row")
        data = arr[location.row, location.col : location.col + n].copy()
        latency = prop_ns + mem_read_ns
        event = MemEvent("read", location, latency, energy.opcm_read_pj * n)
        state.trace.append(event)
        return event

    if kind == "write":
        if payload is None:
            raise ValueError("write requires a payload")
        payload = np.asarray(payload, dtype=np.int64)
        if np.any(payload < 0) or np.any(payload >= cell.levels):
            raise ValueError("payload levels out of range for the cell model")
        end = location.col + payload.size
        if end > geometry.cols_per_subarray:
            raise ValueError("write runs past the end of the row")
        target = arr[location.row, location.col : end]
        changed = int(np.count_nonzero(target != payload))
        pj = changed * cell.write_energy_pj
        target[:] = payload
        latency = prop_ns + write_pulse_ns
        event = MemEvent("write", location, latency, pj)
        state.trace.append(event)
        return event

    raise ValueError(f"unknown access kind {kind!r}")


def mem_access_retry(
    state: BankState,
    location: CellLocation,
    kind: str,
    payload: np.ndarray | None = None,
    *,
    stall_ns: float = 100.0,
    max_attempts: int = 10,
    on_stall=None,
    **kwargs,
) -> MemEvent:
    """Stall-and-retry wrapper around :func:`mem_access` for throughput runs.

    Each refused attempt adds ``stall_ns`` to the eventual access latency
    and invokes ``on_stall(state, attempt)`` so the caller can advance the
    compute schedule (e.g. rotate or release the reserved rows).  Raises
    the underlying conflict after ``max_attempts`` refusals.
    """
    stalled = 0.0
    for attempt in range(max_attempts):
        try:
            event = mem_access(state, location, kind, payload, **kwargs)
        except MemoryConflictError:
            stalled += stall_ns
            if on_stall is not None:
                on_stall(state, attempt)
            continue
        if stalled:
            event = MemEvent(event.kind, event.location,
                             event.latency_ns + stalled, event.energy_pj)
            state.trace[-1] = event
        return event
    raise MemoryConflictError(
        f"access to (bank {location.bank}, row {location.subarray_row}) still "
        f"refused after {max_attempts} attempts"
    )


def export_trace_csv(state: BankState, path: str) -> None:
    """Dump the access trace as CSV: event, location, latency_ns, energy_pj."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["event", "bank", "subarray_row", "subarray_col", "row", "col",
             "latency_ns", "energy_pj"]
        )
        for ev in state.trace:
            loc = ev.location
            writer.writerow(
                [ev.kind, loc.bank, loc.subarray_row, loc.subarray_col, loc.row,
                 loc.col, f"{ev.latency_ns:.6f}", f"{ev.energy_pj:.6f}"]
            )
