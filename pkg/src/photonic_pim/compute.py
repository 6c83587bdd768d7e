"""Functional semantics of the in-memory MAC path.

One compute step works like this: every subarray of a group drives its
microdisk lasers with an input vector (one amplitude per wavelength), the
light passes through the subarray's selected stored row (per-wavelength
multiply by cell transmission), and all subarrays of the group share one
readout bus where equal wavelengths sum their powers (the accumulate).
The per-bank aggregation unit then photodetects per wavelength, corrects
the crystalline-floor offset, converts with an ADC, and finishes multi-bin
/ multi-pass sums digitally, including the shift-and-add recombination of
nibble-sliced wide operands.

The hard safety rule throughout: products may share a (group, wavelength)
sum only if they belong to the same output element.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .devices import OpcmCellModel, transmission_of_level
from .errors import InterferenceError

__all__ = [
    "GroupMacBatch",
    "AggregationConfig",
    "ModeAssignment",
    "SafetyReport",
    "interfere_mac",
    "bias_correct",
    "adc_quantize",
    "nibble_decompose",
    "nibble_planes",
    "shift_add_combine",
    "fold_zero_points",
    "assign_modes",
    "check_interference_safety",
    "schedule_to_json",
]

NO_TAG = -1


@dataclass
class GroupMacBatch:
    """Operands of one compute time-slot inside one subarray group.

    ``stored`` holds the selected row levels per participating subarray,
    ``inputs`` the laser amplitudes driven against them (as quantized
    levels), and ``tags`` the output-element id each product belongs to
    (``NO_TAG`` marks idle lanes).  All arrays are (n_subarrays,
    n_wavelengths).
    """

    group: int
    stored: np.ndarray
    inputs: np.ndarray
    tags: np.ndarray

    def __post_init__(self) -> None:
        self.stored = np.asarray(self.stored)
        self.inputs = np.asarray(self.inputs)
        self.tags = np.asarray(self.tags, dtype=np.int64)
        if not (self.stored.shape == self.inputs.shape == self.tags.shape):
            raise ValueError("stored/inputs/tags must share one shape")
        if self.stored.ndim != 2:
            raise ValueError("batch arrays must be 2-D (subarrays x wavelengths)")

    @property
    def active(self) -> np.ndarray:
        return self.tags != NO_TAG

    def wavelength_tags(self) -> np.ndarray:
        """Per-wavelength output tag; raises if a wavelength mixes tags."""
        n_wl = self.tags.shape[1]
        out = np.full(n_wl, NO_TAG, dtype=np.int64)
        for j in range(n_wl):
            col = self.tags[:, j]
            present = col[col != NO_TAG]
            if present.size == 0:
                continue
            uniq = np.unique(present)
            if uniq.size > 1:
                raise InterferenceError(
                    f"wavelength {j} in group {self.group} carries products for "
                    f"output elements {sorted(int(u) for u in uniq)}"
                )
            out[j] = uniq[0]
        return out


def interfere_mac(
    batch: GroupMacBatch,
    cell: OpcmCellModel,
    exact_mode: bool = False,
):
    """Per-wavelength accumulated products of one batch.

    For wavelength j the bus carries
    ``sum_i T(stored[i, j]) * inputs[i, j] / (levels - 1)`` over the
    driven subarrays i.  With the ideal cell map and ``exact_mode`` the
    result is rescaled by ``(levels - 1)^2`` and returned as exact
    integers equal to ``sum_i stored[i, j] * inputs[i, j]``.

    Raises :class:`InterferenceError` when a wavelength mixes products of
    different output elements.
    """
    batch.wavelength_tags()  # safety check
    mask = batch.active
    den = cell.levels - 1
    trans = transmission_of_level(cell, batch.stored)
    amps = batch.inputs / den
    contributions = np.where(mask, trans * amps, 0 * trans)
    sums = contributions.sum(axis=0)
    if not exact_mode:
        return sums
    if cell.mode != "ideal":
        raise ValueError("exact_mode requires the ideal cell map")
    scaled = sums * (den * den)
    if np.asarray(scaled).dtype == object:
        return scaled
    out = np.rint(np.asarray(scaled, dtype=float))
    return out.astype(np.int64)


def bias_correct(
    raw: np.ndarray,
    batch: GroupMacBatch,
    cell: OpcmCellModel,
) -> np.ndarray:
    """Remove the crystalline-floor offset from physical-mode sums.

    A physical cell transmits ``t_c + ideal * contrast``, so each raw sum
    carries an offset of ``t_c * sum(amplitudes)`` plus a ``contrast``
    scale.  Subtracting the offset (computable digitally from the known
    inputs) and dividing by the contrast recovers the ideal-map value:

        corrected = (raw - t_c * sum_i inputs[i] / (levels-1)) / contrast
    """
    den = cell.levels - 1
    amp_sum = np.where(batch.active, batch.inputs / den, 0.0).sum(axis=0)
    return (np.asarray(raw, dtype=float) - cell.t_crystalline * amp_sum) / cell.contrast


@dataclass(frozen=True)
class AggregationConfig:
    """Digital aggregation behavior: ADC width/scale and exactness."""

    adc_bits: int = 5
    adc_full_scale: float | None = None
    exact_mode: bool = True
    bias_correction: bool = True

    def __post_init__(self) -> None:
        if self.adc_bits < 1:
            raise ValueError("adc_bits must be >= 1")
        if self.adc_full_scale is not None and self.adc_full_scale <= 0:
            raise ValueError("adc_full_scale must be > 0")


def adc_quantize(value, config: AggregationConfig):
    """Quantize a nonnegative analog value to an ADC code.

    ``exact_mode`` bypasses quantization and returns integer values
    unchanged (the functional-verification default).  Otherwise the code
    is ``floor(value / full_scale * (2^bits - 1))`` clamped to range.
    """
    arr = np.asarray(value, dtype=float)
    if np.any(arr < 0):
        raise ValueError("ADC input must be >= 0")
    if config.exact_mode:
        return np.rint(arr).astype(np.int64) if arr.ndim else int(round(float(arr)))
    if config.adc_full_scale is None:
        raise ValueError("adc_full_scale is required outside exact mode")
    top = (1 << config.adc_bits) - 1
    codes = np.floor(arr / config.adc_full_scale * top)
    codes = np.clip(codes, 0, top).astype(np.int64)
    return codes if arr.ndim else int(codes)


def nibble_decompose(value: int, operand_bits: int, cell_bits: int) -> list[tuple[int, int]]:
    """Split ``value`` into cell-width nibbles, low first: [(nibble, shift), ...].

    Recomposition invariant: ``sum(n << s) == value``.
    """
    if operand_bits % cell_bits != 0:
        raise ValueError("operand_bits must be a multiple of cell_bits")
    if not (0 <= value < (1 << operand_bits)):
        raise ValueError(f"value {value} does not fit in {operand_bits} bits")
    mask = (1 << cell_bits) - 1
    return [
        ((value >> shift) & mask, shift)
        for shift in range(0, operand_bits, cell_bits)
    ]


def nibble_planes(arr: np.ndarray, operand_bits: int, cell_bits: int) -> list[np.ndarray]:
    """Vectorized nibble split of an integer array, low plane first."""
    if operand_bits % cell_bits != 0:
        raise ValueError("operand_bits must be a multiple of cell_bits")
    arr = np.asarray(arr, dtype=np.int64)
    if np.any(arr < 0) or np.any(arr >= (1 << operand_bits)):
        raise ValueError(f"values do not fit in {operand_bits} bits")
    mask = (1 << cell_bits) - 1
    return [(arr >> s) & mask for s in range(0, operand_bits, cell_bits)]


def shift_add_combine(partial_sums) -> int:
    """Recombine shifted partial sums: ``sum(value << shift)``, exact.

    Python integers keep this overflow-free for any operand width.
    """
    total = 0
    for value, shift in partial_sums:
        if shift < 0:
            raise ValueError("shifts must be >= 0")
        total += int(value) << int(shift)
    return total


def fold_zero_points(
    acc: int, input_sum: int, weight_sum: int, n_products: int,
    input_zero_point: int = 0, weight_zero_point: int = 0,
) -> int:
    """Digitally fold affine zero-points out of an unsigned accumulation.

    With unsigned operands ``a = a' + zp_a`` and ``w = w' + zp_w`` the true
    signed dot product is recovered as
    ``acc - zp_w * sum(a) - zp_a * sum(w) + n * zp_a * zp_w``.
    """
    return (
        acc
        - weight_zero_point * input_sum
        - input_zero_point * weight_sum
        + n_products * input_zero_point * weight_zero_point
    )


@dataclass(frozen=True)
class ModeAssignment:
    """Mapping of subarray groups onto (multimode lane, spatial mode)."""

    lanes: int
    mapping: dict = field(default_factory=dict)

    def lane_mode(self, group: int) -> tuple[int, int]:
        return self.mapping[group]


def assign_modes(group_count: int, max_modes: int = 4) -> ModeAssignment:
    """Assign each group a (lane, mode); modes are reused across lanes.

    Only four spatial modes coexist per waveguide, so ``ceil(G / 4)``
    parallel lanes carry the groups and mode g%4 repeats per lane.
    """
    if not (1 <= group_count <= 64):
        raise ValueError("group_count must be in 1..64")
    lanes = math.ceil(group_count / max_modes)
    mapping = {g: (g // max_modes, g % max_modes) for g in range(group_count)}
    return ModeAssignment(lanes=lanes, mapping=mapping)


@dataclass(frozen=True)
class SafetyReport:
    ok: bool
    slot: int | None = None
    group: int | None = None
    wavelength: int | None = None
    tags: tuple = ()

    def __str__(self) -> str:
        if self.ok:
            return "interference-safe"
        return (
            f"interference violation at slot {self.slot}, group {self.group}, "
            f"wavelength {self.wavelength}: output elements {list(self.tags)} "
            "share one wavelength sum"
        )


def schedule_to_json(schedule) -> list:
    """Schedule (list of slots of batches) as plain JSON-ready structures."""
    out = []
    for slot in schedule:
        out.append([
            {
                "group": int(b.group),
                "stored": b.stored.tolist(),
                "inputs": b.inputs.tolist(),
                "tags": b.tags.tolist(),
            }
            for b in slot
        ])
    return out


def check_interference_safety(schedule) -> SafetyReport:
    """Validate a whole schedule (list of slots, each a list of batches).

    Passes iff, for every (slot, group, wavelength), all contributing
    products carry one output-element tag.  Returns the first violating
    triple otherwise.
    """
    for t, slot in enumerate(schedule):
        by_group: dict[int, list[GroupMacBatch]] = {}
        for batch in slot:
            by_group.setdefault(batch.group, []).append(batch)
        for group, batches in by_group.items():
            n_wl = max(b.tags.shape[1] for b in batches)
            for j in range(n_wl):
                tags: set[int] = set()
                for b in batches:
                    if j >= b.tags.shape[1]:
                        continue
                    col = b.tags[:, j]
                    tags.update(int(x) for x in col[col != NO_TAG])
                if len(tags) > 1:
                    return SafetyReport(
                        ok=False, slot=t, group=group, wavelength=j,
                        tags=tuple(sorted(tags)),
                    )
    return SafetyReport(ok=True)
