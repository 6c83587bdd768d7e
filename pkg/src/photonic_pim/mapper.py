"""Lowering CNN layer graphs onto the in-memory compute substrate.

Convolutions run input-stationary: the feature map stays stored in the
memory rows of one subarray group and the kernel values are driven on the
microdisk lasers, so every kernel step is one optical pass.  Fully
connected layers run weight-stationary: the weight matrix is distributed
over subarrays and the activation vector is driven.

Placement rule (fixed, documented): feature-map row ``(y, c)`` of channel
group ``g`` gets the linear index ``n = g*H*C_g + y*C_g + (c mod C_g)``
and lives in subarray ``n mod 64`` at memory row ``n div 64``, occupying
columns ``0..W-1``.  All rows that must sum optically for one output
element are consecutive in ``n`` and therefore land in distinct subarrays
of one group.  Rows that feed overlapping kernel windows are shared per
wavelength, never duplicated.

A layer can spread across several (bank, group) lanes only when no two of
its output rows share an input row, i.e. when every consumer of the input
feature map has kernel height <= stride.  Overlapping-window convolutions
therefore occupy a single lane; fully connected layers split their output
neurons across all lanes.

Slot accounting is the idealized packing: one slot carries
``ceil(W_out / ceil(k_w / stride))`` disjoint kernel windows (any mix of
output rows/channels), times ``ceil(k_h*C_g / 64)`` vertical passes when a
window needs more rows than a group has subarrays, times the
``(operand_bits / cell_bits)^2`` nibble passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .compute import assign_modes
from .errors import ConfigError, MappingError
from .memory import MemoryGeometry

__all__ = [
    "LayerSpec",
    "NetworkSpec",
    "ResolvedLayer",
    "MappingPlan",
    "WritebackPlan",
    "ofm_dims",
    "pool_dims",
    "plan_tdm",
    "param_count",
    "build_network_plans",
    "map_conv_layer",
    "map_fc_layer",
    "requant_shift",
    "simulate_network",
]

COMPUTE_KINDS = ("conv", "fc")
DIGITAL_KINDS = ("activation", "pool", "add", "concat")


@dataclass(frozen=True)
class LayerSpec:
    """One layer of a network graph.

    ``from_layers`` names the producing layer(s); empty means "previous
    layer in the list".  Only the fields of the declared ``kind`` are
    meaningful.
    """

    name: str
    kind: str
    # conv
    out_channels: int = 0
    kernel: tuple[int, int] = (1, 1)
    stride: int = 1
    padding: int = 0
    groups: int = 1
    bias: bool = True
    # fc
    out_features: int = 0
    # activation / pool
    fn: str = "relu"
    op: str = "max"
    size: int = 2
    pool_stride: int = 0
    pool_padding: int = 0
    # graph
    from_layers: tuple[str, ...] = ()
    operand_bits: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in COMPUTE_KINDS + DIGITAL_KINDS:
            raise ConfigError(f"unknown layer kind {self.kind!r} in {self.name!r}")
        if self.kind == "conv":
            if self.out_channels < 1 or min(self.kernel) < 1:
                raise ConfigError(f"conv layer {self.name!r} has nonpositive dims")
            if self.stride < 1 or self.padding < 0 or self.groups < 1:
                raise ConfigError(f"conv layer {self.name!r} has invalid stride/pad/groups")
        if self.kind == "fc" and self.out_features < 1:
            raise ConfigError(f"fc layer {self.name!r} has nonpositive out_features")
        if self.kind == "pool" and (self.size < 1 or self.op not in ("max", "avg")):
            raise ConfigError(f"pool layer {self.name!r} is invalid")
        if self.kind == "activation" and self.fn not in ("relu", "identity"):
            raise ConfigError(f"activation {self.fn!r} not supported in {self.name!r}")

    @property
    def pool_step(self) -> int:
        return self.pool_stride if self.pool_stride else self.size


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    input_shape: tuple[int, int, int]  # (H, W, C)
    layers: tuple[LayerSpec, ...]
    declared_parameter_count: int | None = None
    operand_bits: int = 4
    notes: str = ""

    def __post_init__(self) -> None:
        if self.operand_bits not in (4, 8):
            raise ConfigError("operand_bits must be 4 or 8")
        names = [l.name for l in self.layers]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate layer names in network {self.name!r}")

    def layer_bits(self, layer: LayerSpec) -> int:
        return layer.operand_bits or self.operand_bits


def ofm_dims(
    input_shape: tuple[int, int, int], layer: LayerSpec
) -> tuple[int, int, int]:
    """Output (H, W, C) of a conv layer on ``input_shape``."""
    h, w, c_in = input_shape
    k_h, k_w = layer.kernel
    h_out = (h + 2 * layer.padding - k_h) // layer.stride + 1
    w_out = (w + 2 * layer.padding - k_w) // layer.stride + 1
    if h_out < 1 or w_out < 1:
        raise MappingError(
            f"conv {layer.name!r} yields nonpositive output dims ({h_out}x{w_out})"
        )
    if c_in % layer.groups or layer.out_channels % layer.groups:
        raise MappingError(f"conv {layer.name!r}: groups must divide both channel counts")
    return (h_out, w_out, layer.out_channels)


def pool_dims(input_shape: tuple[int, int, int], layer: LayerSpec) -> tuple[int, int, int]:
    h, w, c = input_shape
    step = layer.pool_step
    pad = layer.pool_padding
    h_out = (h + 2 * pad - layer.size) // step + 1
    w_out = (w + 2 * pad - layer.size) // step + 1
    if h_out < 1 or w_out < 1:
        raise MappingError(f"pool {layer.name!r} yields nonpositive output dims")
    return (h_out, w_out, c)


@dataclass
class ResolvedLayer:
    """Layer with its graph edges and tensor shapes resolved."""

    spec: LayerSpec
    index: int
    inputs: list[str]
    input_shape: tuple
    output_shape: tuple
    consumers: list[str] = field(default_factory=list)
    fused_into: str | None = None  # set on activation/pool folded upstream
    fused_ops: list[str] = field(default_factory=list)


def resolve_network(network: NetworkSpec) -> dict[str, ResolvedLayer]:
    """Walk the graph, infer shapes, and verify every edge is compatible."""
    resolved: dict[str, ResolvedLayer] = {}
    prev_name: str | None = None
    for idx, layer in enumerate(network.layers):
        sources = list(layer.from_layers)
        if not sources:
            if layer.kind in ("add", "concat"):
                raise ConfigError(f"{layer.kind} layer {layer.name!r} needs from_layers")
            sources = [prev_name]  # None means the network input
        for s in sources:
            if s is not None and s not in resolved:
                raise ConfigError(
                    f"layer {layer.name!r} consumes unknown layer {s!r}"
                )
        in_shapes = [
            resolved[s].output_shape if s is not None else network.input_shape
            for s in sources
        ]
        if layer.kind == "conv":
            in_shape = in_shapes[0]
            if len(in_shape) != 3:
                raise ConfigError(f"conv {layer.name!r} needs an image input")
            if in_shape[2] % layer.groups:
                raise MappingError(f"conv {layer.name!r}: groups do not divide channels")
            out_shape = ofm_dims(in_shape, layer)
        elif layer.kind == "fc":
            in_shape = in_shapes[0]
            feat = math.prod(in_shape)
            out_shape = (layer.out_features,)
            in_shape = (feat,)
        elif layer.kind == "activation":
            in_shape = in_shapes[0]
            out_shape = in_shape
        elif layer.kind == "pool":
            in_shape = in_shapes[0]
            if len(in_shape) != 3:
                raise ConfigError(f"pool {layer.name!r} needs an image input")
            out_shape = pool_dims(in_shape, layer)
        elif layer.kind == "add":
            if len(set(in_shapes)) != 1:
                pair = " vs ".join(str(s) for s in in_shapes)
                raise ConfigError(
                    f"shape mismatch at add {layer.name!r} "
                    f"(layers {' + '.join(sources)}): {pair}"
                )
            in_shape = in_shapes[0]
            out_shape = in_shape
        elif layer.kind == "concat":
            hw = {s[:2] for s in in_shapes}
            if len(hw) != 1:
                raise ConfigError(
                    f"shape mismatch at concat {layer.name!r} "
                    f"(layers {' + '.join(sources)}): {sorted(hw)}"
                )
            in_shape = in_shapes[0]
            out_shape = (*in_shapes[0][:2], sum(s[2] for s in in_shapes))
        else:  # pragma: no cover
            raise ConfigError(f"unhandled kind {layer.kind}")
        resolved[layer.name] = ResolvedLayer(
            spec=layer, index=idx, inputs=sources,
            input_shape=in_shape, output_shape=out_shape,
        )
        prev_name = layer.name
    for rl in resolved.values():
        for s in rl.inputs:
            if s is not None:
                resolved[s].consumers.append(rl.spec.name)
    # Detect an fc fed by a mismatched declared width early, with names.
    for rl in resolved.values():
        if rl.spec.kind == "fc":
            src = rl.inputs[0]
            src_shape = resolved[src].output_shape if src else None
            if src and math.prod(src_shape) != math.prod(rl.input_shape):
                raise ConfigError(
                    f"shape mismatch between layers {src!r} -> {rl.spec.name!r}"
                )
    return resolved


def param_count(network: NetworkSpec) -> int:
    """Total weight + bias element count over all layers."""
    resolved = resolve_network(network)
    total = 0
    for rl in resolved.values():
        layer = rl.spec
        if layer.kind == "conv":
            c_in = rl.input_shape[2]
            k_h, k_w = layer.kernel
            total += k_h * k_w * (c_in // layer.groups) * layer.out_channels
            if layer.bias:
                total += layer.out_channels
        elif layer.kind == "fc":
            total += rl.input_shape[0] * layer.out_features
            if layer.bias:
                total += layer.out_features
    return total


def plan_tdm(operand_bits: int, cell_bits: int) -> list[tuple[int, int, int]]:
    """Nibble-pass schedule: [(shift, stored_nibble, driven_nibble), ...].

    Every stored nibble interacts with every driven nibble, low shifts
    first, giving exactly ``(operand_bits / cell_bits)^2`` passes.
    """
    if operand_bits % cell_bits != 0:
        raise MappingError("operand width must be a multiple of the cell bit density")
    n = operand_bits // cell_bits
    passes = [
        (cell_bits * (i + j), i, j) for i in range(n) for j in range(n)
    ]
    passes.sort(key=lambda t: (t[0], t[1]))
    return passes


def requant_shift(max_products: int, operand_bits: int) -> int:
    """Right-shift that brings a worst-case accumulator back to operand range.

    Pipeline semantics: after bias and activation, outputs are requantized
    by ``clamp(acc >> shift, 0, 2^bits - 1)`` with the smallest shift that
    fits the worst-case sum of ``max_products`` full-scale products.
    """
    top = (1 << operand_bits) - 1
    worst = max(1, max_products) * top * top
    shift = 0
    while (worst >> shift) > top:
        shift += 1
    return shift


@dataclass(frozen=True)
class WritebackPlan:
    """What a layer programs back into memory once its outputs are final."""

    element_count: int
    cells_to_program: int
    row_writes: int
    cells_per_element: int = 1
    destination_lanes: int = 1

    def __post_init__(self) -> None:
        if self.cells_to_program > self.element_count * self.cells_per_element:
            raise ValueError(
                "writeback would program more cells than the outputs occupy"
            )


@dataclass
class MappingPlan:
    """Closed-form schedule statistics for one layer on the substrate."""

    layer_name: str
    kind: str
    lanes: int
    slot_count: int
    tdm_passes: int
    mac_count: int
    products: int        # nibble-granular optical products (= cell reads)
    bins: int            # single-tag wavelength sums (= ADC conversions)
    adds: int            # digital aggregation adds
    mem_fetch_cells: int  # electrical staging reads (kernels / activations)
    utilization: float
    writeback: WritebackPlan
    multi_lane_eligible: bool
    mode_assignment: object = None
    fused_ops: tuple = ()
    notes: str = ""

    @property
    def driven_events(self) -> int:
        return self.products

    def to_dict(self) -> dict:
        wb = self.writeback
        return {
            "layer": self.layer_name,
            "kind": self.kind,
            "lanes": self.lanes,
            "slot_count": self.slot_count,
            "tdm_passes": self.tdm_passes,
            "mac_count": self.mac_count,
            "products": self.products,
            "bins": self.bins,
            "adds": self.adds,
            "mem_fetch_cells": self.mem_fetch_cells,
            "utilization": self.utilization,
            "multi_lane_eligible": self.multi_lane_eligible,
            "fused_ops": list(self.fused_ops),
            "notes": self.notes,
            "writeback": {
                "element_count": wb.element_count,
                "cells_to_program": wb.cells_to_program,
                "row_writes": wb.row_writes,
                "cells_per_element": wb.cells_per_element,
            },
        }


def _cells_per_element(operand_bits: int, cell_bits: int) -> int:
    if operand_bits % cell_bits != 0:
        raise MappingError("operand width must be a multiple of the cell bit density")
    return operand_bits // cell_bits


def map_conv_layer(
    layer: LayerSpec,
    input_shape: tuple[int, int, int],
    geometry: MemoryGeometry,
    operand_bits: int = 4,
    lanes: int = 1,
) -> MappingPlan:
    """Input-stationary plan for one convolution.

    The kernel rows ride the laser wavelengths; products of one output
    element share wavelengths across the group's subarrays (channel and
    kernel-row accumulation in the waveguide) and its ``k_w`` per-column
    sums are finished digitally.
    """
    h, w, c_in = input_shape
    k_h, k_w = layer.kernel
    s_sub = geometry.subarray_grid
    cols = geometry.cols_per_subarray
    if k_w > cols:
        raise MappingError(
            f"conv {layer.name!r}: kernel width {k_w} exceeds the subarray row size {cols}"
        )
    if w + 2 * layer.padding > cols:
        raise MappingError(
            f"conv {layer.name!r}: feature rows of width {w} (+padding) exceed the "
            f"subarray row size {cols}"
        )
    h_out, w_out, c_out = ofm_dims(input_shape, layer)
    cpe = _cells_per_element(operand_bits, geometry.bit_density)
    tdm = cpe * cpe
    c_in_g = c_in // layer.groups
    rho = k_h * c_in_g                          # optically summed rows per window
    v_passes = -(-rho // s_sub)
    step = -(-k_w // layer.stride)              # disjoint-window stride in x
    windows_per_slot = max(1, -(-w_out // step))
    elements = h_out * w_out * c_out
    mac_count = elements * k_h * k_w * c_in_g
    lanes = max(1, lanes)
    elems_per_lane = -(-elements // lanes)
    slots = v_passes * tdm * -(-elems_per_lane // windows_per_slot)
    products = mac_count * tdm
    bins = elements * k_w * v_passes * tdm
    adds = elements * (k_w * v_passes * tdm - 1 + (1 if layer.bias else 0))
    weight_params = k_h * k_w * c_in_g * c_out + (c_out if layer.bias else 0)
    util = products / (slots * lanes * s_sub * cols)
    no_accum = rho == 1
    return MappingPlan(
        layer_name=layer.name,
        kind="conv",
        lanes=lanes,
        slot_count=slots,
        tdm_passes=tdm,
        mac_count=mac_count,
        products=products,
        bins=bins,
        adds=adds,
        mem_fetch_cells=weight_params * cpe,
        utilization=util,
        writeback=_writeback_for_elements(elements, (h_out, w_out, c_out), cpe, geometry),
        multi_lane_eligible=k_h <= layer.stride,
        mode_assignment=assign_modes(geometry.group_count),
        notes="no accumulation dimension; one product per wavelength" if no_accum else "",
    )


def map_fc_layer(
    layer: LayerSpec,
    in_features: int,
    geometry: MemoryGeometry,
    operand_bits: int = 4,
    lanes: int | None = None,
) -> MappingPlan:
    """Weight-stationary plan for a fully connected layer.

    Each output neuron's weights run down the subarrays (64 inputs sum per
    wavelength) and across ``ceil(in/64)`` columns; the same driven
    activation pattern serves every neuron scheduled in a slot, so neurons
    pack ``floor(cols / ceil(in/64))`` per slot and split freely across
    all (bank, group) lanes.
    """
    s_sub = geometry.subarray_grid
    cols = geometry.cols_per_subarray
    out_f = layer.out_features
    cpe = _cells_per_element(operand_bits, geometry.bit_density)
    tdm = cpe * cpe
    max_lanes = geometry.banks * geometry.group_count
    lanes = min(max_lanes, out_f) if lanes is None else max(1, lanes)
    cols_per_neuron = -(-in_features // s_sub)
    per_lane = -(-out_f // lanes)
    if cols_per_neuron <= cols:
        neurons_per_slot = cols // cols_per_neuron
        slots = tdm * -(-per_lane // neurons_per_slot)
    else:
        slots = tdm * per_lane * -(-cols_per_neuron // cols)
    mac_count = out_f * in_features
    products = mac_count * tdm
    bins = out_f * cols_per_neuron * tdm
    adds = out_f * (cols_per_neuron * tdm - 1 + (1 if layer.bias else 0))
    util = products / (slots * lanes * s_sub * cols)
    return MappingPlan(
        layer_name=layer.name,
        kind="fc",
        lanes=lanes,
        slot_count=slots,
        tdm_passes=tdm,
        mac_count=mac_count,
        products=products,
        bins=bins,
        adds=adds,
        mem_fetch_cells=in_features * cpe,
        utilization=util,
        writeback=_writeback_for_vector(out_f, cpe, geometry),
        multi_lane_eligible=True,
        mode_assignment=assign_modes(geometry.group_count),
    )


def _writeback_for_elements(
    elements: int, shape: tuple[int, int, int], cpe: int, geometry: MemoryGeometry
) -> WritebackPlan:
    h, w, c = shape
    return WritebackPlan(
        element_count=elements,
        cells_to_program=elements * cpe,
        row_writes=h * c * cpe,
        cells_per_element=cpe,
    )


def _writeback_for_vector(elements: int, cpe: int, geometry: MemoryGeometry) -> WritebackPlan:
    cells = elements * cpe
    return WritebackPlan(
        element_count=elements,
        cells_to_program=cells,
        row_writes=-(-cells // geometry.cols_per_subarray),
        cells_per_element=cpe,
    )


def _digital_plan(
    name: str, kind: str, written_shape, elements_in: int, cpe: int,
    geometry: MemoryGeometry, reads: int, adds: int = 0,
) -> MappingPlan:
    if written_shape is None:
        wb = WritebackPlan(0, 0, 0)
        elements = 0
    elif len(written_shape) == 3:
        elements = math.prod(written_shape)
        wb = _writeback_for_elements(elements, written_shape, cpe, geometry)
    else:
        elements = math.prod(written_shape)
        wb = _writeback_for_vector(elements, cpe, geometry)
    return MappingPlan(
        layer_name=name, kind=kind, lanes=1, slot_count=0, tdm_passes=1,
        mac_count=0, products=0, bins=0, adds=adds, mem_fetch_cells=reads,
        utilization=0.0, writeback=wb, multi_lane_eligible=True,
        mode_assignment=assign_modes(geometry.group_count),
    )


def _fusable_activation(rl: ResolvedLayer, resolved) -> bool:
    src = rl.inputs[0]
    return (
        src is not None
        and resolved[src].spec.kind in ("conv", "fc", "add")
        and len(resolved[src].consumers) == 1
    )


def _fusable_pool(rl: ResolvedLayer, resolved) -> bool:
    src = rl.inputs[0]
    if src is None or len(resolved[src].consumers) != 1:
        return False
    src_rl = resolved[src]
    if src_rl.spec.kind in ("conv", "add"):
        return True
    return src_rl.fused_into is not None and resolved[src_rl.fused_into].spec.kind in (
        "conv", "add",
    )


def build_network_plans(
    network: NetworkSpec, geometry: MemoryGeometry
) -> tuple[dict[str, ResolvedLayer], list[MappingPlan]]:
    """Plans for every layer, with activations/pools folded into producers.

    An activation (and a pool that solely consumes a compute layer) runs
    digitally while that layer's outputs are written back, so the
    producer's writeback counts the post-pool tensor and the folded layers
    get zero-cost marker plans.
    """
    resolved = resolve_network(network)
    order = sorted(resolved.values(), key=lambda rl: rl.index)

    for rl in order:  # fusion marking, forward pass
        if rl.spec.kind == "activation" and _fusable_activation(rl, resolved):
            src = resolved[rl.inputs[0]]
            host = src.fused_into or src.spec.name
            rl.fused_into = host
            resolved[host].fused_ops.append(rl.spec.name)
        elif rl.spec.kind == "pool" and _fusable_pool(rl, resolved):
            src = resolved[rl.inputs[0]]
            host = src.fused_into or src.spec.name
            rl.fused_into = host
            resolved[host].fused_ops.append(rl.spec.name)

    def written_shape(rl: ResolvedLayer):
        shape = rl.output_shape
        for fused_name in rl.fused_ops:
            shape = resolved[fused_name].output_shape
        return shape

    plans: list[MappingPlan] = []
    for rl in order:
        layer = rl.spec
        bits = network.layer_bits(layer)
        cpe = _cells_per_element(bits, geometry.bit_density)
        if rl.fused_into is not None:
            plan = _digital_plan(layer.name, layer.kind, None, 0, cpe, geometry, 0)
            plan.notes = f"fused into {rl.fused_into}"
            plans.append(plan)
            continue
        if layer.kind == "conv":
            eligible = all(
                resolved[c].spec.kind != "conv"
                or resolved[c].spec.kernel[0] <= resolved[c].spec.stride
                for c in _conv_consumers_of_input(rl, resolved)
            )
            lanes = 1
            if eligible and layer.kernel[0] <= layer.stride:
                lanes = min(
                    geometry.banks * geometry.group_count, rl.output_shape[0]
                )
            plan = map_conv_layer(layer, rl.input_shape, geometry, bits, lanes)
        elif layer.kind == "fc":
            plan = map_fc_layer(layer, rl.input_shape[0], geometry, bits)
        elif layer.kind == "concat":
            plan = _digital_plan(layer.name, "concat", None, 0, cpe, geometry, 0)
            plan.notes = "channel stacking; producers write into the stacked layout"
        elif layer.kind == "add":
            n = math.prod(rl.output_shape)
            plan = _digital_plan(
                layer.name, "add", written_shape(rl), n, cpe, geometry,
                reads=2 * n * cpe, adds=n,
            )
        else:  # standalone activation / pool
            n_in = math.prod(rl.input_shape)
            plan = _digital_plan(
                layer.name, layer.kind, written_shape(rl), n_in, cpe, geometry,
                reads=n_in * cpe,
            )
        if rl.fused_ops:
            plan.fused_ops = tuple(rl.fused_ops)
            plan.writeback = _rebuild_writeback(written_shape(rl), cpe, geometry)
        plans.append(plan)
    return resolved, plans


def _rebuild_writeback(shape, cpe: int, geometry: MemoryGeometry) -> WritebackPlan:
    if len(shape) == 3:
        return _writeback_for_elements(math.prod(shape), shape, cpe, geometry)
    return _writeback_for_vector(math.prod(shape), cpe, geometry)


def _conv_consumers_of_input(rl: ResolvedLayer, resolved) -> list[str]:
    """Conv layers sharing this layer's input feature map (incl. itself)."""
    src = rl.inputs[0]
    if src is None:
        return [rl.spec.name]
    return [
        c for c in resolved[src].consumers if resolved[c].spec.kind == "conv"
    ] or [rl.spec.name]


def simulate_network(
    network: NetworkSpec,
    geometry: MemoryGeometry,
    models,
    input_tensor=None,
    exact_mode: bool = True,
    weights=None,
    rng=None,
    functional: bool | None = None,
):
    """Map a network, account its cost, and (optionally) execute it.

    Returns a :class:`photonic_pim.perf.NetworkRun` with per-layer plans
    and latency/energy results; when ``functional`` (default: only if an
    input tensor is given) the outputs of every layer are computed through
    the batch-level compute path and attached.
    """
    from . import executor, perf

    resolved, plans = build_network_plans(network, geometry)
    results = [
        perf.layer_result(p, models.timing, models.energy, models.power, geometry)
        for p in plans
    ]
    run = perf.NetworkRun(network=network, plans=plans, results=results)
    do_exec = functional if functional is not None else input_tensor is not None
    if do_exec:
        if input_tensor is None:
            raise ConfigError("functional execution needs an input tensor")
        outputs, schedule_sample = executor.execute_network(
            network, resolved, geometry, models.cell, input_tensor,
            weights=weights, exact_mode=exact_mode, rng=rng,
        )
        run.outputs = outputs
        run.schedule_sample = schedule_sample
    return run
