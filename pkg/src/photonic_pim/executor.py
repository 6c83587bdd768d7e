"""Functional execution of mapped networks through the batch-level MAC path.

The executor materializes, slot by slot, the same stored-row / driven-laser
batches the hardware would see, pushes them through
:func:`photonic_pim.compute.interfere_mac`, and finishes sums digitally
(bias correction, shift-and-add over nibble passes, bias, requantization).
It is the correctness route for small networks; the closed-form plan
statistics in :mod:`photonic_pim.mapper` stay the accounting route.

Pipeline semantics (mirrored by any reference implementation):
    - operands are unsigned levels in [0, 2^bits); zero-point folding is
      available separately and defaults to off,
    - compute layer output = clamp((acc + bias) >> requant_shift, 0, top),
    - ReLU on unsigned levels is absorbed by the clamp,
    - pools run on requantized levels (avg pools use floor division),
    - residual adds saturate at the operand range.
"""

from __future__ import annotations

import numpy as np

from .compute import (
    NO_TAG,
    GroupMacBatch,
    bias_correct,
    interfere_mac,
    nibble_planes,
)
from .devices import OpcmCellModel
from .errors import ConfigError
from .mapper import (
    LayerSpec,
    NetworkSpec,
    ofm_dims,
    plan_tdm,
    requant_shift,
)
from .memory import MemoryGeometry

__all__ = ["execute_network", "execute_conv", "execute_fc", "synthesize_weights"]

_SCHEDULE_SAMPLE_CAP = 256


def synthesize_weights(network: NetworkSpec, rng: np.random.Generator) -> dict:
    """Random operand-range weights/biases for every compute layer."""
    from .mapper import resolve_network

    resolved = resolve_network(network)
    weights: dict[str, dict] = {}
    for rl in resolved.values():
        layer = rl.spec
        bits = network.layer_bits(layer)
        hi = 1 << bits
        if layer.kind == "conv":
            c_in_g = rl.input_shape[2] // layer.groups
            shape = (*layer.kernel, c_in_g, layer.out_channels)
            weights[layer.name] = {
                "w": rng.integers(0, hi, size=shape, dtype=np.int64),
                "b": rng.integers(0, hi, size=layer.out_channels, dtype=np.int64)
                if layer.bias
                else np.zeros(layer.out_channels, dtype=np.int64),
            }
        elif layer.kind == "fc":
            weights[layer.name] = {
                "w": rng.integers(
                    0, hi, size=(layer.out_features, rl.input_shape[0]), dtype=np.int64
                ),
                "b": rng.integers(0, hi, size=layer.out_features, dtype=np.int64)
                if layer.bias
                else np.zeros(layer.out_features, dtype=np.int64),
            }
    return weights


class _ScheduleCollector:
    def __init__(self, cap: int = _SCHEDULE_SAMPLE_CAP):
        self.slots: list[list[GroupMacBatch]] = []
        self.cap = cap
        self.truncated = False

    def add(self, batch: GroupMacBatch) -> None:
        if len(self.slots) < self.cap:
            self.slots.append([batch])
        else:
            self.truncated = True


def _recover_int_sums(raw, batch, cell: OpcmCellModel, exact_mode: bool) -> np.ndarray:
    """Per-wavelength integer sums from an optical readout."""
    if exact_mode:
        return np.asarray(raw, dtype=np.int64)
    corrected = bias_correct(raw, batch, cell) if cell.mode == "physical" else raw
    den = cell.levels - 1
    return np.rint(np.asarray(corrected, dtype=float) * den * den).astype(np.int64)


def execute_conv(
    x: np.ndarray,
    layer: LayerSpec,
    weights: dict,
    geometry: MemoryGeometry,
    cell: OpcmCellModel,
    operand_bits: int,
    exact_mode: bool = True,
    collector: _ScheduleCollector | None = None,
    requantize: bool = True,
) -> np.ndarray:
    """Run one convolution through per-slot interference batches.

    Iterates nibble passes x output rows x channel groups x vertical row
    chunks x window phases x output channels; each iteration is one
    hardware slot of one group.
    """
    h, w_cols, c_in = x.shape
    k_h, k_w = layer.kernel
    s, p, grp = layer.stride, layer.padding, layer.groups
    h_out, w_out, c_out = ofm_dims(x.shape, layer)
    c_in_g = c_in // grp
    c_out_g = c_out // grp
    cell_bits = geometry.bit_density
    s_sub = geometry.subarray_grid
    exec_cell = cell.as_ideal() if exact_mode else cell
    passes = plan_tdm(operand_bits, cell_bits)
    x_planes = nibble_planes(x, operand_bits, cell_bits)
    w_planes = nibble_planes(weights["w"], operand_bits, cell_bits)
    rho = k_h * c_in_g
    chunks = -(-rho // s_sub)
    step = -(-k_w // s)
    acc = np.zeros((h_out, w_out, c_out), dtype=np.int64)
    q_idx = np.arange(k_w)

    for shift, ni, nj in passes:
        xp = x_planes[ni]
        wp = w_planes[nj]
        for y_out in range(h_out):
            for g in range(grp):
                for chunk in range(chunks):
                    lo, hi = chunk * s_sub, min(rho, (chunk + 1) * s_sub)
                    idx = np.arange(lo, hi)
                    r = idx // c_in_g
                    cp = idx % c_in_g
                    y_in = y_out * s - p + r
                    valid = (y_in >= 0) & (y_in < h)
                    if not np.any(valid):
                        continue
                    rv, cpv, yv = r[valid], cp[valid], y_in[valid]
                    c_glob = g * c_in_g + cpv
                    n = g * h * c_in_g + yv * c_in_g + cpv
                    u = n % s_sub
                    stored = np.zeros((s_sub, w_cols), dtype=np.int64)
                    stored[u, :] = xp[yv, :, c_glob]
                    for phase in range(step):
                        xs = np.arange(phase, w_out, step)
                        if xs.size == 0:
                            continue
                        cols = xs[:, None] * s - p + q_idx[None, :]
                        col_ok = (cols >= 0) & (cols < w_cols)
                        tag_of_col = np.full(w_cols, NO_TAG, dtype=np.int64)
                        flat_cols = cols[col_ok]
                        tag_grid = np.broadcast_to(
                            (y_out * w_out + xs)[:, None], cols.shape
                        )
                        for co_local in range(c_out_g):
                            co = g * c_out_g + co_local
                            tag_of_col[flat_cols] = tag_grid[col_ok] * c_out + co
                            inputs = np.zeros((s_sub, w_cols), dtype=np.int64)
                            tags = np.full((s_sub, w_cols), NO_TAG, dtype=np.int64)
                            kvals = wp[:, :, :, co]  # (k_h, k_w, c_in_g)
                            for i in range(rv.size):
                                row_vals = kvals[rv[i], :, cpv[i]]
                                cc = flat_cols
                                inputs[u[i], cc] = np.broadcast_to(
                                    row_vals[None, :], cols.shape
                                )[col_ok]
                                tags[u[i], cc] = tag_of_col[cc]
                            batch = GroupMacBatch(
                                group=0, stored=stored, inputs=inputs, tags=tags
                            )
                            if collector is not None:
                                collector.add(batch)
                            raw = interfere_mac(batch, exec_cell, exact_mode=exact_mode)
                            sums = _recover_int_sums(raw, batch, exec_cell, exact_mode)
                            win = np.where(col_ok, sums[np.clip(cols, 0, w_cols - 1)], 0)
                            acc[y_out, xs, co] += win.sum(axis=1) << shift
    fan_in = k_h * k_w * c_in_g
    return _finish_compute(acc, weights["b"], fan_in, layer.bias, operand_bits, requantize)


def execute_fc(
    x: np.ndarray,
    layer: LayerSpec,
    weights: dict,
    geometry: MemoryGeometry,
    cell: OpcmCellModel,
    operand_bits: int,
    exact_mode: bool = True,
    collector: _ScheduleCollector | None = None,
    requantize: bool = True,
) -> np.ndarray:
    """Run one fully connected layer weight-stationary, batch by batch."""
    x = x.reshape(-1)
    in_f = x.size
    out_f = layer.out_features
    cell_bits = geometry.bit_density
    s_sub = geometry.subarray_grid
    cols = geometry.cols_per_subarray
    exec_cell = cell.as_ideal() if exact_mode else cell
    passes = plan_tdm(operand_bits, cell_bits)
    x_planes = nibble_planes(x, operand_bits, cell_bits)
    w_planes = nibble_planes(weights["w"], operand_bits, cell_bits)
    kappa = -(-in_f // s_sub)
    pad_len = kappa * s_sub
    acc = np.zeros(out_f, dtype=np.int64)

    def fold(vec: np.ndarray) -> np.ndarray:
        padded = np.zeros(pad_len, dtype=np.int64)
        padded[:in_f] = vec
        return padded.reshape(kappa, s_sub).T  # (s_sub, kappa)

    for shift, ni, nj in passes:
        xin = fold(x_planes[nj])
        col_tiles = -(-kappa // cols)
        if col_tiles == 1:
            nu = cols // kappa
            for block in range(0, out_f, nu):
                neurons = range(block, min(out_f, block + nu))
                stored = np.zeros((s_sub, cols), dtype=np.int64)
                inputs = np.zeros((s_sub, cols), dtype=np.int64)
                tags = np.full((s_sub, cols), NO_TAG, dtype=np.int64)
                for oo, o in enumerate(neurons):
                    seg = slice(oo * kappa, (oo + 1) * kappa)
                    stored[:, seg] = fold(w_planes[ni][o])
                    inputs[:, seg] = xin
                    tags[:, seg] = o
                # idle lanes beyond in_f carry no product: stored=inputs=0
                batch = GroupMacBatch(group=0, stored=stored, inputs=inputs, tags=tags)
                if collector is not None:
                    collector.add(batch)
                raw = interfere_mac(batch, exec_cell, exact_mode=exact_mode)
                sums = _recover_int_sums(raw, batch, exec_cell, exact_mode)
                for oo, o in enumerate(neurons):
                    acc[o] += int(sums[oo * kappa : (oo + 1) * kappa].sum()) << shift
        else:
            for o in range(out_f):
                wfold = fold(w_planes[ni][o])
                for tile in range(col_tiles):
                    seg = slice(tile * cols, min(kappa, (tile + 1) * cols))
                    width = seg.stop - seg.start
                    stored = np.zeros((s_sub, cols), dtype=np.int64)
                    inputs = np.zeros((s_sub, cols), dtype=np.int64)
                    tags = np.full((s_sub, cols), NO_TAG, dtype=np.int64)
                    stored[:, :width] = wfold[:, seg]
                    inputs[:, :width] = xin[:, seg]
                    tags[:, :width] = o
                    batch = GroupMacBatch(group=0, stored=stored, inputs=inputs, tags=tags)
                    if collector is not None:
                        collector.add(batch)
                    raw = interfere_mac(batch, exec_cell, exact_mode=exact_mode)
                    sums = _recover_int_sums(raw, batch, exec_cell, exact_mode)
                    acc[o] += int(sums[:width].sum()) << shift
    return _finish_compute(acc, weights["b"], in_f, layer.bias, operand_bits, requantize)


def _finish_compute(
    acc: np.ndarray, bias: np.ndarray, fan_in: int, has_bias: bool,
    operand_bits: int, requantize: bool = True,
) -> np.ndarray:
    """Bias add + full-scale requantization back to operand levels."""
    acc = acc + bias
    if not requantize:
        return acc
    shift = requant_shift(fan_in + (1 if has_bias else 0), operand_bits)
    top = (1 << operand_bits) - 1
    return np.clip(acc >> shift, 0, top)


def digital_pool(x: np.ndarray, layer: LayerSpec) -> np.ndarray:
    h, w, c = x.shape
    size, step, pad = layer.size, layer.pool_step, layer.pool_padding
    if pad:
        xp = np.zeros((h + 2 * pad, w + 2 * pad, c), dtype=np.int64)
        xp[pad : pad + h, pad : pad + w] = x
        x, h, w = xp, h + 2 * pad, w + 2 * pad
    h_out = (h - size) // step + 1
    w_out = (w - size) // step + 1
    out = np.zeros((h_out, w_out, c), dtype=np.int64)
    for i in range(h_out):
        for j in range(w_out):
            win = x[i * step : i * step + size, j * step : j * step + size, :]
            if layer.op == "max":
                out[i, j, :] = win.max(axis=(0, 1))
            else:
                out[i, j, :] = win.sum(axis=(0, 1)) // (size * size)
    return out


def execute_network(
    network: NetworkSpec,
    resolved: dict,
    geometry: MemoryGeometry,
    cell: OpcmCellModel,
    input_tensor: np.ndarray,
    weights: dict | None = None,
    exact_mode: bool = True,
    rng: np.random.Generator | None = None,
    requantize: bool = True,
):
    """Evaluate every layer in graph order; returns (outputs, schedule sample).

    ``requantize=False`` returns raw accumulators from compute layers; use
    it only for single-layer analyses, since downstream layers expect
    operand-range levels.
    """
    x0 = np.asarray(input_tensor, dtype=np.int64)
    hi = 1 << network.operand_bits
    if np.any(x0 < 0) or np.any(x0 >= hi):
        raise ConfigError(f"input tensor must hold levels in [0, {hi})")
    if tuple(x0.shape) != tuple(network.input_shape):
        raise ConfigError(
            f"input tensor shape {x0.shape} != network input {network.input_shape}"
        )
    if weights is None:
        rng = rng or np.random.default_rng(0)
        weights = synthesize_weights(network, rng)
    collector = _ScheduleCollector()
    outputs: dict[str, np.ndarray] = {}
    top_default = (1 << network.operand_bits) - 1

    def fetch(src: str | None) -> np.ndarray:
        return outputs[src] if src is not None else x0

    for layer in network.layers:
        rl = resolved[layer.name]
        bits = network.layer_bits(layer)
        top = (1 << bits) - 1
        if layer.kind == "conv":
            x = fetch(rl.inputs[0])
            acc = execute_conv(
                x, layer, weights[layer.name], geometry, cell, bits,
                exact_mode=exact_mode, collector=collector, requantize=requantize,
            )
            outputs[layer.name] = acc
        elif layer.kind == "fc":
            x = fetch(rl.inputs[0])
            acc = execute_fc(
                x, layer, weights[layer.name], geometry, cell, bits,
                exact_mode=exact_mode, collector=collector, requantize=requantize,
            )
            outputs[layer.name] = acc
        elif layer.kind == "activation":
            outputs[layer.name] = np.maximum(fetch(rl.inputs[0]), 0)
        elif layer.kind == "pool":
            outputs[layer.name] = digital_pool(fetch(rl.inputs[0]), layer)
        elif layer.kind == "add":
            a, b = (fetch(s) for s in rl.inputs)
            outputs[layer.name] = np.clip(a + b, 0, top_default)
        elif layer.kind == "concat":
            outputs[layer.name] = np.concatenate(
                [fetch(s) for s in rl.inputs], axis=2
            )
    return outputs, collector
