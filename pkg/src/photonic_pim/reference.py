"""Plain integer reference inference used by the CLI's exact-mode check.

Implements the documented pipeline semantics directly with dense numpy
arithmetic, independent of the batch-level compute path: convolutions as
explicit window sums, fully connected layers as matrix products, the same
bias / clamp / requantization rules.
"""

from __future__ import annotations

import numpy as np

from .mapper import NetworkSpec, requant_shift, resolve_network

__all__ = ["reference_inference"]


def _conv_ref(x: np.ndarray, w: np.ndarray, b: np.ndarray, stride: int,
              pad: int, groups: int, bits: int, has_bias: bool) -> np.ndarray:
    h, wd, c_in = x.shape
    k_h, k_w, c_in_g, c_out = w.shape
    h_out = (h + 2 * pad - k_h) // stride + 1
    w_out = (wd + 2 * pad - k_w) // stride + 1
    xp = np.zeros((h + 2 * pad, wd + 2 * pad, c_in), dtype=np.int64)
    xp[pad : pad + h, pad : pad + wd] = x
    out = np.zeros((h_out, w_out, c_out), dtype=np.int64)
    c_out_g = c_out // groups
    for i in range(h_out):
        for j in range(w_out):
            patch = xp[i * stride : i * stride + k_h, j * stride : j * stride + k_w, :]
            for g in range(groups):
                pg = patch[:, :, g * c_in_g : (g + 1) * c_in_g]
                wg = w[:, :, :, g * c_out_g : (g + 1) * c_out_g]
                out[i, j, g * c_out_g : (g + 1) * c_out_g] = np.tensordot(
                    pg, wg, axes=([0, 1, 2], [0, 1, 2])
                )
    out += b
    shift = requant_shift(k_h * k_w * c_in_g + (1 if has_bias else 0), bits)
    return np.clip(out >> shift, 0, (1 << bits) - 1)


def _pool_ref(x: np.ndarray, op: str, size: int, step: int, pad: int) -> np.ndarray:
    h, w, c = x.shape
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
            out[i, j] = win.max(axis=(0, 1)) if op == "max" else win.sum(axis=(0, 1)) // (size * size)
    return out


def reference_inference(
    network: NetworkSpec, weights: dict, input_tensor: np.ndarray
) -> dict[str, np.ndarray]:
    """Per-layer outputs of the documented integer pipeline."""
    resolved = resolve_network(network)
    outputs: dict[str, np.ndarray] = {}
    x0 = np.asarray(input_tensor, dtype=np.int64)

    def fetch(src):
        return outputs[src] if src is not None else x0

    for layer in network.layers:
        rl = resolved[layer.name]
        bits = network.layer_bits(layer)
        top = (1 << network.operand_bits) - 1
        if layer.kind == "conv":
            wb = weights[layer.name]
            outputs[layer.name] = _conv_ref(
                fetch(rl.inputs[0]), wb["w"],
                wb["b"] if layer.bias else np.zeros(layer.out_channels, dtype=np.int64),
                layer.stride, layer.padding, layer.groups, bits, layer.bias,
            )
        elif layer.kind == "fc":
            wb = weights[layer.name]
            x = fetch(rl.inputs[0]).reshape(-1)
            acc = wb["w"] @ x
            acc = acc + (wb["b"] if layer.bias else 0)
            shift = requant_shift(x.size + (1 if layer.bias else 0), bits)
            outputs[layer.name] = np.clip(acc >> shift, 0, (1 << bits) - 1)
        elif layer.kind == "activation":
            outputs[layer.name] = np.maximum(fetch(rl.inputs[0]), 0)
        elif layer.kind == "pool":
            outputs[layer.name] = _pool_ref(
                fetch(rl.inputs[0]), layer.op, layer.size,
                layer.pool_step, layer.pool_padding,
            )
        elif layer.kind == "add":
            a, b = (fetch(s) for s in rl.inputs)
            outputs[layer.name] = np.clip(a + b, 0, top)
        elif layer.kind == "concat":
            outputs[layer.name] = np.concatenate([fetch(s) for s in rl.inputs], axis=2)
    return outputs
