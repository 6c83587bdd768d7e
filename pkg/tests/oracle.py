"""Independent integer reference used by the tests.

Deliberately written from the documented pipeline semantics with plain
loops/tensordot, sharing no code with the package's compute or reference
modules: conv as explicit window sums over padded inputs, fc as a matrix
product, bias -> right-shift requantization -> clamp, max/avg pools,
saturating adds, channel concat.
"""

import numpy as np


def requant_shift_oracle(max_products: int, bits: int) -> int:
    top = (1 << bits) - 1
    worst = max(1, max_products) * top * top
    shift = 0
    while (worst >> shift) > top:
        shift += 1
    return shift


def conv_oracle(x, w, b, stride, pad, groups, bits, has_bias):
    x = np.asarray(x, dtype=np.int64)
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
            for o in range(c_out):
                g = o // c_out_g
                acc = 0
                for r in range(k_h):
                    for q in range(k_w):
                        for c in range(c_in_g):
                            acc += int(xp[i * stride + r, j * stride + q, g * c_in_g + c]) * int(w[r, q, c, o])
                out[i, j, o] = acc
    out += b
    shift = requant_shift_oracle(k_h * k_w * c_in_g + (1 if has_bias else 0), bits)
    return np.clip(out >> shift, 0, (1 << bits) - 1)


def fc_oracle(x, w, b, bits, has_bias):
    x = np.asarray(x, dtype=np.int64).reshape(-1)
    acc = np.asarray(w, dtype=np.int64) @ x + b
    shift = requant_shift_oracle(x.size + (1 if has_bias else 0), bits)
    return np.clip(acc >> shift, 0, (1 << bits) - 1)


def pool_oracle(x, op, size, step, pad=0):
    x = np.asarray(x, dtype=np.int64)
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


def network_oracle(network, weights, x0):
    """Per-layer outputs for a NetworkSpec, mirroring the documented pipeline."""
    from photonic_pim.mapper import resolve_network

    resolved = resolve_network(network)
    outputs = {}
    x0 = np.asarray(x0, dtype=np.int64)
    top = (1 << network.operand_bits) - 1

    def fetch(src):
        return outputs[src] if src is not None else x0

    for layer in network.layers:
        rl = resolved[layer.name]
        bits = network.layer_bits(layer)
        if layer.kind == "conv":
            wb = weights[layer.name]
            bias = wb["b"] if layer.bias else np.zeros(layer.out_channels, dtype=np.int64)
            outputs[layer.name] = conv_oracle(
                fetch(rl.inputs[0]), wb["w"], bias, layer.stride, layer.padding,
                layer.groups, bits, layer.bias,
            )
        elif layer.kind == "fc":
            wb = weights[layer.name]
            bias = wb["b"] if layer.bias else np.zeros(layer.out_features, dtype=np.int64)
            outputs[layer.name] = fc_oracle(fetch(rl.inputs[0]), wb["w"], bias, bits, layer.bias)
        elif layer.kind == "activation":
            outputs[layer.name] = np.maximum(fetch(rl.inputs[0]), 0)
        elif layer.kind == "pool":
            outputs[layer.name] = pool_oracle(
                fetch(rl.inputs[0]), layer.op, layer.size, layer.pool_step,
                layer.pool_padding,
            )
        elif layer.kind == "add":
            a, b = (fetch(s) for s in rl.inputs)
            outputs[layer.name] = np.clip(a + b, 0, top)
        elif layer.kind == "concat":
            outputs[layer.name] = np.concatenate([fetch(s) for s in rl.inputs], axis=2)
    return outputs
