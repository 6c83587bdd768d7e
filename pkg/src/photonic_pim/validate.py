"""Self-check suite: catalog counts, arithmetic identities, loss golden sums.

Each check returns a (name, passed, detail) row; the CLI prints them as a
pass/fail matrix and the test suite asserts them individually.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .compute import interfere_mac, nibble_planes
from .devices import LossParams, OpcmCellModel
from .errors import ConfigError
from .mapper import LayerSpec, NetworkSpec, resolve_network
from .memory import MemoryGeometry, PathElement, path_loss_db

__all__ = ["ValidationItem", "run_validation_suite"]


@dataclass(frozen=True)
class ValidationItem:
    name: str
    passed: bool
    detail: str


def check_catalog() -> ValidationItem:
    from .workloads import validate_catalog

    rows = validate_catalog()
    bad = [r for r in rows if not r.match]
    detail = "; ".join(
        f"{r.name}: computed {r.computed:,} vs declared {r.declared:,}" for r in rows
    )
    if bad:
        detail = "MISMATCH " + "; ".join(
            f"{r.name} off by {r.computed - r.declared:+,}" for r in bad
        )
    return ValidationItem("catalog_parameter_counts", not bad, detail)


def check_shift_add_exhaustive() -> ValidationItem:
    """All 65,536 8-bit pairs must recombine exactly through nibble slicing."""
    a = np.arange(256, dtype=np.int64)
    b = np.arange(256, dtype=np.int64)
    aa, bb = np.meshgrid(a, b, indexing="ij")
    a_planes = nibble_planes(aa, 8, 4)
    b_planes = nibble_planes(bb, 8, 4)
    total = np.zeros_like(aa)
    for i, ap in enumerate(a_planes):
        for j, bp in enumerate(b_planes):
            total += (ap * bp) << (4 * (i + j))
    ok = bool(np.array_equal(total, aa * bb))
    return ValidationItem(
        "shift_add_exhaustive_8bit", ok,
        "65,536 operand pairs recombine exactly" if ok else "mismatch found",
    )


def check_paired_kernel_rows() -> ValidationItem:
    """Two stored feature rows + a 2x2 kernel must interfere into the
    per-wavelength sums k00*f00 + k10*f10 and k01*f01 + k11*f11."""
    f = np.array([[1, 2, 3, 4], [5, 6, 7, 8]], dtype=np.int64)  # two rows, width 4
    k = np.array([[3, 5], [7, 2]], dtype=np.int64)
    geometry = MemoryGeometry()
    cell = OpcmCellModel(mode="ideal")
    net = NetworkSpec(
        name="pair", input_shape=(2, 4, 1),
        layers=(
            LayerSpec(name="conv", kind="conv", out_channels=1, kernel=(2, 2),
                      stride=1, padding=0, bias=False),
        ),
    )
    resolved = resolve_network(net)
    weights = {"conv": {"w": k.reshape(2, 2, 1, 1),
                        "b": np.zeros(1, dtype=np.int64)}}
    from .executor import _ScheduleCollector, execute_conv

    collector = _ScheduleCollector()
    execute_conv(f.reshape(2, 4, 1), net.layers[0], weights["conv"], geometry,
                 cell, 4, exact_mode=True, collector=collector)
    first = collector.slots[0][0]
    sums = interfere_mac(first, cell, exact_mode=True)
    want0 = int(k[0, 0] * f[0, 0] + k[1, 0] * f[1, 0])
    want1 = int(k[0, 1] * f[0, 1] + k[1, 1] * f[1, 1])
    ok = int(sums[0]) == want0 and int(sums[1]) == want1
    return ValidationItem(
        "paired_kernel_row_accumulation", ok,
        f"wavelength sums ({int(sums[0])}, {int(sums[1])}) vs expected ({want0}, {want1})",
    )


def check_loss_golden_sums() -> ValidationItem:
    loss = LossParams()
    path = [
        PathElement("directional_coupler"),
        PathElement("mr_drop"),
        PathElement("propagation", length_cm=0.5),
    ]
    base = path_loss_db(path, loss)
    ok = math.isclose(base, 0.57, rel_tol=0, abs_tol=1e-12)
    with_soa = path_loss_db(path + [PathElement("soa")], loss)
    ok &= math.isclose(with_soa, base - 20.0, rel_tol=0, abs_tol=1e-12)
    crossing = path_loss_db([PathElement("crossing")], loss)
    ok &= crossing == -10.0 * math.log10(1.0 - 1.0e-5)
    return ValidationItem(
        "loss_budget_golden_sums", bool(ok),
        f"coupler+ring+0.5cm = {base:.6f} dB; amplifier shifts by -20 dB; "
        f"crossing = {crossing:.3e} dB",
    )


def check_config_rejects_negative_loss() -> ValidationItem:
    from .config import config_from_dict

    try:
        config_from_dict({"loss": {"mr_drop_db": -1.0}})
    except ConfigError:
        return ValidationItem(
            "config_rejects_negative_loss", True, "negative loss rejected"
        )
    return ValidationItem(
        "config_rejects_negative_loss", False, "negative loss was accepted"
    )


def check_address_codec() -> ValidationItem:
    from .memory import MemoryGeometry, capacity_bytes, decode_address, encode_address

    g = MemoryGeometry()
    rng = np.random.default_rng(1)
    n = capacity_bytes(g)
    sample = rng.integers(0, n, size=5000)
    ok = all(encode_address(decode_address(int(a), g), g) == int(a) for a in sample)
    ok &= encode_address(decode_address(0, g), g) == 0
    ok &= encode_address(decode_address(n - 1, g), g) == n - 1
    return ValidationItem(
        "address_codec_roundtrip", bool(ok), "5000 sampled + boundary addresses"
    )


def run_validation_suite() -> list[ValidationItem]:
    return [
        check_catalog(),
        check_shift_add_exhaustive(),
        check_paired_kernel_rows(),
        check_loss_golden_sums(),
        check_config_rejects_negative_loss(),
        check_address_codec(),
    ]
