"""Built-in network catalog plus ingestion/validation of user network files.

The five shipped models reproduce their declared parameter counts exactly.
Where the published family admits variants, the shipped file's ``notes``
field documents the variant chosen to land on the declared count (head
widths, bias conventions, stem geometry); counts are weights + biases of
conv/fc layers only, since the schema carries no normalization layers
(their folded affine parameters ride on the conv biases where present).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from .errors import ConfigError
from .mapper import LayerSpec, NetworkSpec, param_count, resolve_network

__all__ = [
    "BUILTIN_NAMES",
    "CatalogRow",
    "load_network",
    "save_network",
    "load_builtin",
    "catalog",
    "validate_catalog",
    "network_schema",
]

BUILTIN_NAMES = ("resnet18", "inception_v2", "mobilenet", "squeezenet", "vgg16")


def network_schema() -> dict:
    with resources.files("photonic_pim.data").joinpath("network_schema.json").open() as fh:
        return json.load(fh)


def _layer_from_dict(entry: dict, index: int) -> LayerSpec:
    kind = entry.get("kind")
    name = entry.get("name", f"layer{index}")
    common = dict(name=name, kind=kind, from_layers=tuple(entry.get("from", ())))
    if kind == "conv":
        k = entry["kernel"]
        kernel = (k, k) if isinstance(k, int) else tuple(k)
        return LayerSpec(
            **common,
            out_channels=entry["out_channels"],
            kernel=kernel,
            stride=entry.get("stride", 1),
            padding=entry.get("padding", 0),
            groups=entry.get("groups", 1),
            bias=entry.get("bias", True),
        )
    if kind == "fc":
        return LayerSpec(
            **common,
            out_features=entry["out_features"],
            bias=entry.get("bias", True),
        )
    if kind == "activation":
        return LayerSpec(**common, fn=entry.get("fn", "relu"))
    if kind == "pool":
        return LayerSpec(
            **common,
            op=entry.get("op", "max"),
            size=entry.get("size", 2),
            pool_stride=entry.get("stride", 0),
            pool_padding=entry.get("padding", 0),
        )
    if kind in ("add", "concat"):
        return LayerSpec(**common)
    raise ConfigError(f"unknown layer kind {kind!r} at index {index}")


def _network_from_dict(doc: dict) -> NetworkSpec:
    try:
        jsonschema.validate(doc, network_schema())
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"network file does not match the schema: {exc.message}") from exc
    layers = tuple(
        _layer_from_dict(entry, i) for i, entry in enumerate(doc["layers"])
    )
    spec = NetworkSpec(
        name=doc["name"],
        input_shape=tuple(doc["input"]),
        layers=layers,
        declared_parameter_count=doc.get("declared_parameter_count"),
        operand_bits=doc.get("operand_bits", 4),
        notes=doc.get("notes", ""),
    )
    resolve_network(spec)  # raises with layer names on any shape mismatch
    return spec


def load_network(path: str) -> NetworkSpec:
    """Load and fully validate a network JSON file."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"workload file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"workload file {path} is not valid JSON: {exc}") from exc
    return _network_from_dict(doc)


def _layer_to_dict(layer: LayerSpec) -> dict:
    out: dict = {"name": layer.name, "kind": layer.kind}
    if layer.from_layers:
        out["from"] = list(layer.from_layers)
    if layer.kind == "conv":
        out.update(
            out_channels=layer.out_channels,
            kernel=list(layer.kernel),
            stride=layer.stride,
            padding=layer.padding,
            groups=layer.groups,
            bias=layer.bias,
        )
    elif layer.kind == "fc":
        out.update(out_features=layer.out_features, bias=layer.bias)
    elif layer.kind == "activation":
        out["fn"] = layer.fn
    elif layer.kind == "pool":
        out.update(
            op=layer.op, size=layer.size,
            stride=layer.pool_step, padding=layer.pool_padding,
        )
    return out


def save_network(spec: NetworkSpec, path: str) -> None:
    doc = {
        "name": spec.name,
        "input": list(spec.input_shape),
        "operand_bits": spec.operand_bits,
        "declared_parameter_count": spec.declared_parameter_count,
        "notes": spec.notes,
        "layers": [_layer_to_dict(l) for l in spec.layers],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_builtin(name: str) -> NetworkSpec:
    if name not in BUILTIN_NAMES:
        raise ConfigError(
            f"unknown built-in workload {name!r}; available: {', '.join(BUILTIN_NAMES)}"
        )
    ref = resources.files("photonic_pim.data").joinpath(f"networks/{name}.json")
    with resources.as_file(ref) as path:
        return load_network(str(path))


def catalog() -> dict[str, NetworkSpec]:
    return {name: load_builtin(name) for name in BUILTIN_NAMES}


@dataclass(frozen=True)
class CatalogRow:
    name: str
    computed: int
    declared: int

    @property
    def match(self) -> bool:
        return self.computed == self.declared


def validate_catalog() -> list[CatalogRow]:
    """Recount every built-in model and compare against its declared count."""
    rows = []
    for name, spec in catalog().items():
        rows.append(
            CatalogRow(
                name=name,
                computed=param_count(spec),
                declared=spec.declared_parameter_count or 0,
            )
        )
    return rows
