import json
import logging
import os
from typing import Any, Dict, Mapping, Optional, Tuple

import numpy as np
import torch

from ..model.mlp import Layer, NetParams
from .errors import CheckpointError

logger = logging.getLogger(__name__)

FORMAT_VERSION = "AGRL1"

# A checkpoint is `<prefix>.json` (manifest) + `<prefix>.bin` (little-endian float32 blob).
# Blocks are concatenated in manifest order: nets in insertion order, then layers, weight before bias.


def _manifest_entry(params: NetParams) -> Dict[str, Any]:
    return {
        "head_shape": list(params.head_shape),
        "output_activation": params.output_activation,
        "layer_norm_eps": params.layer_norm_eps,
        "layers": [
            {
                "name": f"layers.{i}",
                "weight_shape": list(layer.weight.shape),
                "bias_shape": list(layer.bias.shape),
                "has_layer_norm": layer.has_layer_norm,
            }
            for i, layer in enumerate(params.layers)
        ],
    }


def save_checkpoint(prefix: str, nets: Mapping[str, NetParams], metadata: Optional[Dict[str, Any]] = None) -> Tuple[str, str]:

    chunks = []
    for params in nets.values():
        for block in params.blocks():
            chunks.append(block.detach().cpu().numpy().astype("<f4").reshape(-1))
    blob = np.concatenate(chunks).tobytes() if chunks else b""

    manifest = {
        "format": FORMAT_VERSION,
        "blob_length": len(blob),
        "nets": {name: _manifest_entry(params) for name, params in nets.items()},
        "metadata": metadata or {},
    }

    dirname = os.path.dirname(prefix)
    if dirname:
        os.makedirs(dirname, exist_ok=True)

    manifest_path, blob_path = prefix + ".json", prefix + ".bin"
    try:
        with open(blob_path, "wb") as f:
            f.write(blob)
        with open(manifest_path, "w") as f:
            json.dump(manifest, f, indent=2)
    except OSError as e:
        raise CheckpointError(f"could not write checkpoint {prefix}: {e}") from e

    logger.info(f"checkpoint written to {manifest_path}")
    return manifest_path, blob_path


def load_checkpoint(prefix: str) -> Tuple[Dict[str, NetParams], Dict[str, Any]]:

    if prefix.endswith(".json") or prefix.endswith(".bin"):
        prefix = prefix[:-len(".json")] if prefix.endswith(".json") else prefix[:-len(".bin")]

    try:
        with open(prefix + ".json", "r") as f:
            manifest = json.load(f)
        with open(prefix + ".bin", "rb") as f:
            blob = f.read()
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"could not read checkpoint {prefix}: {e}") from e

    if manifest.get("format") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format')!r}, expected {FORMAT_VERSION}")
    if manifest.get("blob_length") != len(blob):
        raise CheckpointError(f"blob has {len(blob)} bytes, manifest declares {manifest.get('blob_length')}")

    data = np.frombuffer(blob, dtype="<f4")
    offset = 0
    nets = {}

    for name, entry in manifest["nets"].items():
        layers = []
        for layer in entry["layers"]:
            tensors = []
            for shape in (layer["weight_shape"], layer["bias_shape"]):
                n = int(np.prod(shape))
                if offset + n > data.size:
                    raise CheckpointError(f"blob too short for net '{name}' {layer['name']}")
                tensors.append(torch.from_numpy(data[offset:offset + n].astype(np.float32).reshape(shape)))
                offset += n
            layers.append(Layer(tensors[0], tensors[1], bool(layer["has_layer_norm"])))
        nets[name] = NetParams(tuple(layers), tuple(entry["head_shape"]), entry["output_activation"],
                               float(entry["layer_norm_eps"]))

    if offset != data.size:
        raise CheckpointError(f"blob has {data.size - offset} trailing floats not described by the manifest")

    return nets, manifest.get("metadata", {})
