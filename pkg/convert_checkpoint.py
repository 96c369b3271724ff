from safetensors.torch import save_file

import json
import sys

from src.utils.checkpoint import load_checkpoint

## Usage: python convert_checkpoint.py <checkpoint_prefix> <path_to_output_model.safetensors>

nets, metadata = load_checkpoint(sys.argv[1])

tensors = {}
for net_name, params in nets.items():
    for i, layer in enumerate(params.layers):
        tensors[f"{net_name}.layers.{i}.weight"] = layer.weight.contiguous()
        tensors[f"{net_name}.layers.{i}.bias"] = layer.bias.contiguous()

# safetensors metadata values must be strings
header = {"format": "pt", "agrl": json.dumps(metadata)}
for net_name, params in nets.items():
    header[f"{net_name}.head_shape"] = json.dumps(list(params.head_shape))
    header[f"{net_name}.output_activation"] = params.output_activation
    header[f"{net_name}.layer_norm"] = json.dumps([layer.has_layer_norm for layer in params.layers])

save_file(tensors, sys.argv[2], metadata=header)
print(f"{len(tensors)} tensors written to {sys.argv[2]}")
