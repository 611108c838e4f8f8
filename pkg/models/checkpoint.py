# models/checkpoint.py

import json
import logging
import os

import numpy as np

from errors import CheckpointError, PrivacyLabError
from models.embed_model import build_model
from models.model_spec import ModelSpec
from utils import canonical_json

logger = logging.getLogger(__name__)

MANIFEST = 'manifest.json'
TENSOR_DIR = 'tensors'
DTYPE = '<f8'


def save_checkpoint(params, path):
    """Write manifest.json plus one little-endian float64 file per tensor"""
    os.makedirs(os.path.join(path, TENSOR_DIR), exist_ok=True)
    entries = []
    for index, name in enumerate(params.names()):
        data = params[name].data
        filename = f'{TENSOR_DIR}/{index:04d}.f64'
        with open(os.path.join(path, filename), 'wb') as f:
            f.write(np.ascontiguousarray(data, dtype=DTYPE).tobytes())
        entries.append({'name': name, 'shape': list(data.shape), 'file': filename})

    manifest = {
        'format': 1,
        'spec': params.spec.to_dict(),
        'speaker_classes': list(params.speaker_classes),
        'parameter_count': params.parameter_count(),
        'tensors': entries,
    }
    with open(os.path.join(path, MANIFEST), 'w', encoding='utf-8') as f:
        f.write(canonical_json(manifest, indent=2))
    logger.info(f"[CHECKPOINT] Saved {len(entries)} tensors to {path}")
    return path


def _read_manifest(path):
    manifest_path = os.path.join(path, MANIFEST)
    if not os.path.isfile(manifest_path):
        raise CheckpointError(f"No checkpoint manifest at {manifest_path}")
    try:
        with open(manifest_path, encoding='utf-8') as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"Unreadable checkpoint manifest {manifest_path}: {e}")


def load_checkpoint(path):
    """Rebuild ModelParams from a checkpoint directory, bit-exact"""
    manifest = _read_manifest(path)
    try:
        spec = ModelSpec.from_dict(manifest['spec'])
        params = build_model(spec, seed=0, speakers=manifest.get('speaker_classes', ()))
    except (KeyError, PrivacyLabError) as e:
        raise CheckpointError(f"Checkpoint manifest describes no valid model: {e}")

    entries = manifest.get('tensors', [])
    expected = params.names()
    names = [entry['name'] for entry in entries]
    if sorted(names) != sorted(expected):
        missing = sorted(set(expected) - set(names))
        extra = sorted(set(names) - set(expected))
        raise CheckpointError(f"Checkpoint tensors do not match the model spec (missing {missing}, extra {extra})")

    for entry in entries:
        name, shape = entry['name'], tuple(entry['shape'])
        if shape != params[name].shape:
            raise CheckpointError(f"Tensor {name}: manifest shape {shape} != model shape {params[name].shape}")
        filename = os.path.join(path, entry['file'])
        if not os.path.isfile(filename):
            raise CheckpointError(f"Missing tensor file {filename}")
        expected_bytes = int(np.prod(shape, dtype=np.int64)) * 8
        actual_bytes = os.path.getsize(filename)
        if actual_bytes != expected_bytes:
            raise CheckpointError(f"Tensor file {filename} has {actual_bytes} bytes, expected {expected_bytes}")
        data = np.fromfile(filename, dtype=DTYPE).astype(np.float64).reshape(shape)
        if not np.all(np.isfinite(data)):
            raise CheckpointError(f"Tensor {name} contains non-finite values")
        params[name].data = data

    logger.info(f"[CHECKPOINT] Loaded {len(entries)} tensors from {path}")
    return params
