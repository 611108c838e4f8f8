# utils/__init__.py
"""Utilities module"""
import hashlib
import json

import numpy as np


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def canonical_json(data, indent=None):
    """Serialize with sorted keys so equal data gives equal bytes"""
    return json.dumps(data, sort_keys=True, indent=indent, default=_json_default,
                      ensure_ascii=False, allow_nan=False)


def config_hash(data):
    """Generate a stable hash of a configuration mapping"""
    return hashlib.sha256(canonical_json(data).encode('utf-8')).hexdigest()
