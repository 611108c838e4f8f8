# training_modules/rmsprop.py

import numpy as np

from errors import DimensionError, NumericError


class OptimizerState:
    """Per-parameter running average of squared gradients"""

    def __init__(self, params=None):
        self.cache = {}
        for value in params or []:
            self.cache[id(value)] = np.zeros_like(value.data)

    def cache_for(self, value):
        if id(value) not in self.cache:
            self.cache[id(value)] = np.zeros_like(value.data)
        return self.cache[id(value)]


def rmsprop_step(params, grads, state, lr=1e-3, decay=0.9, eps=1e-8):
    """In-place RMSProp update.

    cache <- decay * cache + (1 - decay) * g^2
    theta <- theta - lr * g / (sqrt(cache) + eps)
    """
    if len(params) != len(grads):
        raise DimensionError(f"{len(params)} parameters but {len(grads)} gradients")
    for value, grad in zip(params, grads):
        if grad.shape != value.data.shape:
            raise DimensionError(f"Gradient {grad.shape} does not match parameter {value.data.shape}"
                                 f"{' (' + value.name + ')' if value.name else ''}")
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"Non-finite gradient for {value.name or 'parameter'}")
    for value, grad in zip(params, grads):
        cache = state.cache_for(value)
        cache *= decay
        cache += (1.0 - decay) * grad * grad
        value.data = value.data - lr * grad / (np.sqrt(cache) + eps)
    return params, state
