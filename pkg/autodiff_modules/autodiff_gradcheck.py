# autodiff_modules/autodiff_gradcheck.py

import numpy as np

from autodiff_modules.autodiff_value import backward
from errors import GraphError, NumericError


def _scalar(value):
    result = value.data
    if result.size != 1:
        raise GraphError(f"Gradient check needs a scalar function, got shape {result.shape}")
    result = float(result.reshape(()))
    if not np.isfinite(result):
        raise NumericError("Function evaluated to a non-finite value")
    return result


def finite_diff_check(f, params, eps=1e-4, max_coords=None, rng=None):
    """Compare analytic gradients against central differences.

    f rebuilds the graph from the current contents of params and returns a
    scalar Value. Each checked coordinate is perturbed in place and restored.
    Returns max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
    max_coords limits the number of coordinates sampled per parameter.
    """
    try:
        loss = f()
    except FloatingPointError as e:
        raise NumericError(str(e))
    _scalar(loss)
    backward(loss)
    analytic = [p.grad.copy() for p in params]

    worst = 0.0
    for param, grad in zip(params, analytic):
        flat = param.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            rng = rng if rng is not None else np.random.default_rng(0)
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for i in coords:
            original = flat[i]
            flat[i] = original + eps
            plus = _scalar(f())
            flat[i] = original - eps
            minus = _scalar(f())
            flat[i] = original
            numeric = (plus - minus) / (2.0 * eps)
            exact = grad.reshape(-1)[i]
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            worst = max(worst, error)
    return worst
