# autodiff_modules/autodiff_layers.py

from dataclasses import dataclass

import numpy as np

from autodiff_modules.autodiff_value import Value, constant, node
from errors import DegenerateInputError, DimensionError, DomainError, LabelIndexError
from utils.rng import glorot_uniform

ACTIVATIONS = ('relu', 'tanh', 'sigmoid', 'identity')


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _activate(pre, activation):
    if activation == 'relu':
        return np.maximum(pre, 0.0)
    if activation == 'tanh':
        return np.tanh(pre)
    if activation == 'sigmoid':
        return _sigmoid(pre)
    if activation == 'identity':
        return pre.copy()
    raise DomainError(f"Unknown activation: {activation}")


def _activation_grad(grad, pre, out, activation):
    if activation == 'relu':
        return grad * (pre > 0.0)
    if activation == 'tanh':
        return grad * (1.0 - out * out)
    if activation == 'sigmoid':
        return grad * out * (1.0 - out)
    return grad


def dense(x, W, b, activation='relu'):
    """y = act(x W^T + b) for x of shape (n,) or (B, n)"""
    if activation not in ACTIVATIONS:
        raise DomainError(f"Unknown activation: {activation}")
    if W.data.ndim != 2 or x.shape[-1] != W.shape[1] or b.shape != (W.shape[0],):
        raise DimensionError(f"dense: x {x.shape}, W {W.shape}, b {b.shape} do not conform")

    pre = x.data @ W.data.T + b.data
    out = node(_activate(pre, activation), (x, W, b), f'dense_{activation}')

    def _backward(grad):
        g_pre = _activation_grad(grad, pre, out.data, activation)
        g2 = g_pre.reshape(-1, W.shape[0])
        x2 = x.data.reshape(-1, W.shape[1])
        if W.requires_grad:
            W.grad += g2.T @ x2
        if b.requires_grad:
            b.grad += g2.sum(axis=0)
        if x.requires_grad:
            x.grad += g_pre @ W.data
    out._backward = _backward
    return out


def _batched(x):
    """View a (T, C) or (B, T, C) tensor as batched; returns (array, was_batched)"""
    if x.data.ndim == 2:
        return x.data[None], False
    if x.data.ndim == 3:
        return x.data, True
    raise DimensionError(f"Expected (T, C) or (B, T, C) input, got {x.shape}")


def conv1d(x, kernels, width, bias=None):
    """Valid (unpadded) stride-1 convolution over time followed by relu.

    x: (T, C_in) or (B, T, C_in); kernels: (C_out, width, C_in).
    Output length is T - width + 1.
    """
    data, batched = _batched(x)
    if kernels.data.ndim != 3 or kernels.shape[1] != width or kernels.shape[2] != data.shape[2]:
        raise DimensionError(f"conv1d: kernels {kernels.shape} do not match width {width} "
                             f"and input channels {data.shape[2]}")
    if bias is not None and bias.shape != (kernels.shape[0],):
        raise DimensionError(f"conv1d: bias {bias.shape} does not match {kernels.shape[0]} kernels")
    n_batch, steps, c_in = data.shape
    if steps < width:
        raise DegenerateInputError(f"Sequence of length {steps} shorter than kernel width {width}")

    c_out = kernels.shape[0]
    out_steps = steps - width + 1
    windows = np.stack([data[:, k:k + out_steps, :] for k in range(width)], axis=2)
    unfolded = windows.reshape(n_batch, out_steps, width * c_in)
    flat_kernels = kernels.data.reshape(c_out, width * c_in)
    pre = unfolded @ flat_kernels.T
    if bias is not None:
        pre = pre + bias.data
    result = np.maximum(pre, 0.0)
    parents = (x, kernels) if bias is None else (x, kernels, bias)
    out = node(result if batched else result[0], parents, 'conv1d')

    def _backward(grad):
        g = grad if batched else grad[None]
        g_pre = g * (pre > 0.0)
        if kernels.requires_grad:
            kernels.grad += (g_pre.reshape(-1, c_out).T
                             @ unfolded.reshape(-1, width * c_in)).reshape(kernels.shape)
        if bias is not None and bias.requires_grad:
            bias.grad += g_pre.reshape(-1, c_out).sum(axis=0)
        if x.requires_grad:
            g_windows = (g_pre @ flat_kernels).reshape(n_batch, out_steps, width, c_in)
            g_x = np.zeros_like(data)
            for k in range(width):
                g_x[:, k:k + out_steps, :] += g_windows[:, :, k, :]
            x.grad += g_x if batched else g_x[0]
    out._backward = _backward
    return out


@dataclass
class GruParams:
    """Update (z), reset (r) and candidate (h) gate weights of one GRU layer"""
    W_z: Value
    W_r: Value
    W_h: Value
    U_z: Value
    U_r: Value
    U_h: Value
    b_z: Value
    b_r: Value
    b_h: Value

    FIELDS = ('W_z', 'W_r', 'W_h', 'U_z', 'U_r', 'U_h', 'b_z', 'b_r', 'b_h')

    @property
    def width(self):
        return self.U_z.shape[0]

    @property
    def input_dim(self):
        return self.W_z.shape[1]

    def values(self):
        return [getattr(self, name) for name in self.FIELDS]

    def validate(self):
        w, d = self.width, self.input_dim
        for name in ('W_z', 'W_r', 'W_h'):
            if getattr(self, name).shape != (w, d):
                raise DimensionError(f"GRU {name} must be ({w}, {d}), got {getattr(self, name).shape}")
        for name in ('U_z', 'U_r', 'U_h'):
            if getattr(self, name).shape != (w, w):
                raise DimensionError(f"GRU {name} must be ({w}, {w}), got {getattr(self, name).shape}")
        for name in ('b_z', 'b_r', 'b_h'):
            if getattr(self, name).shape != (w,):
                raise DimensionError(f"GRU {name} must be ({w},), got {getattr(self, name).shape}")

    @classmethod
    def create(cls, rng, input_dim, width, prefix='gru'):
        """Glorot-uniform matrices, zero biases"""
        tensors = {}
        for gate in ('z', 'r', 'h'):
            tensors[f'W_{gate}'] = Value(glorot_uniform(rng, (width, input_dim), input_dim, width),
                                         name=f'{prefix}/W_{gate}')
        for gate in ('z', 'r', 'h'):
            tensors[f'U_{gate}'] = Value(glorot_uniform(rng, (width, width), width, width),
                                         name=f'{prefix}/U_{gate}')
        for gate in ('z', 'r', 'h'):
            tensors[f'b_{gate}'] = Value(np.zeros(width), name=f'{prefix}/b_{gate}')
        return cls(**tensors)


def gru_sequence(x, params, h0=None):
    """Run a GRU over time and return every hidden state.

    z = s(W_z x + U_z h + b_z), r = s(W_r x + U_r h + b_r),
    n = tanh(W_h x + U_h (r*h) + b_h), h' = (1 - z) * h + z * n.
    x: (T, d) or (B, T, d); h0: (w,) or (B, w), zeros when omitted.
    """
    data, batched = _batched(x)
    params.validate()
    n_batch, steps, dim = data.shape
    if steps == 0:
        raise DegenerateInputError("GRU over an empty sequence")
    if dim != params.input_dim:
        raise DimensionError(f"GRU expects input dim {params.input_dim}, got {dim}")
    width = params.width
    if h0 is None:
        h0 = constant(np.zeros(width))
    if h0.shape not in ((width,), (n_batch, width)) or (h0.data.ndim == 2 and not batched):
        raise DimensionError(f"h0 shape {h0.shape} does not match width {width}")

    p = params
    xz = data @ p.W_z.data.T + p.b_z.data
    xr = data @ p.W_r.data.T + p.b_r.data
    xh = data @ p.W_h.data.T + p.b_h.data

    h_prev = np.broadcast_to(h0.data, (n_batch, width)).copy()
    prevs = np.empty((n_batch, steps, width))
    zs = np.empty_like(prevs)
    rs = np.empty_like(prevs)
    ns = np.empty_like(prevs)
    hs = np.empty_like(prevs)
    for t in range(steps):
        z = _sigmoid(xz[:, t] + h_prev @ p.U_z.data.T)
        r = _sigmoid(xr[:, t] + h_prev @ p.U_r.data.T)
        n = np.tanh(xh[:, t] + (r * h_prev) @ p.U_h.data.T)
        h = (1.0 - z) * h_prev + z * n
        prevs[:, t], zs[:, t], rs[:, t], ns[:, t], hs[:, t] = h_prev, z, r, n, h
        h_prev = h

    parents = (x, h0) + tuple(p.values())
    out = node(hs if batched else hs[0], parents, 'gru_sequence')

    def _backward(grad):
        g_out = grad if batched else grad[None]
        da_z = np.empty_like(prevs)
        da_r = np.empty_like(prevs)
        da_h = np.empty_like(prevs)
        carry = np.zeros((n_batch, width))
        for t in reversed(range(steps)):
            dh = g_out[:, t] + carry
            z, r, n, h_prev = zs[:, t], rs[:, t], ns[:, t], prevs[:, t]
            dn = dh * z
            dz = dh * (n - h_prev)
            dh_prev = dh * (1.0 - z)
            dah = dn * (1.0 - n * n)
            d_rh = dah @ p.U_h.data
            dar = d_rh * h_prev * r * (1.0 - r)
            daz = dz * z * (1.0 - z)
            dh_prev += d_rh * r + dar @ p.U_r.data + daz @ p.U_z.data
            da_z[:, t], da_r[:, t], da_h[:, t] = daz, dar, dah
            carry = dh_prev

        flat_x = data.reshape(-1, dim)
        flat_prev = prevs.reshape(-1, width)
        flat_rh = (rs * prevs).reshape(-1, width)
        for gate, da, hidden in (('z', da_z, flat_prev), ('r', da_r, flat_prev), ('h', da_h, flat_rh)):
            flat_da = da.reshape(-1, width)
            W, U, b = getattr(p, f'W_{gate}'), getattr(p, f'U_{gate}'), getattr(p, f'b_{gate}')
            if W.requires_grad:
                W.grad += flat_da.T @ flat_x
            if U.requires_grad:
                U.grad += flat_da.T @ hidden
            if b.requires_grad:
                b.grad += flat_da.sum(axis=0)
        if x.requires_grad:
            g_x = da_z @ p.W_z.data + da_r @ p.W_r.data + da_h @ p.W_h.data
            x.grad += g_x if batched else g_x[0]
        if h0.requires_grad:
            h0.grad += carry if h0.data.ndim == 2 else carry.sum(axis=0)
    out._backward = _backward
    return out


def mean_pool_time(x, lengths=None):
    """Column-wise mean over time.

    (T, d) -> (d,). (B, T, d) -> (B, d), averaging only the first lengths[b]
    steps of row b when lengths is given (padded batches).
    """
    data, batched = _batched(x)
    n_batch, steps, _ = data.shape
    if steps == 0:
        raise DegenerateInputError("Mean pooling over an empty sequence")
    if lengths is None:
        lengths = np.full(n_batch, steps)
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.shape != (n_batch,):
        raise DimensionError(f"lengths shape {lengths.shape} does not match batch {n_batch}")
    if np.any(lengths < 1) or np.any(lengths > steps):
        raise DegenerateInputError(f"Valid lengths must lie in [1, {steps}]")

    mask = (np.arange(steps)[None, :] < lengths[:, None]).astype(np.float64)
    weights = mask / lengths[:, None]
    pooled = np.einsum('bt,btd->bd', weights, data)
    out = node(pooled if batched else pooled[0], (x,), 'mean_pool_time')

    def _backward(grad):
        g = grad if batched else grad[None]
        g_x = weights[:, :, None] * g[:, None, :]
        x.grad += g_x if batched else g_x[0]
    out._backward = _backward
    return out


def grl(x, lam):
    """Gradient reversal: identity forward, -lam * upstream gradient backward"""
    lam = float(lam)
    if lam < 0.0:
        raise DomainError(f"GRL strength must be >= 0, got {lam}")
    out = node(x.data, (x,), 'grl')

    def _backward(grad):
        x.grad += (-lam) * grad
    out._backward = _backward
    return out


def concat(values, axis=-1):
    """Concatenate along the feature axis"""
    if not values:
        raise DimensionError("Nothing to concatenate")
    arrays = [v.data for v in values]
    try:
        joined = np.concatenate(arrays, axis=axis)
    except ValueError as e:
        raise DimensionError(f"concat: {e}")
    sizes = np.cumsum([a.shape[axis] for a in arrays])[:-1]
    out = node(joined, tuple(values), 'concat')

    def _backward(grad):
        for value, piece in zip(values, np.split(grad, sizes, axis=axis)):
            if value.requires_grad:
                value.grad += piece
    out._backward = _backward
    return out


def weighted_cross_entropy(logits, labels, class_weights):
    """-w[y] * log softmax(logits)[y], averaged over the batch.

    logits (K,) with an integer label gives the per-sample loss; logits
    (B, K) with labels (B,) gives the batch mean.
    """
    data = logits.data
    batched = data.ndim == 2
    scores = data if batched else data[None]
    n_batch, n_classes = scores.shape
    if n_classes < 2:
        raise DimensionError(f"Cross-entropy needs K >= 2 classes, got {n_classes}")
    weights = np.asarray(class_weights, dtype=np.float64)
    if weights.shape != (n_classes,):
        raise DimensionError(f"Expected {n_classes} class weights, got shape {weights.shape}")
    if np.any(weights <= 0.0):
        raise DomainError("Class weights must be > 0")
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape != (n_batch,):
        raise DimensionError(f"Expected {n_batch} labels, got {labels.shape}")
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise LabelIndexError(f"Labels must lie in [0, {n_classes})")

    shifted = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    rows = np.arange(n_batch)
    sample_weights = weights[labels]
    loss = -np.sum(sample_weights * log_probs[rows, labels]) / n_batch
    out = node(loss, (logits,), 'weighted_cross_entropy')

    def _backward(grad):
        g = np.exp(log_probs)
        g[rows, labels] -= 1.0
        g *= (sample_weights / n_batch)[:, None] * grad
        logits.grad += g if batched else g[0]
    out._backward = _backward
    return out
