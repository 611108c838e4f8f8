# autodiff_modules/autodiff_value.py

import numpy as np

from errors import DimensionError, GraphError, NumericError


def as_tensor(data):
    """Coerce to a finite float64 array"""
    array = np.array(data, dtype=np.float64)
    if not np.all(np.isfinite(array)):
        raise NumericError("Tensor contains non-finite entries")
    return array


class Value:
    """Graph node: forward tensor, accumulated gradient, producing op and parents"""

    __slots__ = ('data', 'grad', 'op', 'parents', 'requires_grad', 'name', '_backward')

    def __init__(self, data, parents=(), op='leaf', requires_grad=True, name=None):
        self.data = as_tensor(data)
        self.grad = np.zeros_like(self.data)
        self.op = op
        self.parents = tuple(parents)
        self.requires_grad = requires_grad
        self.name = name
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        label = f" name={self.name}" if self.name else ""
        return f"Value(op={self.op}, shape={self.shape}{label})"

    def __add__(self, other):
        if not isinstance(other, Value):
            out = node(self.data + other, (self,), 'add_const')

            def _backward(grad):
                self.grad += grad
            out._backward = _backward
            return out
        if self.shape != other.shape:
            raise DimensionError(f"Cannot add shapes {self.shape} and {other.shape}")
        out = node(self.data + other.data, (self, other), 'add')

        def _backward(grad):
            self.grad += grad
            other.grad += grad
        out._backward = _backward
        return out

    __radd__ = __add__

    def __mul__(self, scale):
        if isinstance(scale, Value):
            raise TypeError("Value * Value is not supported; scale by a float")
        scale = float(scale)
        out = node(self.data * scale, (self,), 'scale')

        def _backward(grad):
            self.grad += scale * grad
        out._backward = _backward
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def sum(self):
        out = node(np.sum(self.data), (self,), 'sum')

        def _backward(grad):
            self.grad += grad
        out._backward = _backward
        return out


def constant(data, name=None):
    """Leaf that never needs a gradient (inputs, fixed masks)"""
    return Value(data, requires_grad=False, name=name)


def node(data, parents, op):
    """Interior node; needs a gradient iff any parent does"""
    return Value(data, parents, op, requires_grad=any(p.requires_grad for p in parents))


def topological_order(root):
    """Parents-before-children order; raises GraphError on a cycle"""
    order = []
    state = {}
    stack = [(root, False)]
    while stack:
        current, expanded = stack.pop()
        key = id(current)
        if expanded:
            state[key] = 2
            order.append(current)
            continue
        if state.get(key) == 2:
            continue
        if state.get(key) == 1:
            raise GraphError(f"Cycle detected at {current!r}")
        state[key] = 1
        stack.append((current, True))
        for parent in current.parents:
            parent_state = state.get(id(parent))
            if parent_state == 1:
                raise GraphError(f"Cycle detected at {parent!r}")
            if parent_state is None:
                stack.append((parent, False))
    return order


def backward(loss):
    """Reverse sweep from a scalar loss.

    Gradients of every reachable node are reset first, so each call yields
    fresh gradients; fan-out contributions accumulate additively. Returns a
    map from each reachable leaf that requires a gradient to its gradient.
    """
    if loss.data.size != 1:
        raise GraphError(f"Loss must be a scalar, got shape {loss.shape}")
    order = topological_order(loss)
    for value in order:
        value.grad = np.zeros_like(value.data)
    loss.grad = np.ones_like(loss.data)
    for value in reversed(order):
        if value._backward is not None and value.requires_grad:
            value._backward(value.grad)
    return {value: value.grad for value in order
            if not value.parents and value.requires_grad}
