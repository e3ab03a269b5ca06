import logging
import threading
from contextlib import contextmanager
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from errors import GraphError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, 'grad_enabled', True)


@contextmanager
def no_grad():
    """Disable tape recording for the current thread"""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Tensor:
    """Dense float64 array with an optional reverse-mode tape entry.

    `_backward` maps the upstream gradient to one gradient per parent
    (None for parents that do not require grad).
    """

    def __init__(self, data, requires_grad: bool = False, _parents: Sequence['Tensor'] = (),
                 _backward: Optional[Callable] = None, _op: str = ''):
        self.data = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self._parents: Tuple['Tensor', ...] = tuple(_parents)
        self._backward = _backward
        self._op = _op

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def detach(self) -> 'Tensor':
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def backward(self, grad=None):
        backward(self, grad)

    def __repr__(self):
        flag = ', requires_grad=True' if self.requires_grad else ''
        return f"Tensor(shape={self.shape}{flag}, op='{self._op}')"

    # operator sugar; the real work lives in tensor_core.ops
    def __add__(self, other):
        from tensor_core import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from tensor_core import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from tensor_core import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from tensor_core import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from tensor_core import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from tensor_core import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from tensor_core import ops
        return ops.div(self, other)

    def __rtruediv__(self, other):
        from tensor_core import ops
        return ops.div(other, self)

    def __neg__(self):
        from tensor_core import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from tensor_core import ops
        return ops.matmul(self, other)

    def __getitem__(self, key):
        from tensor_core import ops
        return ops.index(self, key)


class Parameter(Tensor):
    """Trainable leaf; `name` is unique within one network"""

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name

    def __repr__(self):
        return f"Parameter(name='{self.name}', shape={self.shape})"


def as_tensor(value) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def make_result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: Callable, op: str) -> Tensor:
    """Wrap a forward result, enforcing finiteness and recording the tape entry"""
    data = np.asarray(data, dtype=np.float64)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"{op} produced non-finite values")
    needs_grad = is_grad_enabled() and any(p.requires_grad for p in parents)
    if not needs_grad:
        return Tensor(data, _op=op)
    return Tensor(data, requires_grad=True, _parents=parents, _backward=backward_fn, _op=op)


def _topological_order(root: Tensor):
    order = []
    state = {}
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        key = id(node)
        if expanded:
            state[key] = 2
            order.append(node)
            continue
        if state.get(key) == 2:
            continue
        if state.get(key) == 1:
            raise GraphError(f"cycle detected at {node!r}")
        state[key] = 1
        stack.append((node, True))
        for parent in node._parents:
            if not parent.requires_grad:
                continue
            parent_state = state.get(id(parent))
            if parent_state == 1:
                raise GraphError(f"cycle detected at {parent!r}")
            if parent_state is None:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, grad=None):
    """Populate `.grad` on every leaf reachable from `loss` that requires grad"""
    if grad is None:
        if loss.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {loss.shape}")
        grad = np.ones_like(loss.data)
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != loss.shape:
        raise ShapeError(f"seed gradient shape {grad.shape} != loss shape {loss.shape}")
    if not np.all(np.isfinite(loss.data)):
        raise NonFiniteError("loss is not finite")
    if not loss.requires_grad:
        logger.warning("backward() called on a tensor that does not require grad")
        return

    grads = {id(loss): grad}
    for node in reversed(_topological_order(loss)):
        node_grad = grads.pop(id(node), None)
        if node_grad is None:
            continue
        if not node._parents:
            node.grad = node_grad.copy() if node.grad is None else node.grad + node_grad
            continue
        parent_grads = node._backward(node_grad)
        for parent, parent_grad in zip(node._parents, parent_grads):
            if parent_grad is None or not parent.requires_grad:
                continue
            if parent_grad.shape != parent.shape:
                raise ShapeError(f"{node._op} backward produced {parent_grad.shape} for {parent.shape}")
            key = id(parent)
            grads[key] = parent_grad if key not in grads else grads[key] + parent_grad
