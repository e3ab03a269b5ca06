from typing import Callable, Sequence

import numpy as np
from pydantic import BaseModel

from tensor_core.tensor import Tensor


class GradcheckReport(BaseModel):
    max_relative_error: float
    per_input: list
    passed: bool


def numerical_gradient(fn: Callable[[], Tensor], tensor: Tensor, h: float = 1e-4) -> np.ndarray:
    """Central finite differences of a scalar `fn()` with respect to `tensor.data`"""
    grad = np.zeros(tensor.shape)
    flat = tensor.data.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = fn().item()
        flat[i] = original - h
        minus = fn().item()
        flat[i] = original
        out[i] = (plus - minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def check_gradients(fn: Callable[[], Tensor], inputs: Sequence[Tensor], h: float = 1e-4,
                    tolerance: float = 1e-4) -> GradcheckReport:
    """Compare reverse-mode gradients of `fn()` against central differences.

    `fn` must close over `inputs`; their `.data` is perturbed in place.
    """
    for t in inputs:
        t.grad = None
    fn().backward()
    errors = []
    for t in inputs:
        analytic = t.grad if t.grad is not None else np.zeros(t.shape)
        errors.append(relative_error(analytic, numerical_gradient(fn, t, h)))
    worst = max(errors) if errors else 0.0
    return GradcheckReport(max_relative_error=worst, per_input=errors, passed=worst <= tolerance)
