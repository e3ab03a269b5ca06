from tensor_core.tensor import Parameter, Tensor, as_tensor, backward, is_grad_enabled, no_grad
from tensor_core.linalg import jacobi_eigh, symmetric_eig
from tensor_core.optim import Adam
from tensor_core.gradcheck import check_gradients

__all__ = [
    'Tensor', 'Parameter', 'as_tensor', 'backward', 'no_grad', 'is_grad_enabled',
    'symmetric_eig', 'jacobi_eigh', 'Adam', 'check_gradients',
]
