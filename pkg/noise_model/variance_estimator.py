"""Eigenvalue-based estimate of additive white Gaussian noise variance.

Patch vectors of a noisy image have a covariance whose smallest
eigenvalues form a cluster at σ² (the directions carrying no signal).
The cluster is found as the largest prefix of the ascending spectrum
whose mean does not exceed its median; signal eigenvalues skew the mean
upward.
"""
import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from config import ESTIMATOR_CONFIG
from errors import EstimatorError, NonFiniteError, ShapeError
from tensor_core import Tensor, as_tensor, symmetric_eig
from tensor_core import ops
from tensor_core.gradcheck import numerical_gradient, relative_error

logger = logging.getLogger(__name__)


class EstimatorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    patch_size: int = ESTIMATOR_CONFIG['patch_size']
    stride: int = ESTIMATOR_CONFIG['stride']
    tolerance: float = ESTIMATOR_CONFIG['tolerance']

    @field_validator('patch_size')
    @classmethod
    def _patch(cls, v):
        if v < 3:
            raise ValueError(f"patch_size must be >= 3, got {v}")
        return v

    @field_validator('stride')
    @classmethod
    def _stride(cls, v):
        if v < 1:
            raise ValueError(f"stride must be >= 1, got {v}")
        return v


class EtaGradcheckReport(BaseModel):
    relative_error: float
    passed: bool
    tie: bool
    selected: int


def _as_image(z) -> Tensor:
    z = as_tensor(z)
    if z.ndim == 4 and z.shape[:2] == (1, 1):
        return ops.reshape(z, z.shape[2:])
    if z.ndim != 2:
        raise ShapeError(f"eta expects one single-channel image, got shape {z.shape}")
    return z


def patch_covariance(z, cfg: EstimatorConfig) -> Tensor:
    """Sample covariance (1/(n-1)) of mean-centered patch vectors"""
    image = _as_image(z)
    h, w = image.shape
    if h < cfg.patch_size or w < cfg.patch_size:
        raise EstimatorError(f"image {h}x{w} smaller than patch size {cfg.patch_size}")
    patches = ops.gather_patches(image, cfg.patch_size, cfg.stride)
    n, r = patches.shape
    if n < 2 * r:
        raise EstimatorError(f"too few patches: {n} available, need at least {2 * r}")
    centered = ops.sub(patches, ops.reduce_mean(patches, axis=0, keepdims=True))
    cov = ops.div(ops.matmul(ops.transpose(centered), centered), float(n - 1))
    if not np.all(np.isfinite(cov.data)):
        raise EstimatorError("non-finite patch covariance")
    return cov


def select_noise_cluster(eigenvalues: np.ndarray, tolerance: float) -> Tuple[int, float]:
    """Size i of the retained prefix and its slack mean - median·(1+τ)"""
    r = eigenvalues.size
    prefix_mean = np.cumsum(eigenvalues) / np.arange(1, r + 1)
    for i in range(r, 0, -1):
        median = np.median(eigenvalues[:i])
        slack = prefix_mean[i - 1] - median * (1.0 + tolerance)
        if slack <= 0:
            return i, slack
    return 1, 0.0


def eta(z, cfg: Optional[EstimatorConfig] = None) -> Tensor:
    """Estimated noise variance of `z` as a differentiable scalar.

    The retained index set is treated as constant; the gradient flows through
    the selected eigenvalues only.
    """
    cfg = cfg or EstimatorConfig()
    cov = patch_covariance(z, cfg)
    try:
        eigenvalues, _ = symmetric_eig(cov)
    except NonFiniteError as e:
        raise EstimatorError(f"eigen-decomposition failed: {e}")
    selected, _ = select_noise_cluster(eigenvalues.data, cfg.tolerance)
    estimate = ops.reduce_mean(ops.index(eigenvalues, slice(0, selected)))
    return ops.clamp(estimate, lo=0.0)


def eta_gradcheck(z, cfg: Optional[EstimatorConfig] = None, h: float = 1e-6,
                  tolerance: float = 1e-3) -> EtaGradcheckReport:
    """Compare ∂η/∂Z with central differences; selection ties are reported, not failed"""
    cfg = cfg or EstimatorConfig()
    image = Tensor(np.array(as_tensor(z).data, dtype=np.float64), requires_grad=True)

    eigenvalues, _ = symmetric_eig(patch_covariance(image.detach(), cfg))
    selected, slack = select_noise_cluster(eigenvalues.data, cfg.tolerance)
    scale = max(float(np.max(np.abs(eigenvalues.data))), 1e-300)
    tie = abs(slack) <= 1e-6 * scale

    eta(image, cfg).backward()
    analytic = image.grad.copy()

    def at_fixed_selection():
        values, _ = symmetric_eig(patch_covariance(image.detach(), cfg))
        return ops.reduce_mean(ops.index(values, slice(0, selected)))

    numeric = numerical_gradient(at_fixed_selection, image, h)
    error = relative_error(analytic, numeric)
    if tie:
        logger.warning(f"eta selection boundary tie (slack {slack:.3e}); gradient compared at fixed selection")
    return EtaGradcheckReport(relative_error=error, passed=error <= tolerance, tie=tie, selected=selected)
