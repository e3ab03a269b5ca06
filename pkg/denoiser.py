"""Pixelwise affine denoiser, its unbiased MSE-estimate losses, and end-to-end inference.

f = a₁·Z + a₀ with coefficients computed from context only. For such a
denoiser (1/n)‖Z − f‖² + (σ²/n)Σ(2a₁ − 1) is an unbiased estimate of the
true MSE, so it can be minimized from noisy data alone.
"""
import logging
import time
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from config import BSN_CONFIG
from errors import DatasetError, NoiseParamError, ShapeError
from networks.bsn_net import BlindSpotNet
from networks.pge_net import PgeNet, as_batch, pge_forward
from noise_model.synthesis import DEFAULT_MODE, NoiseParams, SynthesisMode
from noise_model.vst import NormalizationInfo, denormalize, gat, iat, normalize
from tensor_core import Tensor, as_tensor, no_grad
from tensor_core import ops

logger = logging.getLogger(__name__)


class AffineField(BaseModel):
    """a1 ∈ [0, 0.1] and a0 ∈ [0, 1] per pixel, shaped like the image batch"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    a1: Tensor
    a0: Tensor


class Timing(BaseModel):
    estimation: float
    network: float

    @property
    def total(self) -> float:
        return self.estimation + self.network


def field_from_logits(logits) -> AffineField:
    """(N,2,H,W) network output -> slopes 0.1·sigmoid and intercepts sigmoid, each (N,1,H,W)"""
    logits = as_tensor(logits)
    if logits.ndim != 4 or logits.shape[1] != 2:
        raise ShapeError(f"expected (N, 2, H, W) logits, got {logits.shape}")
    a1 = ops.mul(BSN_CONFIG['a1_scale'], ops.sigmoid(ops.index(logits, (slice(None), slice(0, 1)))))
    a0 = ops.sigmoid(ops.index(logits, (slice(None), slice(1, 2))))
    return AffineField(a1=a1, a0=a0)


def affine_apply(z, field: AffineField) -> Tensor:
    z = as_tensor(z)
    if field.a1.shape != z.shape or field.a0.shape != z.shape:
        raise ShapeError(f"affine field {field.a1.shape}/{field.a0.shape} does not match image {z.shape}")
    return ops.add(ops.mul(field.a1, z), field.a0)


def estimated_loss(z, f, a1, sigma2: float) -> Tensor:
    """(1/n)‖Z − f‖² + (σ²/n)Σ(2a₁ − 1) over every element of Z"""
    if sigma2 < 0:
        raise NoiseParamError(f"noise variance must be >= 0, got {sigma2}")
    z, f, a1 = as_tensor(z), as_tensor(f), as_tensor(a1)
    fidelity = ops.reduce_mean(ops.square(ops.sub(z, f)))
    divergence = ops.reduce_mean(ops.sub(ops.mul(2.0, a1), 1.0))
    return ops.add(fidelity, ops.mul(float(sigma2), divergence))


def dataset_loss(z, f, a1, infos: Sequence[Optional[NormalizationInfo]]) -> Tensor:
    """Mean over the batch of the per-image estimated loss with σ² = β⁻²"""
    z, f, a1 = as_tensor(z), as_tensor(f), as_tensor(a1)
    if z.ndim != 4:
        raise ShapeError(f"dataset_loss expects an (N, 1, H, W) batch, got {z.shape}")
    if len(infos) != z.shape[0] or any(info is None for info in infos):
        raise DatasetError(f"every image needs its normalization info ({len(infos)} for a batch of {z.shape[0]})")
    sigma2 = np.array([info.noise_variance for info in infos]).reshape(-1, 1, 1, 1)
    fidelity = ops.reduce_mean(ops.square(ops.sub(z, f)), axis=(1, 2, 3), keepdims=True)
    divergence = ops.reduce_mean(ops.sub(ops.mul(2.0, a1), 1.0), axis=(1, 2, 3), keepdims=True)
    return ops.reduce_mean(ops.add(fidelity, ops.mul(sigma2, divergence)))


Estimator = Union[PgeNet, NoiseParams]


def estimation_crop(y: Tensor) -> Tensor:
    """Top-left crop with sides divisible by 4, as PGE-Net requires"""
    h, w = y.shape[2:]
    return ops.index(y, (slice(None), slice(None), slice(0, h - h % 4), slice(0, w - w % 4)))


def estimate_params(y, estimator: Estimator) -> NoiseParams:
    if isinstance(estimator, NoiseParams):
        return estimator
    with no_grad():
        return pge_forward(estimation_crop(as_batch(y)), estimator)


def denoise(y, estimator: Estimator, net: BlindSpotNet, mode: SynthesisMode = DEFAULT_MODE,
            return_timing: bool = False):
    """x̂ = iat(denormalize(a₁·Z + a₀), α̂, σ̂) for one image; output shaped like the input"""
    y = as_tensor(y)
    batch = as_batch(y)
    if batch.shape[:2] != (1, 1):
        raise ShapeError(f"denoise takes one single-channel image, got {y.shape}")
    with no_grad():
        started = time.perf_counter()
        params = estimate_params(batch, estimator)
        estimated = time.perf_counter()
        z, info = normalize(gat(batch, params))
        f = affine_apply(z, field_from_logits(net(z)))
        x_hat = iat(denormalize(f, info), params, mode)
        finished = time.perf_counter()
    timing = Timing(estimation=estimated - started, network=finished - estimated)
    logger.debug(f"denoised {y.shape} in {timing.total:.3f}s (estimation {timing.estimation:.3f}s)")
    out = ops.reshape(x_hat, y.shape)
    return (out, timing) if return_timing else out
