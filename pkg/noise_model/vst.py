"""Generalized Anscombe transform, its closed-form unbiased inverse, and min-max normalization."""
import logging
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from config import NOISE_CONFIG, VST_CONFIG
from errors import IatGuardError, NoiseParamError, NormalizationError
from noise_model.synthesis import DEFAULT_MODE, NoiseParams, SynthesisMode
from tensor_core import Tensor, as_tensor
from tensor_core import ops

logger = logging.getLogger(__name__)

SQRT_3_2 = np.sqrt(1.5)


class NormalizationInfo(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: float
    beta: float

    @property
    def noise_variance(self) -> float:
        """Variance of the stabilized noise after normalization, β⁻²"""
        return self.beta ** -2


ParamsLike = Union[NoiseParams, Tuple[Tensor, Tensor]]


def _split_params(p: ParamsLike):
    if isinstance(p, NoiseParams):
        return p.alpha, p.sigma
    alpha, sigma = p
    alpha_values = alpha.data if isinstance(alpha, Tensor) else np.asarray(alpha)
    if np.min(alpha_values) < NOISE_CONFIG['alpha_floor']:
        raise NoiseParamError(f"alpha below floor {NOISE_CONFIG['alpha_floor']}")
    return alpha, sigma


def gat(y, p: ParamsLike) -> Tensor:
    """G = (2/α)·√(αY + 3α²/8 + σ²), radicand clamped at 0.

    `p` is either NoiseParams or an (alpha, sigma) pair of Tensors that
    broadcast against `y` (e.g. shape (N,1,1,1) for a batch).
    """
    y = as_tensor(y)
    alpha, sigma = _split_params(p)
    radicand = ops.add(ops.add(ops.mul(alpha, y), ops.mul(0.375, ops.square(alpha))), ops.square(sigma))
    root = ops.sqrt(ops.clamp(radicand, lo=0.0))
    return ops.mul(ops.div(2.0, alpha), root)


def normalize(g) -> Tuple[Tensor, NormalizationInfo]:
    """Z = (G − m)/β with m = min G and β = max G − min G over the whole image"""
    g = as_tensor(g)
    low = ops.reduce_min(g)
    high = ops.reduce_max(g)
    beta = high.item() - low.item()
    if not beta > 0:
        raise NormalizationError("cannot normalize a constant image (beta = 0)")
    z = ops.div(ops.sub(g, low), ops.sub(high, low))
    return z, NormalizationInfo(m=low.item(), beta=beta)


def denormalize(z_hat, info: NormalizationInfo) -> Tensor:
    return ops.add(ops.mul(as_tensor(z_hat), info.beta), info.m)


def iat(d, p: NoiseParams, mode: SynthesisMode = DEFAULT_MODE, strict: bool = False,
        clip: bool = True, guard: float = VST_CONFIG['iat_guard']) -> Tensor:
    """Closed-form unbiased inverse of the GAT.

    Estimates the Poisson mean; MEAN_PRESERVING rescales by α so the result
    estimates x. Below `guard` the negative-power terms are dropped (the
    algebraic inverse), or IatGuardError is raised when `strict`.
    """
    d = as_tensor(d)
    below = d.data <= guard
    if np.any(below):
        if strict:
            raise IatGuardError(f"{int(below.sum())} values at or below the IAT guard {guard}")
        logger.warning(f"IAT guard: {int(below.sum())} of {below.size} values use the algebraic inverse")
    keep = (~below).astype(np.float64)
    safe = ops.clamp(d, lo=guard)
    inv = ops.reciprocal(safe)
    inv2 = ops.square(inv)
    inv3 = ops.mul(inv2, inv)
    tail = ops.add(ops.sub(ops.mul(0.25 * SQRT_3_2, inv), ops.mul(11.0 / 8.0, inv2)),
                   ops.mul(0.625 * SQRT_3_2, inv3))
    offset = 0.125 + p.sigma ** 2 / p.alpha ** 2
    out = ops.sub(ops.add(ops.mul(0.25, ops.square(d)), ops.mul(keep, tail)), offset)
    if SynthesisMode(mode) is SynthesisMode.MEAN_PRESERVING:
        out = ops.mul(out, p.alpha)
    if clip:
        lo, hi = VST_CONFIG['clip']
        out = ops.clamp(out, lo=lo, hi=hi)
    return out
