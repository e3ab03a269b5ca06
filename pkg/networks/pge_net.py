"""Three-scale U-Net that maps a noisy image to its Poisson-Gaussian parameters."""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from config import PGE_CONFIG
from errors import ShapeError
from networks.layers import Conv2d, Module, PReLU
from noise_model.synthesis import NoiseParams, noise_params
from seeding import make_rng
from tensor_core import Tensor, as_tensor
from tensor_core import ops

logger = logging.getLogger(__name__)


def inverse_softplus(y: float) -> float:
    return float(np.log(np.expm1(y)))


class DoubleConv(Module):
    def __init__(self, c_in: int, c_out: int, rng: np.random.Generator):
        self.conv1 = Conv2d(c_in, c_out, 3, rng=rng)
        self.act1 = PReLU(c_out)
        self.conv2 = Conv2d(c_out, c_out, 3, rng=rng)
        self.act2 = PReLU(c_out)

    def forward(self, x) -> Tensor:
        return self.act2(self.conv2(self.act1(self.conv1(x))))


class PgeNet(Module):
    """Encoder (avg-pool down) / decoder (nearest up, skip concat), 1x1 head, global average pool.

    α̂ = alpha_floor + softplus(u₁), σ̂ = sigma_floor + softplus(u₂); the
    head bias starts the outputs at (alpha_init, sigma_init).
    """

    def __init__(self, channels: Sequence[int] = PGE_CONFIG['channels'], seed: int = 0,
                 rng: Optional[np.random.Generator] = None):
        rng = rng or make_rng(seed, 'pge_init')
        c1, c2, c3 = channels
        self.channels = tuple(channels)
        self.alpha_floor = PGE_CONFIG['alpha_floor']
        self.sigma_floor = PGE_CONFIG['sigma_floor']
        self.enc1 = DoubleConv(1, c1, rng)
        self.enc2 = DoubleConv(c1, c2, rng)
        self.bottom = DoubleConv(c2, c3, rng)
        self.dec2 = DoubleConv(c3 + c2, c2, rng)
        self.dec1 = DoubleConv(c2 + c1, c1, rng)
        self.head = Conv2d(c1, 2, kernel_size=1, rng=rng, scale=0.1)
        self.head.bias.data[:] = [
            inverse_softplus(PGE_CONFIG['alpha_init'] - self.alpha_floor),
            inverse_softplus(PGE_CONFIG['sigma_init'] - self.sigma_floor),
        ]
        for name, p in self.named_parameters():
            p.name = name

    def forward(self, y) -> Tuple[Tensor, Tensor]:
        """(N,1,H,W) -> (α̂, σ̂), each of shape (N,)"""
        y = as_tensor(y)
        if y.ndim != 4 or y.shape[1] != 1:
            raise ShapeError(f"PGE-Net expects (N, 1, H, W) input, got {y.shape}")
        if y.shape[2] % 4 or y.shape[3] % 4:
            raise ShapeError(f"PGE-Net needs spatial dims divisible by 4, got {y.shape[2]}x{y.shape[3]}")
        e1 = self.enc1(y)
        e2 = self.enc2(ops.avg_pool2d(e1))
        b = self.bottom(ops.avg_pool2d(e2))
        d2 = self.dec2(ops.concat([ops.nearest_upsample2x(b), e2], axis=1))
        d1 = self.dec1(ops.concat([ops.nearest_upsample2x(d2), e1], axis=1))
        u = ops.global_avg_pool(self.head(d1))
        alpha = ops.add(ops.softplus(ops.index(u, (slice(None), 0))), self.alpha_floor)
        sigma = ops.add(ops.softplus(ops.index(u, (slice(None), 1))), self.sigma_floor)
        return alpha, sigma


def as_batch(y) -> Tensor:
    y = as_tensor(y)
    if y.ndim == 2:
        return ops.reshape(y, (1, 1) + y.shape)
    return y


def pge_forward(y, net: PgeNet) -> NoiseParams:
    """Estimated (α̂, σ̂) of one single-channel image"""
    batch = as_batch(y)
    if batch.shape[0] != 1:
        raise ShapeError(f"pge_forward takes one image, got a batch of {batch.shape[0]}")
    alpha, sigma = net(batch)
    return noise_params(alpha.item(), sigma.item())
