"""Blind-spot network built from a NetConfig, plus the empirical blind-spot check."""
import logging
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel

from config import BSN_CONFIG
from errors import NetConfigError
from networks.analyzer import verify_blind_spot
from networks.layers import Conv2d, Module, PReLU, ResidualModule
from networks.net_config import HEAD, NetConfig
from seeding import make_rng
from tensor_core import Tensor, as_tensor, no_grad
from tensor_core import ops

logger = logging.getLogger(__name__)


class BlindSpotReport(BaseModel):
    passed: bool
    trials: int
    failures: int
    max_abs_change: float


class BlindSpotNet(Module):
    """Per-pixel (a₁-logit, a₀-logit) maps; within a layer: conv -> PReLU -> RM -> residual adds"""

    def __init__(self, cfg: NetConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.convs: List[Conv2d] = []
        self.acts: List[Optional[PReLU]] = []
        self.modules: List[Optional[ResidualModule]] = []
        for layer in cfg.layers:
            size, dilation, mask = layer.kernel()
            self.convs.append(Conv2d(layer.in_channels, layer.out_channels, size, dilation, mask, rng=rng))
            self.acts.append(PReLU(layer.out_channels) if layer.has_prelu else None)
            self.modules.append(ResidualModule(layer.out_channels, rng=rng) if layer.residual_module else None)

        self.head_convs: List[Conv2d] = []
        self.head_acts: List[PReLU] = []
        previous = cfg.layers[-1].out_channels
        for k, width in enumerate(cfg.head):
            self.head_convs.append(Conv2d(previous, width, kernel_size=1, rng=rng))
            if k < len(cfg.head) - 1:
                self.head_acts.append(PReLU(width))
            previous = width

        self.incoming: Dict[object, List[int]] = {}
        for edge in cfg.residuals:
            self.incoming.setdefault(edge.dst, []).append(edge.src)
        for name, p in self.named_parameters():
            p.name = name

    def forward(self, z) -> Tensor:
        z = as_tensor(z)
        if z.ndim != 4 or z.shape[1] != self.cfg.layers[0].in_channels:
            raise NetConfigError(f"network expects (N, {self.cfg.layers[0].in_channels}, H, W) input, got {z.shape}")
        outputs = [z]
        for k in range(1, self.cfg.depth + 1):
            h = self.convs[k - 1](outputs[-1])
            if self.acts[k - 1] is not None:
                h = self.acts[k - 1](h)
            if self.modules[k - 1] is not None:
                h = self.modules[k - 1](h)
            for src in self.incoming.get(k, ()):
                h = ops.add(h, outputs[src])
            outputs.append(h)

        h = outputs[-1]
        for src in self.incoming.get(HEAD, ()):
            h = ops.add(h, outputs[src])
        for k, conv in enumerate(self.head_convs):
            h = conv(h)
            if k < len(self.head_acts):
                h = self.head_acts[k](h)
        return h


def build_net(cfg: NetConfig, seed: int = 0, enforce_blind_spot: bool = True) -> BlindSpotNet:
    """He-initialized network; rejects any config whose output can see its own center pixel"""
    if enforce_blind_spot:
        verify_blind_spot(cfg)
    else:
        cfg.check_structure()
    if cfg.out_channels != 2:
        raise NetConfigError(f"network must end in 2 channels (a1, a0 logits), config '{cfg.name}' ends in {cfg.out_channels}")
    net = BlindSpotNet(cfg, make_rng(seed, 'bsn_init'))
    logger.info(f"built '{cfg.name}': {cfg.depth} spatial layers, {sum(p.size for p in net.parameters())} parameters")
    return net


def residual_module(x, module: ResidualModule) -> Tensor:
    return module(x)


def blind_spot_check(net: BlindSpotNet, trials: int = 1000, seed: int = 0,
                     size: int = BSN_CONFIG['check_size'], batch: int = BSN_CONFIG['check_batch']) -> BlindSpotReport:
    """Perturb one random pixel per trial by ±1 or ±100; outputs there must not change at all.

    Base and perturbed batches go through separate forward passes of
    identical shape, so any difference is a real dependence.
    """
    rng = make_rng(seed, 'check')
    deltas = np.array([1.0, -1.0, 100.0, -100.0])
    failures = 0
    worst = 0.0
    done = 0
    channels = net.cfg.layers[0].in_channels
    with no_grad():
        while done < trials:
            n = min(batch, trials - done)
            base = rng.random((n, channels, size, size))
            rows = rng.integers(0, size, n)
            cols = rng.integers(0, size, n)
            delta = deltas[rng.integers(0, deltas.size, n)]
            perturbed = base.copy()
            perturbed[np.arange(n), 0, rows, cols] += delta

            before = net(Tensor(base)).data[np.arange(n), :, rows, cols]
            after = net(Tensor(perturbed)).data[np.arange(n), :, rows, cols]
            changed = np.any(before != after, axis=1)
            failures += int(changed.sum())
            worst = max(worst, float(np.max(np.abs(before - after))))
            done += n

    report = BlindSpotReport(passed=failures == 0, trials=trials, failures=failures, max_abs_change=worst)
    if not report.passed:
        logger.warning(f"blind-spot check failed in {failures}/{trials} trials (max change {worst:.3e})")
    return report
