"""Phase 1: train PGE-Net so that the GAT with its estimates stabilizes the noise to unit variance."""
import logging
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel

from config import LOGGING_CONFIG, PGE_CONFIG
from errors import DatasetError, NonFiniteError, TrainingDivergedError
from log_setup import setup_logging
from networks.pge_net import PgeNet
from noise_model.synthesis import NoiseParams, noise_params
from noise_model.variance_estimator import EstimatorConfig, eta
from noise_model.vst import gat
from seeding import make_rng
from tensor_core import Adam, Tensor, as_tensor, no_grad
from tensor_core import ops

logger = logging.getLogger(__name__)


def _as_nchw(images) -> Tensor:
    images = as_tensor(images)
    if images.ndim == 3:
        images = ops.reshape(images, (images.shape[0], 1) + images.shape[1:])
    if images.ndim != 4 or images.shape[1] != 1:
        raise DatasetError(f"expected a batch of single-channel images, got shape {images.shape}")
    return images


def pge_loss(batch, net: PgeNet, cfg: Optional[EstimatorConfig] = None) -> Tensor:
    """Σ_j (η(G_{α̂,σ̂}(Y⁽ʲ⁾)) − 1)² over the batch"""
    batch = _as_nchw(batch)
    if batch.shape[0] == 0:
        raise DatasetError("pge_loss needs a non-empty batch")
    cfg = cfg or EstimatorConfig()
    alpha, sigma = net(batch)
    if np.any(alpha.data - net.alpha_floor < 1e-12):
        logger.warning("alpha estimate sits on its floor; its gradient vanishes there")
    shape = (batch.shape[0], 1, 1, 1)
    g = gat(batch, (ops.reshape(alpha, shape), ops.reshape(sigma, shape)))
    terms = []
    for j in range(batch.shape[0]):
        estimate = eta(ops.index(g, (slice(j, j + 1),)), cfg)
        terms.append(ops.reshape(ops.square(ops.sub(estimate, 1.0)), (1,)))
    return ops.reduce_sum(ops.concat(terms, axis=0))


def pge_supervised_loss(batch, params: Sequence[NoiseParams], net: PgeNet) -> Tensor:
    """Σ_j (α̂ − α)² + (σ̂ − σ)²; ablation only"""
    batch = _as_nchw(batch)
    alpha, sigma = net(batch)
    true_alpha = np.array([p.alpha for p in params])
    true_sigma = np.array([p.sigma for p in params])
    return ops.add(ops.reduce_sum(ops.square(ops.sub(alpha, true_alpha))),
                   ops.reduce_sum(ops.square(ops.sub(sigma, true_sigma))))


class PgeTrainingConfig(BaseModel):
    seed: int = 0
    lr: float = PGE_CONFIG['lr']
    betas: Tuple[float, float] = PGE_CONFIG['betas']
    batch_size: int = PGE_CONFIG['batch_size']
    epochs: int = PGE_CONFIG['epochs']
    channels: Tuple[int, int, int] = PGE_CONFIG['channels']
    estimator: EstimatorConfig = EstimatorConfig()
    supervised: bool = False


class PgeTrainer:
    def __init__(self, config: Optional[PgeTrainingConfig] = None, log_file: str = LOGGING_CONFIG['file']):
        self.config = config or PgeTrainingConfig()
        self.log_file = log_file
        self.setup_logging()
        self.history: List[dict] = []

    def setup_logging(self):
        setup_logging(self.log_file)
        self.logger = logging.getLogger(__name__)

    def _loss(self, net: PgeNet, images: np.ndarray, params: Optional[Sequence[NoiseParams]]) -> Tensor:
        if self.config.supervised:
            if params is None:
                raise DatasetError("supervised estimator training needs the true noise parameters")
            return pge_supervised_loss(images, params, net)
        return pge_loss(images, net, self.config.estimator)

    def train(self, images, params: Optional[Sequence[NoiseParams]] = None) -> Tuple[PgeNet, pd.DataFrame]:
        """Adam over shuffled mini-batches of noisy patches (N,1,H,W) or (N,H,W)"""
        data = np.asarray(as_tensor(images).data)
        if data.ndim == 3:
            data = data[:, None]
        if data.shape[0] == 0:
            raise DatasetError("cannot train PGE-Net on an empty dataset")
        cfg = self.config
        net = PgeNet(cfg.channels, seed=cfg.seed)
        optimizer = Adam(net.parameters(), lr=cfg.lr, betas=cfg.betas)
        rng = make_rng(cfg.seed, 'pge_batches')
        self.history = []
        self.logger.info(f"training PGE-Net on {data.shape[0]} patches {data.shape[2]}x{data.shape[3]}, "
                         f"{cfg.epochs} epochs, batch {cfg.batch_size}, lr {cfg.lr}"
                         f"{', supervised' if cfg.supervised else ''}")

        for epoch in range(1, cfg.epochs + 1):
            started = time.time()
            order = rng.permutation(data.shape[0])
            losses = []
            for step, start in enumerate(range(0, order.size, cfg.batch_size), start=1):
                idx = order[start:start + cfg.batch_size]
                batch_params = [params[i] for i in idx] if params is not None else None
                try:
                    loss = self._loss(net, data[idx], batch_params)
                    optimizer.zero_grad()
                    loss.backward()
                except NonFiniteError as e:
                    raise TrainingDivergedError(f"PGE-Net diverged at epoch {epoch} step {step}: {e}")
                optimizer.step()
                losses.append(loss.item())
                self.history.append({'epoch': epoch, 'step': step, 'loss': loss.item()})
            self.logger.info(f"epoch {epoch}/{cfg.epochs}: mean loss {np.mean(losses):.6f} "
                             f"({time.time() - started:.1f}s)")
        return net, pd.DataFrame(self.history, columns=['epoch', 'step', 'loss'])


def train_pge(images, config: Optional[PgeTrainingConfig] = None,
              params: Optional[Sequence[NoiseParams]] = None) -> Tuple[PgeNet, pd.DataFrame]:
    return PgeTrainer(config).train(images, params)


def stabilized_variance(images, estimates: Sequence[NoiseParams], cfg: Optional[EstimatorConfig] = None) -> np.ndarray:
    """η of each GAT-transformed image under its own parameter pair"""
    batch = _as_nchw(images)
    values = []
    with no_grad():
        for j, p in enumerate(estimates):
            values.append(eta(gat(ops.index(batch, (slice(j, j + 1),)), p), cfg).item())
    return np.array(values)


class Locus(BaseModel):
    points: List[Tuple[float, float]]
    tolerance: float
    alpha_grid: List[float]
    sigma_grid: List[float]
    eta_map: List[List[float]]

    def near(self, alpha: float, sigma: float) -> bool:
        """Whether some locus point lies within one grid cell of (alpha, sigma)"""
        d_alpha = np.max(np.diff(self.alpha_grid)) if len(self.alpha_grid) > 1 else 0.0
        d_sigma = np.max(np.diff(self.sigma_grid)) if len(self.sigma_grid) > 1 else 0.0
        return any(abs(a - alpha) <= d_alpha and abs(s - sigma) <= d_sigma for a, s in self.points)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.points, columns=['alpha', 'sigma'])


def stabilization_locus(patch, alpha_grid: Sequence[float], sigma_grid: Sequence[float], tol: float,
                        cfg: Optional[EstimatorConfig] = None) -> Locus:
    """Brute-force sweep of (α̂, σ̂); keep pairs with |η(G_{α̂,σ̂}(patch)) − 1| ≤ tol"""
    if len(alpha_grid) == 0 or len(sigma_grid) == 0:
        raise DatasetError("locus grids must be non-empty")
    patch = as_tensor(patch)
    eta_map = np.zeros((len(alpha_grid), len(sigma_grid)))
    points = []
    with no_grad():
        for i, a in enumerate(alpha_grid):
            for k, s in enumerate(sigma_grid):
                value = eta(gat(patch, noise_params(a, s)), cfg).item()
                eta_map[i, k] = value
                if abs(value - 1.0) <= tol:
                    points.append((float(a), float(s)))
    logger.info(f"locus: {len(points)} of {eta_map.size} grid points within {tol} of unit variance")
    return Locus(points=points, tolerance=tol, alpha_grid=[float(a) for a in alpha_grid],
                 sigma_grid=[float(s) for s in sigma_grid], eta_map=eta_map.tolist())
