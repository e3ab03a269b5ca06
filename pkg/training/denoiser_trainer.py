"""Phase 2: train the blind-spot network on GAT-normalized noisy images."""
import logging
import time
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from config import BSN_CONFIG, DENOISER_CONFIG, LOGGING_CONFIG
from denoiser import affine_apply, dataset_loss, estimate_params, field_from_logits
from errors import DatasetError, NonFiniteError, TrainingDivergedError
from log_setup import setup_logging
from networks.analyzer import verify_blind_spot
from networks.bsn_net import BlindSpotNet, build_net
from networks.net_config import NetConfig, load_net_config
from networks.pge_net import PgeNet
from noise_model.synthesis import NoiseParams
from noise_model.vst import NormalizationInfo, gat, normalize
from seeding import make_rng
from tensor_core import Adam, Tensor
from tensor_core import ops

logger = logging.getLogger(__name__)


class DenoiserTrainingConfig(BaseModel):
    seed: int = 0
    net_config: str = BSN_CONFIG['default_preset']
    lr: float = DENOISER_CONFIG['lr']
    betas: Tuple[float, float] = DENOISER_CONFIG['betas']
    batch_size: int = DENOISER_CONFIG['batch_size']
    epochs: int = DENOISER_CONFIG['epochs']
    patch_size: int = DENOISER_CONFIG['patch_size']
    augment: bool = False
    supervised: bool = False


class PreparedImage(BaseModel):
    """One training image in the normalized GAT domain"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    z: np.ndarray
    info: NormalizationInfo
    params: NoiseParams
    target: Optional[np.ndarray] = None


def prepare_image(y: np.ndarray, estimator: Union[PgeNet, NoiseParams],
                  clean: Optional[np.ndarray] = None) -> PreparedImage:
    """Estimate once per image, GAT, then normalize with β taken over the full image"""
    y = np.asarray(y, dtype=np.float64)
    params = estimate_params(y, estimator)
    z, info = normalize(gat(y, params))
    target = None
    if clean is not None:
        target = (gat(clean, params).data - info.m) / info.beta
    return PreparedImage(z=z.data, info=info, params=params, target=target)


def _augment(arrays: List[np.ndarray], rng: np.random.Generator) -> List[np.ndarray]:
    turns = int(rng.integers(0, 4))
    flip = bool(rng.integers(0, 2))
    out = []
    for a in arrays:
        a = np.rot90(a, turns)
        out.append(np.ascontiguousarray(a[:, ::-1] if flip else a))
    return out


class DenoiserTrainer:
    def __init__(self, config: Optional[DenoiserTrainingConfig] = None, log_file: str = LOGGING_CONFIG['file']):
        self.config = config or DenoiserTrainingConfig()
        self.log_file = log_file
        self.setup_logging()
        self.history: List[dict] = []

    def setup_logging(self):
        setup_logging(self.log_file)
        self.logger = logging.getLogger(__name__)

    def _crop(self, image: PreparedImage, size: int, rng: np.random.Generator):
        h, w = image.z.shape
        top = int(rng.integers(0, h - size + 1))
        left = int(rng.integers(0, w - size + 1))
        window = (slice(top, top + size), slice(left, left + size))
        arrays = [image.z[window]]
        if self.config.supervised:
            arrays.append(image.target[window])
        if self.config.augment:
            arrays = _augment(arrays, rng)
        return arrays

    def _batch_loss(self, net: BlindSpotNet, patches: List[List[np.ndarray]],
                    infos: List[NormalizationInfo]) -> Tensor:
        z = Tensor(np.stack([p[0] for p in patches])[:, None])
        field = field_from_logits(net(z))
        f = affine_apply(z, field)
        if self.config.supervised:
            target = np.stack([p[1] for p in patches])[:, None]
            return ops.reduce_mean(ops.square(ops.sub(f, target)))
        return dataset_loss(z, f, field.a1, infos)

    def train(self, noisy: Sequence[np.ndarray], estimator: Union[PgeNet, NoiseParams],
              cleans: Optional[Sequence[np.ndarray]] = None,
              net_config: Optional[NetConfig] = None) -> Tuple[BlindSpotNet, pd.DataFrame]:
        cfg = self.config
        if len(noisy) == 0:
            raise DatasetError("cannot train the denoiser on an empty dataset")
        if cfg.supervised and (cleans is None or len(cleans) != len(noisy)):
            raise DatasetError("supervised training needs one clean image per noisy image")
        net_config = net_config or load_net_config(cfg.net_config)
        net = build_net(net_config, seed=cfg.seed)

        images = [prepare_image(y, estimator, cleans[i] if cfg.supervised else None)
                  for i, y in enumerate(noisy)]
        size = min(cfg.patch_size, min(min(im.z.shape) for im in images))
        optimizer = Adam(net.parameters(), lr=cfg.lr, betas=cfg.betas)
        rng = make_rng(cfg.seed, 'denoiser_batches')
        self.history = []
        self.logger.info(f"training '{net_config.name}' on {len(images)} images, patches {size}x{size}, "
                         f"{cfg.epochs} epochs, batch {cfg.batch_size}, lr {cfg.lr}"
                         f"{', supervised' if cfg.supervised else ''}")

        for epoch in range(1, cfg.epochs + 1):
            started = time.time()
            order = rng.permutation(len(images))
            losses = []
            for step, start in enumerate(range(0, order.size, cfg.batch_size), start=1):
                chosen = [images[i] for i in order[start:start + cfg.batch_size]]
                patches = [self._crop(im, size, rng) for im in chosen]
                try:
                    loss = self._batch_loss(net, patches, [im.info for im in chosen])
                    optimizer.zero_grad()
                    loss.backward()
                except NonFiniteError as e:
                    raise TrainingDivergedError(f"denoiser diverged at epoch {epoch} step {step}: {e}")
                optimizer.step()
                losses.append(loss.item())
                self.history.append({'epoch': epoch, 'step': step, 'loss': loss.item()})
            self.logger.info(f"epoch {epoch}/{cfg.epochs}: mean loss {np.mean(losses):.6f} "
                             f"({time.time() - started:.1f}s)")

        verify_blind_spot(net.cfg)
        return net, pd.DataFrame(self.history, columns=['epoch', 'step', 'loss'])


def train_denoiser(noisy: Sequence[np.ndarray], estimator: Union[PgeNet, NoiseParams],
                   config: Optional[DenoiserTrainingConfig] = None,
                   cleans: Optional[Sequence[np.ndarray]] = None) -> Tuple[BlindSpotNet, pd.DataFrame]:
    return DenoiserTrainer(config).train(noisy, estimator, cleans)
