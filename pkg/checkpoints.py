"""Network checkpoints on top of the FBIC container."""
import logging
import os

import numpy as np

from errors import FormatError
from image_io import atomic_write, load_checkpoint, save_checkpoint
from networks.bsn_net import BlindSpotNet, build_net
from networks.net_config import format_net_config, parse_net_config
from networks.pge_net import PgeNet

logger = logging.getLogger(__name__)

CHANNELS_KEY = 'meta.channels'


def save_pge(path: str, net: PgeNet):
    tensors = {CHANNELS_KEY: np.array(net.channels, dtype=np.float64)}
    tensors.update(net.state_dict())
    save_checkpoint(path, tensors)


def load_pge(path: str) -> PgeNet:
    tensors = load_checkpoint(path)
    if CHANNELS_KEY not in tensors:
        raise FormatError(f"{path} is not a PGE-Net checkpoint")
    channels = tuple(int(c) for c in tensors.pop(CHANNELS_KEY))
    net = PgeNet(channels)
    net.load_state_dict(tensors)
    return net


def netcfg_path(path: str) -> str:
    return path + '.netcfg'


def save_denoiser(path: str, net: BlindSpotNet):
    save_checkpoint(path, net.state_dict())
    atomic_write(netcfg_path(path), format_net_config(net.cfg).encode('utf-8'))


def load_denoiser(path: str) -> BlindSpotNet:
    cfg_path = netcfg_path(path)
    if not os.path.exists(cfg_path):
        raise FormatError(f"missing network description {cfg_path}")
    with open(cfg_path, 'r', encoding='utf-8') as f:
        cfg = parse_net_config(f.read())
    net = build_net(cfg)
    net.load_state_dict(load_checkpoint(path))
    logger.info(f"loaded '{cfg.name}' from {path}")
    return net
