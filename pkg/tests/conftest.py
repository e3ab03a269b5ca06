import numpy as np
import pytest

from data_processor import DataProcessor
from networks.net_config import LayerSpec, NetConfig, grid_taps


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def processor(tmp_path):
    return DataProcessor(data_dir=str(tmp_path / 'data'), log_file=str(tmp_path / 'logs' / 'test.log'))


@pytest.fixture
def tiny_safe_config():
    """Three-layer parity-safe stack, width 3, small enough for Jacobian checks"""
    layers = (
        LayerSpec(taps=grid_taps(3, 1, center=False), in_channels=1, out_channels=3),
        LayerSpec(taps=grid_taps(3, 2), in_channels=3, out_channels=3, residual_module=True),
        LayerSpec(taps=grid_taps(3, 2), in_channels=3, out_channels=3),
    )
    return NetConfig(name='tiny-safe', width=3, layers=layers, head=(3, 2))


@pytest.fixture
def unmasked_config():
    layers = (LayerSpec(taps=grid_taps(3, 1), in_channels=1, out_channels=4),)
    return NetConfig(name='unmasked', width=4, layers=layers, head=(4, 2))
