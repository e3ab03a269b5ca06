import logging

import pytest

from errors import ConfigError
from noise_model import SynthesisMode
from run_config import load_run_config, parse_run_config

TEXT = """
# desk run
seed = 7
mode = literal
alpha = 0.05
sigma = 0.02
net_config = fbi-safe-17-case3
lr = 0.0005
epochs = 3
eta_patch = 5
"""


def test_parse_values():
    config = parse_run_config(TEXT)
    assert config.seed == 7
    assert config.mode is SynthesisMode.LITERAL
    assert config.noise_params().alpha == 0.05
    assert config.estimator_config().patch_size == 5


def test_training_configs_follow_run_config():
    config = parse_run_config(TEXT)
    pge = config.pge_training()
    denoiser = config.denoiser_training()
    assert pge.seed == denoiser.seed == 7
    assert pge.lr == denoiser.lr == 0.0005
    assert pge.epochs == denoiser.epochs == 3
    assert pge.estimator.patch_size == 5
    assert denoiser.net_config == 'fbi-safe-17-case3'


def test_defaults_when_empty():
    config = parse_run_config('')
    assert config.optimizer == 'adam'
    assert config.mode is SynthesisMode.MEAN_PRESERVING
    alpha_range, sigma_range = config.mixture_ranges()
    assert alpha_range == pytest.approx((0.0, 0.0256))
    assert sigma_range == pytest.approx((0.0, 0.06))
    assert config.denoiser_training().epochs == 40
    assert config.pge_training().epochs == 30


def test_overrides_win_over_file():
    config = parse_run_config(TEXT, seed=11, mode=None)
    assert config.seed == 11
    assert config.mode is SynthesisMode.LITERAL


@pytest.mark.parametrize('text', [
    'learning_rate = 0.1',
    'seed 7',
    'seed = 1\nseed = 2',
    '= 3',
    'seed = seven',
    'optimizer = sgd',
    'mode = sideways',
])
def test_invalid_config_rejected(text):
    with pytest.raises(ConfigError):
        parse_run_config(text)


def test_missing_noise_params():
    with pytest.raises(ConfigError):
        parse_run_config('alpha = 0.1').noise_params()


def test_load_from_file(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text(TEXT, encoding='utf-8')
    assert load_run_config(str(path)).seed == 7
    assert load_run_config(None, seed=3).seed == 3


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / 'absent.cfg'))


def test_resolved_config_is_logged(caplog):
    with caplog.at_level(logging.INFO, logger='run_config'):
        parse_run_config(TEXT).log_resolved()
    assert 'config seed = 7' in caplog.text
    assert 'config net_config = fbi-safe-17-case3' in caplog.text
