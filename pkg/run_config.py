"""Run configuration: a plain-text `key = value` file validated by pydantic.

    # comment
    seed = 7
    mode = mean_preserving
    net_config = fbi-safe-17
"""
import logging
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, ValidationError

from config import BSN_CONFIG, DENOISER_CONFIG, ESTIMATOR_CONFIG, LOGGING_CONFIG, NOISE_CONFIG, PGE_CONFIG
from errors import ConfigError
from noise_model.synthesis import NoiseParams, SynthesisMode, noise_params
from noise_model.variance_estimator import EstimatorConfig
from training.denoiser_trainer import DenoiserTrainingConfig
from training.pge_trainer import PgeTrainingConfig

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    seed: int = 0
    mode: SynthesisMode = SynthesisMode(NOISE_CONFIG['mode'])
    alpha: Optional[float] = None
    sigma: Optional[float] = None
    alpha_min: float = NOISE_CONFIG['alpha_range'][0]
    alpha_max: float = NOISE_CONFIG['alpha_range'][1]
    sigma_min: float = NOISE_CONFIG['sigma_range'][0]
    sigma_max: float = NOISE_CONFIG['sigma_range'][1]
    mixture: bool = False
    net_config: str = BSN_CONFIG['default_preset']
    optimizer: str = 'adam'
    lr: Optional[float] = None
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: Optional[int] = None
    epochs: Optional[int] = None
    patch_size: int = DENOISER_CONFIG['patch_size']
    eta_patch: int = ESTIMATOR_CONFIG['patch_size']
    eta_stride: int = ESTIMATOR_CONFIG['stride']
    eta_tol: float = ESTIMATOR_CONFIG['tolerance']
    supervised: bool = False
    pge_supervised: bool = False
    augment: bool = False
    output_dir: str = 'runs'
    log_file: str = LOGGING_CONFIG['file']

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(patch_size=self.eta_patch, stride=self.eta_stride, tolerance=self.eta_tol)

    def noise_params(self) -> NoiseParams:
        if self.alpha is None or self.sigma is None:
            raise ConfigError("both alpha and sigma must be set")
        return noise_params(self.alpha, self.sigma)

    def mixture_ranges(self) -> Tuple[Tuple[float, float], Tuple[float, float]]:
        return (self.alpha_min, self.alpha_max), (self.sigma_min, self.sigma_max)

    def pge_training(self) -> PgeTrainingConfig:
        return PgeTrainingConfig(
            seed=self.seed,
            lr=self.lr if self.lr is not None else PGE_CONFIG['lr'],
            betas=(self.beta1, self.beta2),
            batch_size=self.batch_size or PGE_CONFIG['batch_size'],
            epochs=self.epochs if self.epochs is not None else PGE_CONFIG['epochs'],
            estimator=self.estimator_config(),
            supervised=self.pge_supervised,
        )

    def denoiser_training(self) -> DenoiserTrainingConfig:
        return DenoiserTrainingConfig(
            seed=self.seed,
            net_config=self.net_config,
            lr=self.lr if self.lr is not None else DENOISER_CONFIG['lr'],
            betas=(self.beta1, self.beta2),
            batch_size=self.batch_size or DENOISER_CONFIG['batch_size'],
            epochs=self.epochs if self.epochs is not None else DENOISER_CONFIG['epochs'],
            patch_size=self.patch_size,
            augment=self.augment,
            supervised=self.supervised,
        )

    def log_resolved(self):
        for key, value in self.model_dump(mode='json').items():
            logger.info(f"config {key} = {value}")


def parse_run_config(text: str, **overrides) -> RunConfig:
    values = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got '{line}'")
        key, value = (part.strip() for part in line.split('=', 1))
        if not key:
            raise ConfigError(f"line {line_no}: empty key")
        if key in values:
            raise ConfigError(f"line {line_no}: duplicate key '{key}'")
        values[key] = value
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        config = RunConfig(**values)
    except ValidationError as e:
        problems = '; '.join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid run config: {problems}")
    if config.optimizer != 'adam':
        raise ConfigError(f"unsupported optimizer '{config.optimizer}'")
    return config


def load_run_config(path: Optional[str] = None, **overrides) -> RunConfig:
    if path is None:
        return parse_run_config('', **overrides)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read run config '{path}': {e}")
    return parse_run_config(text, **overrides)
