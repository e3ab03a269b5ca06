import logging
from enum import Enum
from typing import List, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator

from config import NOISE_CONFIG
from errors import NoiseParamError, RangeError
from seeding import make_rng
from tensor_core import Tensor

logger = logging.getLogger(__name__)

ALPHA_FLOOR = NOISE_CONFIG['alpha_floor']


class SynthesisMode(str, Enum):
    """LITERAL: Y = α·Poisson(x) + N, E[Y] = αx.  MEAN_PRESERVING: Y = α·Poisson(x/α) + N, E[Y] = x."""
    LITERAL = 'literal'
    MEAN_PRESERVING = 'mean_preserving'


DEFAULT_MODE = SynthesisMode(NOISE_CONFIG['mode'])


class NoiseParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    alpha: float
    sigma: float

    @field_validator('alpha')
    @classmethod
    def _alpha_floor(cls, v):
        if not np.isfinite(v) or v < ALPHA_FLOOR:
            raise ValueError(f"alpha must be >= {ALPHA_FLOOR}, got {v}")
        return v

    @field_validator('sigma')
    @classmethod
    def _sigma_nonnegative(cls, v):
        if not np.isfinite(v) or v < 0:
            raise ValueError(f"sigma must be >= 0, got {v}")
        return v


def noise_params(alpha: float, sigma: float) -> NoiseParams:
    """Build NoiseParams, raising NoiseParamError instead of pydantic's ValidationError"""
    try:
        return NoiseParams(alpha=float(alpha), sigma=float(sigma))
    except ValidationError as e:
        raise NoiseParamError(str(e.errors()[0]['msg']))


ArrayLike = Union[Tensor, np.ndarray, float]


def _values(x: ArrayLike) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


def _check_unit_range(x: np.ndarray, what: str):
    if x.size and (np.min(x) < 0.0 or np.max(x) > 1.0):
        raise RangeError(f"{what} must lie in [0, 1], got [{np.min(x):.4g}, {np.max(x):.4g}]")


def pg_variance(x: ArrayLike, p: NoiseParams, mode: SynthesisMode = DEFAULT_MODE):
    """Noise variance of Y at clean intensity x"""
    values = _values(x)
    _check_unit_range(values, 'clean intensity')
    gain = p.alpha ** 2 if SynthesisMode(mode) is SynthesisMode.LITERAL else p.alpha
    result = gain * values + p.sigma ** 2
    return float(result) if np.ndim(result) == 0 else result


def synthesize(clean: ArrayLike, p: NoiseParams, mode: SynthesisMode = DEFAULT_MODE,
               seed: int = 0, clip: bool = True) -> Tensor:
    """Draw one Poisson-Gaussian realisation of `clean`; reproducible per seed"""
    x = _values(clean)
    _check_unit_range(x, 'clean image')
    if p.alpha < ALPHA_FLOOR:
        raise NoiseParamError(f"alpha below floor {ALPHA_FLOOR}")
    rng = make_rng(seed, 'synth')
    if SynthesisMode(mode) is SynthesisMode.LITERAL:
        counts = rng.poisson(x)
    else:
        counts = rng.poisson(x / p.alpha)
    noisy = p.alpha * counts + p.sigma * rng.standard_normal(x.shape)
    if clip:
        noisy = np.clip(noisy, 0.0, 1.0)
    return Tensor(noisy)


def sample_mixture(ranges: Sequence[Tuple[float, float]] = (NOISE_CONFIG['alpha_range'],
                                                            NOISE_CONFIG['sigma_range']),
                   count: int = 1, seed: int = 0) -> List[NoiseParams]:
    """Independent uniform (α, σ) draws; α is floored at ALPHA_FLOOR"""
    (a_lo, a_hi), (s_lo, s_hi) = ranges
    for name, lo, hi in (('alpha', a_lo, a_hi), ('sigma', s_lo, s_hi)):
        if not hi > lo:
            raise RangeError(f"{name} range [{lo}, {hi}] is empty or degenerate")
    if count < 0:
        raise RangeError(f"count must be >= 0, got {count}")
    rng = make_rng(seed, 'mixture')
    alphas = rng.uniform(a_lo, a_hi, size=count)
    sigmas = rng.uniform(s_lo, s_hi, size=count)
    return [noise_params(max(a, ALPHA_FLOOR), max(s, 0.0)) for a, s in zip(alphas, sigmas)]
