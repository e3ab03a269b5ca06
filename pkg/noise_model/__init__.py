from noise_model.synthesis import NoiseParams, SynthesisMode, noise_params, pg_variance, sample_mixture, synthesize
from noise_model.vst import NormalizationInfo, denormalize, gat, iat, normalize
from noise_model.variance_estimator import EstimatorConfig, eta, eta_gradcheck

__all__ = [
    'NoiseParams', 'SynthesisMode', 'noise_params', 'pg_variance', 'sample_mixture', 'synthesize',
    'NormalizationInfo', 'denormalize', 'gat', 'iat', 'normalize',
    'EstimatorConfig', 'eta', 'eta_gradcheck',
]
