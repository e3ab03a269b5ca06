NOISE_CONFIG = {
    'alpha_floor': 1e-6,
    'mode': 'mean_preserving',
    'alpha_range': (0.0, 0.16 ** 2),
    'sigma_range': (0.0, 0.06),
}

VST_CONFIG = {
    'iat_guard': 0.1,
    'clip': (0.0, 1.0),
}

ESTIMATOR_CONFIG = {
    'patch_size': 7,
    'stride': 3,
    'tolerance': 1e-3,
    'jitter': 1e-12,
}

EIG_CONFIG = {
    'max_sweeps': 60,
    'tolerance': 1e-12,
    'symmetry_tolerance': 1e-9,
    'max_size': 256,
}

PGE_CONFIG = {
    'channels': (16, 32, 64),
    'alpha_floor': 1e-4,
    'sigma_floor': 1e-6,
    'alpha_init': 0.05,
    'sigma_init': 0.01,
    'lr': 1e-3,
    'betas': (0.9, 0.999),
    'batch_size': 4,
    'epochs': 30,
    'patch_size': 64,
}

BSN_CONFIG = {
    'default_preset': 'fbi-safe-17',
    'width': 32,
    'prelu_init': 0.25,
    'a1_scale': 0.1,
    'check_size': 16,
    'check_batch': 50,
}

DENOISER_CONFIG = {
    'lr': 1e-3,
    'betas': (0.9, 0.999),
    'batch_size': 4,
    'epochs': 40,
    'patch_size': 64,
}

METRICS_CONFIG = {
    'psnr_cap': 99.0,
    'ssim_window': 11,
    'ssim_sigma': 1.5,
    'ssim_k1': 0.01,
    'ssim_k2': 0.03,
}

DATA_CONFIG = {
    'data_dir': 'data',
    'image_size': 128,
    'corpus_size': 100,
    'params_file': 'params.csv',
    'history_file': 'history.csv',
}

# Stage ids for expanding the global seed; never renumber.
SEED_STAGES = {
    'synth': 1,
    'mixture': 2,
    'pge_init': 3,
    'pge_batches': 4,
    'bsn_init': 5,
    'denoiser_batches': 6,
    'corpus': 7,
    'check': 8,
}

LOGGING_CONFIG = {
    'level': 'INFO',
    'format': '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    'file': 'logs/fbi.log'
}
