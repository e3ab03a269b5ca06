from training.pge_trainer import (Locus, PgeTrainer, PgeTrainingConfig, pge_loss, pge_supervised_loss,
                                  stabilization_locus, stabilized_variance, train_pge)
from training.denoiser_trainer import DenoiserTrainer, DenoiserTrainingConfig, prepare_image, train_denoiser

__all__ = [
    'Locus', 'PgeTrainer', 'PgeTrainingConfig', 'pge_loss', 'pge_supervised_loss', 'stabilization_locus',
    'stabilized_variance', 'train_pge',
    'DenoiserTrainer', 'DenoiserTrainingConfig', 'prepare_image', 'train_denoiser',
]
