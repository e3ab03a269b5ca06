import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import List, Sequence, Tuple

import numpy as np
import pandas as pd
from skimage.metrics import structural_similarity

from config import METRICS_CONFIG
from errors import DatasetError, ShapeError
from image_io import read_image

logger = logging.getLogger(__name__)


def _check_pair(pred: np.ndarray, clean: np.ndarray):
    if pred.shape != clean.shape:
        raise ShapeError(f"image shapes differ: {pred.shape} vs {clean.shape}")


def psnr(pred, clean, peak: float = 1.0) -> float:
    """10·log10(peak²/MSE) in dB, capped for identical images"""
    pred, clean = np.asarray(pred, dtype=np.float64), np.asarray(clean, dtype=np.float64)
    _check_pair(pred, clean)
    mse = float(np.mean((pred - clean) ** 2))
    if mse == 0.0:
        return METRICS_CONFIG['psnr_cap']
    return min(10.0 * np.log10(peak * peak / mse), METRICS_CONFIG['psnr_cap'])


def ssim(pred, clean, data_range: float = 1.0) -> float:
    """Mean SSIM over the windows lying fully inside the image (Gaussian weights, σ 1.5)"""
    pred, clean = np.asarray(pred, dtype=np.float64), np.asarray(clean, dtype=np.float64)
    _check_pair(pred, clean)
    size = METRICS_CONFIG['ssim_window']
    if pred.ndim != 2 or min(pred.shape) < size:
        raise ShapeError(f"SSIM needs a 2-D image at least {size} pixels wide, got {pred.shape}")
    return float(structural_similarity(pred, clean, data_range=data_range, gaussian_weights=True,
                                       sigma=METRICS_CONFIG['ssim_sigma'], use_sample_covariance=False,
                                       K1=METRICS_CONFIG['ssim_k1'], K2=METRICS_CONFIG['ssim_k2']))


def pair_by_name(pred_paths: Sequence[str], clean_paths: Sequence[str]) -> Tuple[List[str], List[str]]:
    """Match predictions to clean images by file stem; every image needs a partner"""
    def stems(paths):
        return {os.path.splitext(os.path.basename(p))[0]: p for p in paths}

    preds, cleans = stems(pred_paths), stems(clean_paths)
    if preds.keys() != cleans.keys():
        missing = sorted(preds.keys() ^ cleans.keys())
        raise DatasetError(f"prediction and clean names differ: {', '.join(missing[:5])}")
    names = sorted(preds)
    return [preds[n] for n in names], [cleans[n] for n in names]


def _score(pair) -> dict:
    pred_path, clean_path = pair
    pred, clean = read_image(pred_path), read_image(clean_path)
    return {'path': pred_path, 'psnr': psnr(pred, clean), 'ssim': ssim(pred, clean)}


def evaluate_pairs(pred_paths: Sequence[str], clean_paths: Sequence[str], workers: int = 4) -> pd.DataFrame:
    """One row per image (path, psnr, ssim); images are scored concurrently"""
    if len(pred_paths) != len(clean_paths):
        raise ShapeError(f"{len(pred_paths)} predictions for {len(clean_paths)} clean images")
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows: List[dict] = list(pool.map(_score, zip(pred_paths, clean_paths)))
    table = pd.DataFrame(rows, columns=['path', 'psnr', 'ssim'])
    if len(table):
        logger.info(f"evaluated {len(table)} images: mean PSNR {table['psnr'].mean():.2f} dB, "
                    f"mean SSIM {table['ssim'].mean():.4f}")
    return table
