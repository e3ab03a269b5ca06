import os
import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.ndimage import gaussian_filter

from config import DATA_CONFIG, LOGGING_CONFIG
from errors import DatasetError
from log_setup import setup_logging
from image_io import read_image, write_csv, write_pgm
from noise_model.synthesis import DEFAULT_MODE, NoiseParams, SynthesisMode, noise_params, sample_mixture, synthesize
from seeding import make_rng

IMAGE_SUFFIXES = ('.pgm', '.fbit')


class DataProcessor:
    """Loads image directories and builds synthetic clean/noisy corpora"""

    def __init__(self, data_dir: str = DATA_CONFIG['data_dir'], log_file: str = LOGGING_CONFIG['file']):
        self.data_dir = data_dir
        self.log_file = log_file
        self.setup_logging()

    def setup_logging(self):
        setup_logging(self.log_file)
        self.logger = logging.getLogger(__name__)

    def list_images(self, directory: str) -> List[str]:
        if not os.path.isdir(directory):
            raise DatasetError(f"image directory not found: {directory}")
        paths = sorted(os.path.join(directory, name) for name in os.listdir(directory)
                       if name.lower().endswith(IMAGE_SUFFIXES))
        if not paths:
            raise DatasetError(f"no .pgm or .fbit images in {directory}")
        return paths

    def load_images(self, directory: str) -> Tuple[List[str], List[np.ndarray]]:
        paths = self.list_images(directory)
        images = [read_image(p) for p in paths]
        self.logger.info(f"loaded {len(images)} images from {directory}")
        return paths, images

    def synthetic_clean_images(self, count: int = DATA_CONFIG['corpus_size'], size: int = DATA_CONFIG['image_size'],
                               seed: int = 0) -> List[np.ndarray]:
        """Piecewise-smooth textured scenes in [0.1, 0.9]: gradient, rectangles, blobs, a faint sinusoid"""
        rng = make_rng(seed, 'corpus')
        yy, xx = np.mgrid[0:size, 0:size] / float(size)
        images = []
        for _ in range(count):
            angle = rng.uniform(0, 2 * np.pi)
            image = 0.3 + 0.2 * (np.cos(angle) * xx + np.sin(angle) * yy)
            for _ in range(int(rng.integers(2, 6))):
                top, left = rng.integers(0, size, 2)
                h, w = rng.integers(size // 8, size // 2, 2)
                image[top:top + h, left:left + w] = rng.uniform(0.1, 0.9)
            for _ in range(int(rng.integers(2, 6))):
                cy, cx = rng.uniform(0, 1, 2)
                radius = rng.uniform(0.05, 0.2)
                blob = np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * radius ** 2))
                image += rng.uniform(-0.3, 0.3) * blob
            image = gaussian_filter(image, sigma=rng.uniform(0.5, 1.5))
            freq = rng.uniform(4, 16)
            image += 0.03 * np.sin(2 * np.pi * freq * (xx * np.cos(angle) - yy * np.sin(angle)))
            low, high = image.min(), image.max()
            images.append(0.1 + 0.8 * (image - low) / max(high - low, 1e-12))
        self.logger.info(f"generated {count} synthetic clean images {size}x{size}")
        return images

    def synthesize_corpus(self, cleans: Sequence[np.ndarray], params: Optional[NoiseParams] = None,
                          mixture: Optional[Tuple[Tuple[float, float], Tuple[float, float]]] = None,
                          mode: SynthesisMode = DEFAULT_MODE, seed: int = 0) -> Tuple[List[np.ndarray], List[NoiseParams]]:
        """One noisy realisation per clean image under fixed or per-image mixture parameters"""
        if params is None and mixture is None:
            raise DatasetError("either fixed noise parameters or a mixture range is required")
        drawn = sample_mixture(mixture, len(cleans), seed) if mixture is not None else [params] * len(cleans)
        noisy = [synthesize(clean, p, mode, seed=seed * 1_000_003 + i).data for i, (clean, p) in enumerate(zip(cleans, drawn))]
        return noisy, list(drawn)

    def save_corpus(self, directory: str, images: Sequence[np.ndarray], names: Optional[Sequence[str]] = None,
                    params: Optional[Sequence[NoiseParams]] = None, bit_depth: int = 16) -> List[str]:
        os.makedirs(directory, exist_ok=True)
        names = names or [f"img_{i:04d}.pgm" for i in range(len(images))]
        paths = []
        for name, image in zip(names, images):
            path = os.path.join(directory, os.path.splitext(os.path.basename(name))[0] + '.pgm')
            write_pgm(path, image, bit_depth)
            paths.append(path)
        if params is not None:
            table = pd.DataFrame({'path': [os.path.basename(p) for p in paths],
                                  'alpha': [p.alpha for p in params],
                                  'sigma': [p.sigma for p in params]})
            write_csv(table, os.path.join(directory, DATA_CONFIG['params_file']))
        self.logger.info(f"wrote {len(paths)} images to {directory}")
        return paths

    def load_params(self, directory: str) -> Optional[List[NoiseParams]]:
        path = os.path.join(directory, DATA_CONFIG['params_file'])
        if not os.path.exists(path):
            return None
        table = pd.read_csv(path)
        return [noise_params(a, s) for a, s in zip(table['alpha'], table['sigma'])]

    def extract_patches(self, images: Sequence[np.ndarray], size: int, count: int, seed: int = 0,
                        stage: str = 'corpus') -> Tuple[np.ndarray, np.ndarray]:
        """`count` random size x size crops (N, 1, size, size) and the source index of each"""
        if not images:
            raise DatasetError("no images to crop patches from")
        rng = make_rng(seed, stage, 1)
        sources = rng.integers(0, len(images), count)
        patches = np.empty((count, 1, size, size))
        for k, i in enumerate(sources):
            h, w = images[i].shape
            if h < size or w < size:
                raise DatasetError(f"image {i} ({h}x{w}) smaller than patch size {size}")
            top = int(rng.integers(0, h - size + 1))
            left = int(rng.integers(0, w - size + 1))
            patches[k, 0] = images[i][top:top + size, left:left + size]
        return patches, sources
