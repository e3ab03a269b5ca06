"""CSV tables and matplotlib figures written by the command-line tools."""
import io
import logging
import os
from typing import List, Optional, Tuple

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from config import DATA_CONFIG
from image_io import atomic_write, write_csv
from training.pge_trainer import Locus

logger = logging.getLogger(__name__)


def _save_figure(fig, path: str):
    buffer = io.BytesIO()
    fig.savefig(buffer, format='png', dpi=120)
    plt.close(fig)
    atomic_write(path, buffer.getvalue())


def save_history(history: pd.DataFrame, out_dir: str) -> Tuple[str, str]:
    """history.csv plus loss.png (per-step loss and per-epoch mean)"""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, DATA_CONFIG['history_file'])
    write_csv(history, csv_path)

    png_path = os.path.join(out_dir, 'loss.png')
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(len(history)), history['loss'], alpha=0.4, label='step')
    per_epoch = history.groupby('epoch')['loss'].mean()
    steps_per_epoch = max(len(history) // max(len(per_epoch), 1), 1)
    ax.plot((per_epoch.index - 0.5) * steps_per_epoch, per_epoch.values, marker='o', label='epoch mean')
    ax.set_xlabel('step')
    ax.set_ylabel('loss')
    ax.legend()
    fig.tight_layout()
    _save_figure(fig, png_path)
    logger.info(f"wrote {csv_path} and {png_path}")
    return csv_path, png_path


def save_locus(loci: List[Locus], out_dir: str, plot: bool = False,
               truth: Optional[Tuple[float, float]] = None) -> List[str]:
    os.makedirs(out_dir, exist_ok=True)
    frames = []
    for k, locus in enumerate(loci):
        frame = locus.to_frame()
        frame.insert(0, 'patch', k)
        frames.append(frame)
    table = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=['patch', 'alpha', 'sigma'])
    csv_path = os.path.join(out_dir, 'locus.csv')
    write_csv(table, csv_path)
    written = [csv_path]

    if plot:
        png_path = os.path.join(out_dir, 'locus.png')
        fig, ax = plt.subplots(figsize=(5, 5))
        for k, locus in enumerate(loci):
            if locus.points:
                a, s = zip(*locus.points)
                ax.scatter(a, s, s=6, label=f"patch {k}")
        if truth is not None:
            ax.scatter([truth[0]], [truth[1]], marker='*', s=160, c='k', label='true')
        ax.set_xlabel('alpha')
        ax.set_ylabel('sigma')
        ax.legend(fontsize='x-small')
        fig.tight_layout()
        _save_figure(fig, png_path)
        written.append(png_path)
    logger.info(f"wrote {', '.join(written)}")
    return written


def save_alpha_histogram(alphas: np.ndarray, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(alphas, bins=min(30, max(len(alphas), 1)))
    ax.set_xlabel('estimated alpha')
    ax.set_ylabel('images')
    fig.tight_layout()
    _save_figure(fig, path)
    return path
