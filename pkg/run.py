#!/usr/bin/env python3
"""
Command-line entry point for the blind Poisson-Gaussian denoising pipeline.

Subcommands:
- synth            add Poisson-Gaussian noise to clean images (or a generated corpus)
- estimate         per-image noise variance (eta) or noise parameters (PGE-Net)
- train-pge        Phase 1, parameter estimator
- train-denoiser   Phase 2, blind-spot denoiser
- denoise          full inference pipeline
- eval             PSNR / SSIM table
- analyze-net      displacement set, receptive field, parameter count, blind-spot verdict
- locus            stabilization locus sweep
- variance-check   mean post-GAT variance under estimated parameters
"""
import argparse
import logging
import os
import sys
import time

import numpy as np
import pandas as pd

from checkpoints import load_denoiser, load_pge, save_denoiser, save_pge
from config import DATA_CONFIG, PGE_CONFIG
from data_processor import DataProcessor
from denoiser import denoise, estimate_params
from errors import ConfigError
from image_io import write_csv, write_pgm
from metrics import evaluate_pairs, pair_by_name
from networks.analyzer import describe, format_path
from networks.bsn_net import blind_spot_check, build_net
from networks.net_config import load_net_config
from noise_model.synthesis import noise_params
from noise_model.variance_estimator import eta
from reports import save_alpha_histogram, save_history, save_locus
from run_config import RunConfig, load_run_config
from tensor_core import no_grad
from training.denoiser_trainer import DenoiserTrainer
from training.pge_trainer import PgeTrainer, stabilization_locus, stabilized_variance

logger = logging.getLogger('run')


def _estimator(args, run_config: RunConfig):
    """Trained PGE-Net when --pge-ckpt is given, else fixed (alpha, sigma)"""
    if getattr(args, 'pge_ckpt', None):
        return load_pge(args.pge_ckpt)
    alpha = args.alpha if args.alpha is not None else run_config.alpha
    sigma = args.sigma if args.sigma is not None else run_config.sigma
    if alpha is None or sigma is None:
        raise ConfigError("pass --pge-ckpt or both --alpha and --sigma")
    return noise_params(alpha, sigma)


def cmd_synth(args, processor: DataProcessor, run_config: RunConfig) -> int:
    if args.input:
        names, cleans = processor.load_images(args.input)
    else:
        cleans = processor.synthetic_clean_images(args.generate, args.size, seed=run_config.seed)
        names = [f"img_{i:04d}.pgm" for i in range(len(cleans))]
        if args.clean_out:
            processor.save_corpus(args.clean_out, cleans, names)
    if run_config.mixture or args.mixture:
        noisy, params = processor.synthesize_corpus(cleans, mixture=run_config.mixture_ranges(),
                                                    mode=run_config.mode, seed=run_config.seed)
    else:
        noisy, params = processor.synthesize_corpus(cleans, params=_estimator(args, run_config),
                                                    mode=run_config.mode, seed=run_config.seed)
    processor.save_corpus(args.out, noisy, names, params=params)
    return 0


def cmd_estimate(args, processor: DataProcessor, run_config: RunConfig) -> int:
    paths, images = processor.load_images(args.input)
    rows = []
    net = load_pge(args.ckpt) if args.method == 'pge' else None
    for path, image in zip(paths, images):
        started = time.perf_counter()
        if net is not None:
            p = estimate_params(image, net)
            row = {'path': path, 'alpha': p.alpha, 'sigma': p.sigma}
        else:
            with no_grad():
                row = {'path': path, 'variance': eta(image, run_config.estimator_config()).item()}
        row['seconds'] = time.perf_counter() - started
        rows.append(row)
    table = pd.DataFrame(rows)
    print(table.to_string(index=False))
    if net is not None:
        print(f"alpha mean {table['alpha'].mean():.6f} std {table['alpha'].std(ddof=0):.6f}; "
              f"sigma mean {table['sigma'].mean():.6f} std {table['sigma'].std(ddof=0):.6f}")
        if args.hist:
            save_alpha_histogram(table['alpha'].to_numpy(), args.hist)
    if args.report:
        write_csv(table, args.report)
    return 0


def cmd_train_pge(args, processor: DataProcessor, run_config: RunConfig) -> int:
    _, images = processor.load_images(args.data)
    params = processor.load_params(args.data)
    patches, sources = processor.extract_patches(images, args.patch_size, args.patches, seed=run_config.seed)
    patch_params = [params[i] for i in sources] if params is not None else None
    trainer = PgeTrainer(run_config.pge_training(), log_file=run_config.log_file)
    net, history = trainer.train(patches, patch_params)
    save_pge(args.out, net)
    save_history(history, os.path.dirname(os.path.abspath(args.out)))
    return 0


def cmd_train_denoiser(args, processor: DataProcessor, run_config: RunConfig) -> int:
    _, noisy = processor.load_images(args.data)
    cleans = processor.load_images(args.clean)[1] if args.clean else None
    trainer = DenoiserTrainer(run_config.denoiser_training(), log_file=run_config.log_file)
    net, history = trainer.train(noisy, _estimator(args, run_config), cleans)
    save_denoiser(args.out, net)
    save_history(history, os.path.dirname(os.path.abspath(args.out)))
    return 0


def cmd_denoise(args, processor: DataProcessor, run_config: RunConfig) -> int:
    paths, images = processor.load_images(args.input)
    estimator = _estimator(args, run_config)
    net = load_denoiser(args.net_ckpt)
    timings = []
    os.makedirs(args.out, exist_ok=True)
    for path, image in zip(paths, images):
        x_hat, timing = denoise(image, estimator, net, run_config.mode, return_timing=True)
        out_path = os.path.join(args.out, os.path.splitext(os.path.basename(path))[0] + '.pgm')
        write_pgm(out_path, x_hat.data)
        logger.info(f"{out_path}: {timing.total:.3f}s (estimation {timing.estimation:.3f}s, "
                    f"network {timing.network:.3f}s)")
        timings.append(timing.total)
    logger.info(f"denoised {len(timings)} images, mean {np.mean(timings):.3f}s per image")
    return 0


def cmd_eval(args, processor: DataProcessor, run_config: RunConfig) -> int:
    pred_paths, clean_paths = pair_by_name(processor.list_images(args.pred), processor.list_images(args.clean))
    table = evaluate_pairs(pred_paths, clean_paths)
    print(table.to_string(index=False, float_format=lambda v: f"{v:.4f}"))
    print(f"mean PSNR {table['psnr'].mean():.2f} dB, mean SSIM {table['ssim'].mean():.4f}")
    if args.csv:
        write_csv(table, args.csv)
    return 0


def cmd_analyze_net(args, processor: DataProcessor, run_config: RunConfig) -> int:
    cfg = load_net_config(args.config or run_config.net_config)
    summary = describe(cfg)
    rf_h, rf_w = summary['receptive_field']
    print(f"network: {summary['name']} ({summary['layers']} spatial layers)")
    print(f"displacement set: {summary['offsets']} offsets")
    print(f"parameters: {summary['parameters']}")
    if not summary['blind_spot']:
        print(f"blind-spot: FAIL, (0,0) reachable via {format_path(summary['path'])}")
        return 1
    print(f"blind-spot: PASS, RF {rf_h}×{rf_w}")
    if args.check:
        report = blind_spot_check(build_net(cfg, seed=run_config.seed), trials=args.check, seed=run_config.seed)
        print(f"empirical check: {'PASS' if report.passed else 'FAIL'} ({report.failures}/{report.trials} failures)")
        return 0 if report.passed else 1
    return 0


def _grid(spec):
    lo, hi, count = float(spec[0]), float(spec[1]), int(spec[2])
    return np.linspace(lo, hi, count)


def cmd_locus(args, processor: DataProcessor, run_config: RunConfig) -> int:
    _, images = processor.load_images(args.input)
    if args.patch_size:
        patches, _ = processor.extract_patches(images, args.patch_size, args.patches, seed=run_config.seed)
        images = [p[0] for p in patches]
    loci = [stabilization_locus(image, _grid(args.alpha_grid), _grid(args.sigma_grid), args.tol,
                                run_config.estimator_config()) for image in images]
    truth = (args.true_alpha, args.true_sigma) if args.true_alpha is not None else None
    for k, locus in enumerate(loci):
        near = f", true point {'within' if locus.near(*truth) else 'outside'} one cell" if truth else ''
        print(f"patch {k}: {len(locus.points)} locus points{near}")
    save_locus(loci, args.out, plot=args.plot, truth=truth)
    return 0


def cmd_variance_check(args, processor: DataProcessor, run_config: RunConfig) -> int:
    _, images = processor.load_images(args.input)
    estimator = _estimator(args, run_config)
    usable = [img[:img.shape[0] - img.shape[0] % 4, :img.shape[1] - img.shape[1] % 4] for img in images]
    estimates = [estimate_params(img, estimator) for img in usable]
    values = np.concatenate([stabilized_variance(img[None, None], [p], run_config.estimator_config())
                             for img, p in zip(usable, estimates)])
    print(f"post-GAT variance: mean {values.mean():.4f}, std {values.std():.4f} over {values.size} images")
    return 0


def _add_estimator_args(parser):
    parser.add_argument('--pge-ckpt', dest='pge_ckpt', help='trained PGE-Net checkpoint')
    parser.add_argument('--alpha', type=float, help='fixed Poisson gain')
    parser.add_argument('--sigma', type=float, help='fixed Gaussian std')


def _common_parser(default) -> argparse.ArgumentParser:
    """Run-level options, accepted before or after the subcommand"""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--run-config', dest='run_config', default=default, help='key = value run configuration file')
    common.add_argument('--seed', type=int, default=default, help='overrides the run configuration seed')
    common.add_argument('--mode', choices=['mean_preserving', 'literal'], default=default, help='noise synthesis mode')
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Blind Poisson-Gaussian denoising pipeline',
                                     parents=[_common_parser(None)])
    common = _common_parser(argparse.SUPPRESS)
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('synth', help='synthesize noisy images', parents=[common])
    p.add_argument('--in', dest='input', help='directory of clean images')
    p.add_argument('--generate', type=int, default=DATA_CONFIG['corpus_size'], help='synthetic clean images when --in is absent')
    p.add_argument('--size', type=int, default=DATA_CONFIG['image_size'])
    p.add_argument('--clean-out', dest='clean_out', help='where to write generated clean images')
    p.add_argument('--mixture', action='store_true', help='per-image (alpha, sigma) from the mixture ranges')
    p.add_argument('--out', required=True)
    _add_estimator_args(p)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser('estimate', help='estimate noise per image', parents=[common])
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--method', choices=['eta', 'pge'], default='eta')
    p.add_argument('--ckpt', help='PGE-Net checkpoint for --method pge')
    p.add_argument('--report', help='CSV path for the per-image table')
    p.add_argument('--hist', help='PNG path for an alpha histogram')
    p.set_defaults(handler=cmd_estimate)

    p = sub.add_parser('train-pge', help='Phase 1: train the noise parameter estimator', parents=[common])
    p.add_argument('--data', required=True)
    p.add_argument('--config', dest='run_config_file', help='run configuration file')
    p.add_argument('--out', required=True)
    p.add_argument('--patches', type=int, default=200)
    p.add_argument('--patch-size', dest='patch_size', type=int, default=PGE_CONFIG['patch_size'])
    p.set_defaults(handler=cmd_train_pge)

    p = sub.add_parser('train-denoiser', help='Phase 2: train the blind-spot denoiser', parents=[common])
    p.add_argument('--data', required=True)
    p.add_argument('--config', dest='run_config_file', help='run configuration file')
    p.add_argument('--clean', help='clean images, for supervised = true')
    p.add_argument('--out', required=True)
    _add_estimator_args(p)
    p.set_defaults(handler=cmd_train_denoiser)

    p = sub.add_parser('denoise', help='denoise a directory of images', parents=[common])
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--net-ckpt', dest='net_ckpt', required=True)
    p.add_argument('--out', required=True)
    _add_estimator_args(p)
    p.set_defaults(handler=cmd_denoise)

    p = sub.add_parser('eval', help='PSNR/SSIM of predictions against clean images', parents=[common])
    p.add_argument('--pred', required=True)
    p.add_argument('--clean', required=True)
    p.add_argument('--csv', help='machine-readable output (path, psnr, ssim)')
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser('analyze-net', help='symbolic blind-spot analysis of a network config', parents=[common])
    p.add_argument('--config', help='preset name or config file')
    p.add_argument('--check', type=int, default=0, help='also run this many empirical perturbation trials')
    p.set_defaults(handler=cmd_analyze_net)

    p = sub.add_parser('locus', help='stabilization locus sweep', parents=[common])
    p.add_argument('--in', dest='input', required=True)
    p.add_argument('--alpha-grid', dest='alpha_grid', nargs=3, default=['0.002', '0.03', '40'], metavar=('LO', 'HI', 'N'))
    p.add_argument('--sigma-grid', dest='sigma_grid', nargs=3, default=['0.0', '0.03', '40'], metavar=('LO', 'HI', 'N'))
    p.add_argument('--tol', type=float, default=0.05)
    p.add_argument('--patch-size', dest='patch_size', type=int, default=0, help='sweep random patches instead of whole images')
    p.add_argument('--patches', type=int, default=10)
    p.add_argument('--true-alpha', dest='true_alpha', type=float)
    p.add_argument('--true-sigma', dest='true_sigma', type=float)
    p.add_argument('--plot', action='store_true')
    p.add_argument('--out', default='locus')
    p.set_defaults(handler=cmd_locus)

    p = sub.add_parser('variance-check', help='mean post-GAT variance under estimated parameters', parents=[common])
    p.add_argument('--in', dest='input', required=True)
    _add_estimator_args(p)
    p.set_defaults(handler=cmd_variance_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run_config = load_run_config(getattr(args, 'run_config_file', None) or args.run_config,
                                     seed=args.seed, mode=args.mode)
        processor = DataProcessor(log_file=run_config.log_file)
        run_config.log_resolved()
        return args.handler(args, processor, run_config)
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        return 1


if __name__ == "__main__":
    exit_code = main()
    sys.exit(exit_code if exit_code else 0)
