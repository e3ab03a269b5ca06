import os

import numpy as np
import pandas as pd
import pytest

from run import main

TINY_NET = """
name tiny-cli
width 3
layer grid=3 dilation=1 center=0 in=1 out=3
layer grid=3 dilation=2 center=1 in=3 out=3 rm=1
residual outer 1 head
head 3 2
"""


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / 'tiny.netcfg').write_text(TINY_NET, encoding='utf-8')
    (tmp_path / 'run.cfg').write_text(
        "seed = 1\n"
        "epochs = 1\n"
        "batch_size = 2\n"
        "patch_size = 16\n"
        "eta_patch = 4\n"
        "eta_stride = 2\n"
        f"net_config = {tmp_path / 'tiny.netcfg'}\n"
        f"log_file = {tmp_path / 'logs' / 'run.log'}\n",
        encoding='utf-8')
    return tmp_path


def test_analyze_net_default_preset(capsys, workspace):
    assert main(['analyze-net', '--config', 'fbi-safe-17']) == 0
    out = capsys.readouterr().out
    assert 'blind-spot: PASS, RF 119×119' in out
    assert 'parameters: 184770' in out


def test_analyze_net_rejects_literal_stack(capsys, workspace):
    assert main(['analyze-net', '--config', 'fbi-literal']) == 1
    out = capsys.readouterr().out
    assert 'blind-spot: FAIL' in out
    assert '(1,0)+(2,0)+(-3,0)' in out


def test_analyze_net_with_empirical_check(capsys, workspace):
    assert main(['analyze-net', '--config', str(workspace / 'tiny.netcfg'), '--check', '20']) == 0
    assert 'empirical check: PASS (0/20 failures)' in capsys.readouterr().out


def test_failures_give_nonzero_exit(workspace):
    assert main(['estimate', '--in', str(workspace / 'missing')]) == 1
    assert main(['analyze-net', '--config', str(workspace / 'absent.netcfg')]) == 1


def test_eval_identical_images(capsys, workspace, processor):
    images = processor.synthetic_clean_images(count=2, size=16, seed=0)
    processor.save_corpus(str(workspace / 'a'), images)
    processor.save_corpus(str(workspace / 'b'), images)
    assert main(['eval', '--pred', str(workspace / 'a'), '--clean', str(workspace / 'b'),
                 '--csv', str(workspace / 'eval.csv')]) == 0
    assert 'mean PSNR 99.00 dB, mean SSIM 1.0000' in capsys.readouterr().out
    assert len(pd.read_csv(workspace / 'eval.csv')) == 2


def test_pipeline_end_to_end(capsys, workspace):
    clean, noisy, out = (str(workspace / d) for d in ('clean', 'noisy', 'out'))
    run_cfg = str(workspace / 'run.cfg')

    assert main(['--seed', '1', 'synth', '--generate', '3', '--size', '48', '--alpha', '0.02', '--sigma', '0.01',
                 '--clean-out', clean, '--out', noisy]) == 0
    assert len([f for f in os.listdir(noisy) if f.endswith('.pgm')]) == 3
    assert os.path.exists(os.path.join(noisy, 'params.csv'))

    assert main(['--run-config', run_cfg, 'estimate', '--in', noisy, '--report', str(workspace / 'eta.csv')]) == 0
    assert list(pd.read_csv(workspace / 'eta.csv').columns) == ['path', 'variance', 'seconds']

    pge_ckpt = str(workspace / 'pge' / 'pge.fbic')
    assert main(['train-pge', '--config', run_cfg, '--data', noisy, '--out', pge_ckpt,
                 '--patches', '2', '--patch-size', '16']) == 0
    assert os.path.exists(pge_ckpt)
    assert os.path.exists(workspace / 'pge' / 'history.csv')
    assert main(['--run-config', run_cfg, 'estimate', '--in', noisy, '--method', 'pge', '--ckpt', pge_ckpt]) == 0
    assert 'alpha mean' in capsys.readouterr().out

    net_ckpt = str(workspace / 'bsn' / 'bsn.fbic')
    assert main(['train-denoiser', '--config', run_cfg, '--data', noisy, '--alpha', '0.02', '--sigma', '0.01',
                 '--out', net_ckpt]) == 0
    assert os.path.exists(net_ckpt + '.netcfg')

    assert main(['--run-config', run_cfg, 'denoise', '--in', noisy, '--net-ckpt', net_ckpt,
                 '--pge-ckpt', pge_ckpt, '--out', out]) == 0
    assert sorted(os.listdir(out)) == ['img_0000.pgm', 'img_0001.pgm', 'img_0002.pgm']

    assert main(['eval', '--pred', out, '--clean', clean]) == 0
    assert main(['--run-config', run_cfg, 'variance-check', '--in', noisy, '--alpha', '0.02', '--sigma', '0.01']) == 0
    assert main(['--run-config', run_cfg, 'locus', '--in', noisy, '--alpha-grid', '0.01', '0.03', '3',
                 '--sigma-grid', '0', '0.02', '2', '--tol', '0.5', '--out', str(workspace / 'locus')]) == 0
    assert os.path.exists(workspace / 'locus' / 'locus.csv')
    out_text = capsys.readouterr().out
    assert 'post-GAT variance' in out_text
    assert 'patch 0' in out_text


def test_synth_accepts_run_options_after_subcommand(workspace, processor):
    clean = str(workspace / 'clean')
    processor.save_corpus(clean, processor.synthetic_clean_images(count=2, size=16, seed=0))
    after, before = str(workspace / 'after'), str(workspace / 'before')

    assert main(['synth', '--alpha', '0.01', '--sigma', '0.02', '--mode', 'literal', '--seed', '3',
                 '--in', clean, '--out', after]) == 0
    assert main(['--mode', 'literal', '--seed', '3', 'synth', '--alpha', '0.01', '--sigma', '0.02',
                 '--in', clean, '--out', before]) == 0

    _, first = processor.load_images(after)
    _, second = processor.load_images(before)
    assert len(first) == 2
    assert all(np.array_equal(a, b) for a, b in zip(first, second))
    params = pd.read_csv(workspace / 'after' / 'params.csv')
    assert params['alpha'].tolist() == pytest.approx([0.01, 0.01])


def test_eval_pairs_files_by_name(capsys, workspace, processor):
    images = processor.synthetic_clean_images(count=2, size=16, seed=0)
    processor.save_corpus(str(workspace / 'pred'), images, names=['b.pgm', 'a.pgm'])
    processor.save_corpus(str(workspace / 'clean'), images[::-1], names=['a.pgm', 'b.pgm'])
    assert main(['eval', '--pred', str(workspace / 'pred'), '--clean', str(workspace / 'clean')]) == 0
    assert 'mean PSNR 99.00 dB' in capsys.readouterr().out

    processor.save_corpus(str(workspace / 'other'), images, names=['a.pgm', 'c.pgm'])
    assert main(['eval', '--pred', str(workspace / 'pred'), '--clean', str(workspace / 'other')]) == 1


def test_reports_leave_no_temporary_files(workspace, processor):
    images = processor.synthetic_clean_images(count=2, size=16, seed=0)
    processor.save_corpus(str(workspace / 'imgs'), images)
    assert main(['eval', '--pred', str(workspace / 'imgs'), '--clean', str(workspace / 'imgs'),
                 '--csv', str(workspace / 'tables' / 'eval.csv')]) == 0
    assert os.listdir(workspace / 'tables') == ['eval.csv']
