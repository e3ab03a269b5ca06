import os

import numpy as np
import pandas as pd
import pytest

from errors import DatasetError
from noise_model import noise_params
from reports import save_history, save_locus
from training import stabilization_locus


def test_synthetic_clean_images_are_in_range(processor):
    images = processor.synthetic_clean_images(count=3, size=32, seed=1)
    assert len(images) == 3
    for image in images:
        assert image.shape == (32, 32)
        assert image.min() >= 0.1 - 1e-12 and image.max() <= 0.9 + 1e-12


def test_synthetic_clean_images_are_reproducible(processor):
    first = processor.synthetic_clean_images(count=2, size=32, seed=5)
    second = processor.synthetic_clean_images(count=2, size=32, seed=5)
    assert all(np.array_equal(a, b) for a, b in zip(first, second))


def test_corpus_round_trip_with_params(processor, tmp_path):
    cleans = processor.synthetic_clean_images(count=3, size=32, seed=2)
    noisy, params = processor.synthesize_corpus(cleans, mixture=((0.001, 0.02), (0.0, 0.05)), seed=3)
    assert len(noisy) == 3 and len(set(params)) == 3
    directory = str(tmp_path / 'noisy')
    paths = processor.save_corpus(directory, noisy, params=params)
    assert [os.path.basename(p) for p in paths] == ['img_0000.pgm', 'img_0001.pgm', 'img_0002.pgm']
    loaded = processor.load_params(directory)
    assert [p.alpha for p in loaded] == pytest.approx([p.alpha for p in params])
    listed, images = processor.load_images(directory)
    assert listed == paths
    np.testing.assert_allclose(images[0], noisy[0], atol=1 / 65535)


def test_corpus_needs_noise_parameters(processor):
    with pytest.raises(DatasetError):
        processor.synthesize_corpus([np.zeros((8, 8))])


def test_fixed_params_apply_to_every_image(processor):
    p = noise_params(0.02, 0.01)
    _, params = processor.synthesize_corpus([np.full((8, 8), 0.5)] * 2, params=p)
    assert params == [p, p]


def test_missing_directory_and_empty_directory(processor, tmp_path):
    with pytest.raises(DatasetError):
        processor.list_images(str(tmp_path / 'nowhere'))
    (tmp_path / 'empty').mkdir()
    with pytest.raises(DatasetError):
        processor.list_images(str(tmp_path / 'empty'))
    assert processor.load_params(str(tmp_path / 'empty')) is None


def test_extract_patches(processor):
    images = [np.arange(400.0).reshape(20, 20), np.zeros((16, 16))]
    patches, sources = processor.extract_patches(images, size=8, count=5, seed=4)
    assert patches.shape == (5, 1, 8, 8)
    assert sources.shape == (5,)
    for patch, source in zip(patches, sources):
        if source == 1:
            assert not patch.any()


def test_extract_patches_rejects_small_images(processor):
    with pytest.raises(DatasetError):
        processor.extract_patches([np.zeros((4, 4))], size=8, count=1)
    with pytest.raises(DatasetError):
        processor.extract_patches([], size=8, count=1)


def test_history_report(tmp_path):
    history = pd.DataFrame({'epoch': [1, 1, 2, 2], 'step': [1, 2, 1, 2], 'loss': [1.0, 0.8, 0.5, 0.4]})
    csv_path, png_path = save_history(history, str(tmp_path))
    assert pd.read_csv(csv_path)['loss'].tolist() == [1.0, 0.8, 0.5, 0.4]
    assert os.path.getsize(png_path) > 0
    assert sorted(os.listdir(tmp_path)) == ['history.csv', 'loss.png']


def test_locus_report(tmp_path, rng):
    locus = stabilization_locus(rng.random((48, 48)), [0.01, 0.02], [0.01], tol=10.0)
    written = save_locus([locus], str(tmp_path), plot=True, truth=(0.01, 0.01))
    table = pd.read_csv(written[0])
    assert list(table.columns) == ['patch', 'alpha', 'sigma']
    assert len(table) == 2
    assert written[1].endswith('locus.png')
