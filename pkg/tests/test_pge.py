import numpy as np
import pytest

from errors import DatasetError, ShapeError
from networks import PgeNet, pge_forward
from networks.pge_net import inverse_softplus
from noise_model import EstimatorConfig, SynthesisMode, noise_params, synthesize
from tensor_core import Tensor, check_gradients, no_grad
from training import PgeTrainer, PgeTrainingConfig, pge_loss, stabilization_locus, stabilized_variance

TINY = (2, 2, 2)
SMALL = EstimatorConfig(patch_size=4, stride=2)


def noisy_patches(count, size, params, seed=0):
    yy, xx = np.mgrid[0:size, 0:size] / float(size)
    out = []
    for i in range(count):
        clean = 0.2 + 0.4 * xx + 0.1 * i / max(count, 1) + 0.1 * np.sin(6 * yy)
        out.append(synthesize(clean, params, SynthesisMode.MEAN_PRESERVING, seed=seed + i, clip=False).data)
    return np.stack(out)[:, None]


def test_inverse_softplus_round_trip():
    assert np.log1p(np.exp(inverse_softplus(0.05))) == pytest.approx(0.05)


def test_outputs_respect_floors(rng):
    net = PgeNet(TINY, seed=1)
    with no_grad():
        alpha, sigma = net(rng.random((3, 1, 16, 16)))
    assert alpha.shape == (3,) and sigma.shape == (3,)
    assert np.all(alpha.data >= 1e-4)
    assert np.all(sigma.data >= 1e-6)


def test_identical_inputs_give_identical_outputs(rng):
    net = PgeNet(TINY, seed=1)
    image = rng.random((1, 1, 16, 16))
    with no_grad():
        alpha, sigma = net(np.concatenate([image, image]))
    assert alpha.data[0] == alpha.data[1]
    assert sigma.data[0] == sigma.data[1]


def test_same_seed_same_initialization():
    first = PgeNet(TINY, seed=4).state_dict()
    second = PgeNet(TINY, seed=4).state_dict()
    assert all(np.array_equal(first[k], second[k]) for k in first)


def test_spatial_dims_must_be_divisible_by_four():
    with pytest.raises(ShapeError):
        PgeNet(TINY)(np.zeros((1, 1, 18, 16)))
    with pytest.raises(ShapeError):
        PgeNet(TINY)(np.zeros((1, 2, 16, 16)))


def test_pge_forward_returns_noise_params(rng):
    params = pge_forward(rng.random((16, 16)), PgeNet(TINY))
    assert params.alpha >= 1e-4 and params.sigma >= 0


def test_pge_forward_rejects_batches(rng):
    with pytest.raises(ShapeError):
        pge_forward(rng.random((2, 1, 16, 16)), PgeNet(TINY))


def test_loss_is_invariant_to_batch_order():
    net = PgeNet(TINY, seed=2)
    batch = noisy_patches(3, 16, noise_params(0.02, 0.01))
    forward = pge_loss(batch, net, SMALL).item()
    backward = pge_loss(batch[::-1].copy(), net, SMALL).item()
    assert forward == pytest.approx(backward, rel=1e-10)


def test_loss_matches_per_image_stabilized_variance():
    net = PgeNet(TINY, seed=2)
    batch = noisy_patches(2, 16, noise_params(0.02, 0.01))
    with no_grad():
        alpha, sigma = net(batch)
    estimates = [noise_params(a, s) for a, s in zip(alpha.data, sigma.data)]
    etas = stabilized_variance(batch, estimates, SMALL)
    assert pge_loss(batch, net, SMALL).item() == pytest.approx(np.sum((etas - 1.0) ** 2), rel=1e-9)


def test_loss_gradcheck_on_tiny_net():
    net = PgeNet(TINY, seed=3)
    batch = noisy_patches(2, 16, noise_params(0.02, 0.01), seed=7)
    inputs = [net.head.weight, net.head.bias, net.dec1.conv2.weight]
    report = check_gradients(lambda: pge_loss(batch, net, SMALL), inputs, h=1e-6)
    assert report.max_relative_error <= 1e-4


def test_empty_batch_rejected():
    with pytest.raises(DatasetError):
        pge_loss(np.zeros((0, 1, 16, 16)), PgeNet(TINY), SMALL)


def test_empty_dataset_rejected(tmp_path):
    trainer = PgeTrainer(PgeTrainingConfig(channels=TINY), log_file=str(tmp_path / 'pge.log'))
    with pytest.raises(DatasetError):
        trainer.train(np.zeros((0, 16, 16)))


def test_supervised_training_needs_true_params(tmp_path):
    config = PgeTrainingConfig(channels=TINY, epochs=1, supervised=True)
    trainer = PgeTrainer(config, log_file=str(tmp_path / 'pge.log'))
    with pytest.raises(DatasetError):
        trainer.train(noisy_patches(2, 16, noise_params(0.02, 0.01)))


def test_training_is_deterministic_per_seed(tmp_path):
    images = noisy_patches(4, 16, noise_params(0.02, 0.01))
    config = PgeTrainingConfig(channels=TINY, epochs=2, batch_size=2, seed=5, estimator=SMALL)
    net_a, history_a = PgeTrainer(config, log_file=str(tmp_path / 'a.log')).train(images)
    net_b, history_b = PgeTrainer(config, log_file=str(tmp_path / 'b.log')).train(images)
    assert list(history_a.columns) == ['epoch', 'step', 'loss']
    assert len(history_a) == 4
    assert history_a['loss'].tolist() == history_b['loss'].tolist()
    state_a, state_b = net_a.state_dict(), net_b.state_dict()
    assert all(np.array_equal(state_a[k], state_b[k]) for k in state_a)


def test_locus_with_zero_tolerance_is_empty():
    patch = noisy_patches(1, 32, noise_params(0.01, 0.01))[0, 0]
    locus = stabilization_locus(patch, [0.005, 0.01, 0.02], [0.005, 0.01], tol=0.0, cfg=SMALL)
    assert locus.points == []
    assert np.array(locus.eta_map).shape == (3, 2)
    assert list(locus.to_frame().columns) == ['alpha', 'sigma']


def test_locus_rejects_empty_grid():
    with pytest.raises(DatasetError):
        stabilization_locus(np.zeros((16, 16)), [], [0.01], tol=0.1)


@pytest.mark.slow
def test_locus_passes_near_true_parameters():
    truth = noise_params(0.01, 0.01)
    patches = noisy_patches(10, 64, truth, seed=13)
    grid = np.linspace(0.002, 0.02, 10)
    for patch in patches[:, 0]:
        locus = stabilization_locus(patch, grid, grid, tol=0.1)
        assert locus.near(truth.alpha, truth.sigma)


@pytest.mark.slow
def test_training_stabilizes_held_out_patches(tmp_path):
    truth = noise_params(0.1, 0.02)
    train = noisy_patches(200, 64, truth, seed=0)
    held_out = noisy_patches(20, 64, truth, seed=10_000)
    config = PgeTrainingConfig(epochs=30, seed=0)
    net, history = PgeTrainer(config, log_file=str(tmp_path / 'pge.log')).train(train)
    estimates = [pge_forward(Tensor(held_out[j:j + 1]), net) for j in range(held_out.shape[0])]
    etas = stabilized_variance(held_out, estimates)
    assert 0.9 <= np.mean(etas) <= 1.15
    mean_alpha = np.mean([e.alpha for e in estimates])
    assert abs(mean_alpha - truth.alpha) <= 0.3 * truth.alpha
    per_epoch = history.groupby('epoch')['loss'].mean()
    assert per_epoch.iloc[-1] <= 0.5 * per_epoch.iloc[0]
