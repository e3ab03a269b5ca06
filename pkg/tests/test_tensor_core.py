import threading

import numpy as np
import pytest

from errors import GraphError, NonFiniteError, ShapeError
from tensor_core import Adam, Parameter, Tensor, check_gradients, no_grad, is_grad_enabled
from tensor_core import ops

CENTER_MASK = np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], dtype=float)


def leaf(rng, *shape, low=-1.0, high=1.0):
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def weighted_sum(out, weights):
    return ops.reduce_sum(ops.mul(out, weights))


def test_conv2d_full_kernel_center_value():
    x = Tensor(np.ones((1, 1, 3, 3)))
    w = Tensor(np.ones((1, 1, 3, 3)))
    out = ops.conv2d(x, w, padding=1)
    assert out.data[0, 0, 1, 1] == 9.0


def test_conv2d_center_masked_value():
    x = Tensor(np.ones((1, 1, 3, 3)))
    w = Tensor(np.ones((1, 1, 3, 3)))
    out = ops.conv2d(x, w, padding=1, mask=CENTER_MASK)
    assert out.data[0, 0, 1, 1] == 8.0


def test_prelu_negative_input():
    out = ops.prelu(Tensor(np.array(-2.0)), Tensor(np.array([0.25])))
    assert out.item() == -0.5


def test_backward_sum_of_squares():
    p = Parameter(np.array([1.0, 2.0]), 'p')
    ops.reduce_sum(ops.square(p)).backward()
    np.testing.assert_array_equal(p.grad, [2.0, 4.0])


def test_prelu_slope_gradient():
    slope = Parameter(np.array([0.25]), 'slope')
    ops.prelu(Tensor(np.array(-1.0)), slope).backward()
    np.testing.assert_allclose(slope.grad, [-1.0])


def test_gradients_accumulate_across_backward_calls():
    p = Parameter(np.array([3.0]), 'p')
    ops.reduce_sum(ops.mul(p, 2.0)).backward()
    ops.reduce_sum(ops.mul(p, 2.0)).backward()
    np.testing.assert_array_equal(p.grad, [4.0])


def test_random_five_op_graph_gradcheck(rng):
    a = leaf(rng, 3, 4)
    b = leaf(rng, 3, 4, low=0.5, high=2.0)
    c = leaf(rng, 4, 2)

    def fn():
        h = ops.div(ops.add(a, ops.exp(a)), b)
        h = ops.matmul(ops.sigmoid(h), c)
        return ops.reduce_mean(ops.square(h))

    report = check_gradients(fn, [a, b, c])
    assert report.passed, report.per_input


@pytest.mark.parametrize('op, low, high', [
    (ops.sqrt, 0.5, 2.0),
    (ops.square, -1.0, 1.0),
    (ops.reciprocal, 0.5, 2.0),
    (ops.exp, -1.0, 1.0),
    (ops.log, 0.5, 2.0),
    (ops.sigmoid, -3.0, 3.0),
    (ops.softplus, -3.0, 3.0),
    (ops.neg, -1.0, 1.0),
])
def test_unary_gradcheck(rng, op, low, high):
    x = leaf(rng, 2, 5, low=low, high=high)
    weights = rng.standard_normal((2, 5))
    report = check_gradients(lambda: weighted_sum(op(x), weights), [x])
    assert report.max_relative_error <= 1e-4


@pytest.mark.parametrize('op', [ops.add, ops.sub, ops.mul, ops.div])
def test_binary_broadcast_gradcheck(rng, op):
    a = leaf(rng, 2, 3, 4, low=0.5, high=1.5)
    b = leaf(rng, 1, 3, 1, low=0.5, high=1.5)
    weights = rng.standard_normal((2, 3, 4))
    report = check_gradients(lambda: weighted_sum(op(a, b), weights), [a, b])
    assert report.max_relative_error <= 1e-4


def test_clamp_gradient_passes_inside_and_blocks_outside():
    x = Tensor(np.array([-1.0, 0.5, 2.0]), requires_grad=True)
    ops.reduce_sum(ops.clamp(x, lo=0.0, hi=1.0)).backward()
    np.testing.assert_array_equal(x.grad, [0.0, 1.0, 0.0])


def test_prelu_gradcheck(rng):
    x = leaf(rng, 2, 3, 4, 4)
    x.data[np.abs(x.data) < 0.05] = 0.3
    slope = leaf(rng, 3, low=0.1, high=0.4)
    weights = rng.standard_normal((2, 3, 4, 4))
    report = check_gradients(lambda: weighted_sum(ops.prelu(x, slope), weights), [x, slope])
    assert report.max_relative_error <= 1e-4


@pytest.mark.parametrize('reducer', [ops.reduce_sum, ops.reduce_mean])
def test_reduction_gradcheck(rng, reducer):
    x = leaf(rng, 2, 3, 4)
    weights = rng.standard_normal((2, 4))
    report = check_gradients(lambda: weighted_sum(reducer(x, axis=1), weights), [x])
    assert report.max_relative_error <= 1e-4


def test_min_max_reductions_route_gradient_to_extremum():
    x = Tensor(np.array([[1.0, 5.0, 3.0]]), requires_grad=True)
    ops.add(ops.reduce_max(x), ops.mul(2.0, ops.reduce_min(x))).backward()
    np.testing.assert_array_equal(x.grad, [[2.0, 1.0, 0.0]])


def test_masked_dilated_conv2d_gradcheck(rng):
    x = leaf(rng, 1, 2, 7, 7)
    w = leaf(rng, 3, 2, 3, 3)
    b = leaf(rng, 3)
    weights = rng.standard_normal((1, 3, 7, 7))

    def fn():
        return weighted_sum(ops.conv2d(x, w, b, padding=2, dilation=2, mask=CENTER_MASK), weights)

    report = check_gradients(fn, [x, w, b])
    assert report.max_relative_error <= 1e-4
    assert np.all(w.grad[:, :, 1, 1] == 0.0)


def test_masked_conv2d_ignores_masked_input_positions(rng):
    x = rng.standard_normal((1, 2, 6, 6))
    w = Tensor(rng.standard_normal((2, 2, 3, 3)))
    base = ops.conv2d(Tensor(x), w, padding=1, mask=CENTER_MASK).data
    changed = x.copy()
    changed[0, :, 3, 2] += 50.0
    out = ops.conv2d(Tensor(changed), w, padding=1, mask=CENTER_MASK).data
    assert np.array_equal(out[0, :, 3, 2], base[0, :, 3, 2])


def test_pooling_and_upsampling_gradcheck(rng):
    x = leaf(rng, 2, 2, 4, 4)
    weights = rng.standard_normal((2, 2, 4, 4))

    def fn():
        pooled = ops.avg_pool2d(x)
        return ops.add(weighted_sum(ops.nearest_upsample2x(pooled), weights),
                       ops.reduce_sum(ops.square(ops.global_avg_pool(x))))

    assert check_gradients(fn, [x]).max_relative_error <= 1e-4


def test_concat_index_reshape_gradcheck(rng):
    a = leaf(rng, 1, 2, 3, 3)
    b = leaf(rng, 1, 1, 3, 3)
    weights = rng.standard_normal((9, 2))

    def fn():
        joined = ops.concat([a, b], axis=1)
        picked = ops.index(joined, (0, slice(1, 3)))
        return weighted_sum(ops.transpose(ops.reshape(picked, (2, 9))), weights)

    assert check_gradients(fn, [a, b]).max_relative_error <= 1e-4


def test_gather_patches_gradcheck(rng):
    x = leaf(rng, 6, 6)
    weights = rng.standard_normal((4, 9))
    report = check_gradients(lambda: weighted_sum(ops.gather_patches(x, 3, stride=3), weights), [x])
    assert report.max_relative_error <= 1e-4


def test_gather_patches_layout():
    x = Tensor(np.arange(16.0).reshape(4, 4))
    patches = ops.gather_patches(x, 2, stride=2).data
    np.testing.assert_array_equal(patches[0], [0, 1, 4, 5])
    np.testing.assert_array_equal(patches[3], [10, 11, 14, 15])


def test_non_finite_result_is_an_error():
    with pytest.raises(NonFiniteError):
        ops.log(Tensor(np.array([0.0, 1.0])))


def test_shape_errors():
    with pytest.raises(ShapeError):
        ops.add(Tensor(np.ones((2, 3))), Tensor(np.ones((4,))))
    with pytest.raises(ShapeError):
        ops.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 2, 3, 3))))
    with pytest.raises(ShapeError):
        ops.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), mask=np.full((3, 3), 0.5))


def test_backward_requires_scalar_loss():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        ops.mul(x, 2.0).backward()


def test_cycle_in_graph_is_detected():
    x = Tensor(np.ones(1), requires_grad=True)
    y = ops.mul(x, 2.0)
    z = ops.mul(y, 3.0)
    y._parents = (z,)
    with pytest.raises(GraphError):
        ops.reduce_sum(z).backward()


def test_no_grad_skips_tape_and_is_thread_local():
    x = Tensor(np.ones(2), requires_grad=True)
    seen = []
    with no_grad():
        assert not ops.mul(x, 2.0).requires_grad
        worker = threading.Thread(target=lambda: seen.append(is_grad_enabled()))
        worker.start()
        worker.join()
    assert seen == [True]
    assert ops.mul(x, 2.0).requires_grad


def test_adam_decreases_quadratic():
    p = Parameter(np.array([3.0, -2.0]), 'p')
    optimizer = Adam([p], lr=0.1)
    for _ in range(500):
        optimizer.zero_grad()
        loss = ops.reduce_sum(ops.square(p))
        loss.backward()
        optimizer.step()
    assert float(np.sum(p.data ** 2)) < 0.1


def test_determinism(rng):
    x = rng.standard_normal((1, 1, 8, 8))
    w = rng.standard_normal((2, 1, 3, 3))
    first = ops.conv2d(Tensor(x), Tensor(w), padding=1).data
    second = ops.conv2d(Tensor(x), Tensor(w), padding=1).data
    assert np.array_equal(first, second)
