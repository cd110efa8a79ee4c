import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from policyscope import ops
from policyscope.errors import ShapeError

from conftest import naive_conv2d, naive_fc


def test_conv_identity_kernel():
    x = np.arange(25, dtype=np.float32).reshape(1, 5, 5)
    w = np.ones((1, 1, 1, 1), dtype=np.float32)
    b = np.zeros(1, dtype=np.float32)
    y = ops.conv2d_forward(x, w, b, stride=1)
    np.testing.assert_array_equal(y, x)


def test_conv_spatial_chain_84():
    assert ops.conv_output_size(84, 8, 4) == 20
    assert ops.conv_output_size(20, 4, 2) == 9
    assert ops.conv_output_size(9, 3, 1) == 7
    # and for an actual forward pass
    x = np.zeros((4, 84, 84), dtype=np.float32)
    y = ops.conv2d_forward(x, np.zeros((32, 4, 8, 8), np.float32), np.zeros(32, np.float32), 4)
    assert y.shape == (32, 20, 20)
    y = ops.conv2d_forward(y, np.zeros((64, 32, 4, 4), np.float32), np.zeros(64, np.float32), 2)
    assert y.shape == (64, 9, 9)
    y = ops.conv2d_forward(y, np.zeros((64, 64, 3, 3), np.float32), np.zeros(64, np.float32), 1)
    assert y.shape == (64, 7, 7)


def test_conv_matches_naive_loop(rng):
    x = rng.normal(size=(2, 5, 5)).astype(np.float32)
    w = rng.normal(size=(3, 2, 3, 3)).astype(np.float32)
    b = rng.normal(size=3).astype(np.float32)
    got = ops.conv2d_forward(x, w, b, stride=2)
    want = naive_conv2d(x, w, b, stride=2)
    assert got.shape == want.shape == (3, 2, 2)
    np.testing.assert_allclose(got, want, atol=1e-6)


def test_conv_channel_mismatch_raises():
    x = np.zeros((2, 5, 5), dtype=np.float32)
    w = np.zeros((3, 4, 3, 3), dtype=np.float32)
    with pytest.raises(ShapeError):
        ops.conv2d_forward(x, w, np.zeros(3, np.float32), 1)


def test_conv_input_smaller_than_kernel_raises():
    x = np.zeros((1, 2, 2), dtype=np.float32)
    w = np.zeros((1, 1, 3, 3), dtype=np.float32)
    with pytest.raises(ShapeError):
        ops.conv2d_forward(x, w, np.zeros(1, np.float32), 1)


def test_conv_backward_matches_fd(rng):
    # Check dx, dw, db against finite differences on a scalar-sum output.
    x = rng.normal(size=(1, 2, 6, 6))
    w = rng.normal(size=(3, 2, 3, 3))
    b = rng.normal(size=3)
    y, cache = ops.conv2d_forward_batch(x, w, b, stride=2)
    coef = rng.normal(size=y.shape)
    dx, dw, db = ops.conv2d_backward_batch(coef, cache)

    h = 1e-6
    for arr, grad in ((x, dx), (w, dw), (b, db)):
        flat = arr.reshape(-1)
        idx = rng.choice(flat.size, size=min(10, flat.size), replace=False)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float((ops.conv2d_forward_batch(x, w, b, 2)[0] * coef).sum())
            flat[i] = orig - h
            fm = float((ops.conv2d_forward_batch(x, w, b, 2)[0] * coef).sum())
            flat[i] = orig
            np.testing.assert_allclose(grad.reshape(-1)[i], (fp - fm) / (2 * h), rtol=1e-4, atol=1e-7)


def test_relu_basics():
    np.testing.assert_array_equal(ops.relu(np.array([-1.0, 0.0, 2.0])), [0.0, 0.0, 2.0])
    neg = -np.abs(np.arange(12, dtype=np.float32)).reshape(3, 4) - 1
    assert (ops.relu(neg) == 0).all()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=32))
def test_relu_idempotent(values):
    x = np.array(values, dtype=np.float32)
    once = ops.relu(x)
    np.testing.assert_array_equal(ops.relu(once), once)


def test_fc_identity_and_zero():
    x = np.array([1.0, -2.0, 3.0], dtype=np.float32)
    eye = np.eye(3, dtype=np.float32)
    np.testing.assert_array_equal(ops.fc_forward(x, eye, np.zeros(3, np.float32)), x)
    b = np.array([4.0, 5.0], dtype=np.float32)
    np.testing.assert_array_equal(ops.fc_forward(x, np.zeros((2, 3), np.float32), b), b)


def test_fc_matches_naive(rng):
    x = rng.normal(size=4).astype(np.float32)
    w = rng.normal(size=(3, 4)).astype(np.float32)
    b = rng.normal(size=3).astype(np.float32)
    np.testing.assert_allclose(ops.fc_forward(x, w, b), naive_fc(x, w, b), atol=1e-6)


def test_fc_shape_mismatch():
    with pytest.raises(ShapeError):
        ops.fc_forward(np.zeros(3, np.float32), np.zeros((2, 4), np.float32), np.zeros(2, np.float32))


def test_ops_deterministic(rng):
    x = rng.normal(size=(3, 12, 12)).astype(np.float32)
    w = rng.normal(size=(5, 3, 4, 4)).astype(np.float32)
    b = rng.normal(size=5).astype(np.float32)
    a = ops.conv2d_forward(x, w, b, 2)
    bb = ops.conv2d_forward(x, w, b, 2)
    assert a.tobytes() == bb.tobytes()
