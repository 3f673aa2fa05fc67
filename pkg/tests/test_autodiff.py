import numpy as np
import pytest

from specprune import autodiff as ad
from specprune import spectral_core as sc
from specprune import toy_model as tm
from specprune.mnist import synthetic_digits


def numeric_grad(f, x, h=1e-6):
    g = np.zeros_like(x)
    flat, gflat = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        gflat[i] = (up - down) / (2 * h)
    return g


def rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)


def check_op(build, inputs, tol=1e-6):
    """build(nodes) -> scalar-producing node; compare every input gradient."""
    weights = None

    def value():
        nonlocal weights
        out = build([ad.constant(v) for v in inputs]).value
        if weights is None:
            weights = np.random.default_rng(0).standard_normal(np.shape(out))
        return float(np.sum(out * weights))

    value()
    leaves = [ad.leaf(v) for v in inputs]
    ad.backward(build(leaves), seed=weights)
    for leaf, x in zip(leaves, inputs):
        assert rel(leaf.grad, numeric_grad(value, x)) < tol


def test_elementwise_and_dense_ops(rng):
    x = rng.standard_normal((3, 4))
    w = rng.standard_normal((4, 5))
    b = rng.standard_normal(5)
    check_op(lambda n: ad.dense(n[0], n[1], n[2]), [x, w, b])
    check_op(lambda n: ad.scale(ad.add(n[0], n[1]), 2.5), [x, rng.standard_normal((3, 4))])
    check_op(lambda n: ad.relu(n[0]), [x + np.sign(x) * 0.1])


def test_max_pool_gradient(rng):
    # distinct values so the argmax is stable under the probe
    x = rng.permutation(64).reshape(1, 1, 8, 8).astype(float) * 0.1
    check_op(lambda n: ad.max_pool2(n[0]), [x])
    with pytest.raises(ValueError):
        ad.max_pool2(ad.constant(np.zeros((1, 1, 3, 4))))


def test_max_pool_first_maximum_wins():
    x = ad.leaf(np.ones((1, 1, 2, 2)))
    y = ad.max_pool2(x)
    ad.backward(y)
    assert x.grad[0, 0].tolist() == [[1.0, 0.0], [0.0, 0.0]]


def test_softmax_cross_entropy(rng):
    logits = rng.standard_normal((5, 4))
    labels = np.array([0, 3, 1, 1, 2])
    node = ad.softmax_cross_entropy(ad.leaf(logits), labels)
    ref = -np.mean([logits[i, labels[i]] - np.log(np.exp(logits[i]).sum()) for i in range(5)])
    assert float(node.value) == pytest.approx(ref)
    check_op(lambda n: ad.softmax_cross_entropy(n[0], labels), [logits])


@pytest.mark.parametrize("stride,padding,h", [(1, 0, 9), (2, 1, 10), (1, 2, 7), (3, 2, 11)])
def test_spectral_conv_gradients(stride, padding, h):
    rng = np.random.default_rng(h)
    layer = sc.ConvLayerSpec(2, 3, 3, 8, stride, padding)
    x = rng.standard_normal((2, 2, h, h))
    w_re, w_im = rng.standard_normal((2, 3, 2, 8, 8))
    check_op(lambda n: ad.spectral_conv(n[0], n[1], n[2], layer), [x, w_re, w_im])


def test_constant_input_gets_no_gradient(rng):
    layer = sc.ConvLayerSpec(1, 1, 3, 8)
    x = ad.constant(rng.standard_normal((1, 1, 8, 8)))
    w_re, w_im = ad.leaf(rng.standard_normal((1, 1, 8, 8))), ad.leaf(rng.standard_normal((1, 1, 8, 8)))
    ad.backward(ad.spectral_conv(x, w_re, w_im, layer))
    assert x.grad is None and w_re.grad is not None


def test_shared_node_accumulates(rng):
    x = ad.leaf(rng.standard_normal(3))
    ad.backward(ad.add(x, x))
    np.testing.assert_array_equal(x.grad, 2 * np.ones(3))


# -- toy model -------------------------------------------------------------------


def model_fd_check(spec, params, x, y, entries=6, h=1e-5, seed=0):
    _, cache = tm.forward_loss(spec, params, x, y)
    grads = tm.backward(cache)
    pick = np.random.default_rng(seed)
    worst = {}
    for key, value in params.items():
        flat = value.reshape(-1)
        idx = pick.choice(flat.size, size=min(entries, flat.size), replace=False)
        num = []
        for i in idx:
            old = flat[i]
            flat[i] = old + h
            up, _ = tm.forward_loss(spec, params, x, y)
            flat[i] = old - h
            down, _ = tm.forward_loss(spec, params, x, y)
            flat[i] = old
            num.append((up - down) / (2 * h))
        worst[key] = rel(np.array(num), grads[key].reshape(-1)[idx])
    return worst


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_toy_model_gradients_synthetic(seed):
    spec = tm.SYNTHETIC_TOY
    data = synthetic_digits(8, 8, 10, seed=seed)
    params = tm.init_params(spec, np.random.default_rng(seed), spectral_init="random")
    worst = model_fd_check(spec, params, data.x, data.y, seed=seed)
    assert set(worst) == {"conv1.re", "conv1.im", "conv2.re", "conv2.im", "fc.w", "fc.b"}
    assert max(worst.values()) < 1e-5, worst


def test_model_spec_shapes():
    assert tm.MNIST_TOY.feature_size() == 4 * 4 * 16
    assert tm.SYNTHETIC_TOY.feature_size() == 2 * 2 * 16
    assert tm.ToyModelSpec.from_json(tm.MNIST_TOY.to_json()) == tm.MNIST_TOY
    with pytest.raises(ValueError):
        tm.ToyModelSpec(image_size=9).feature_size()


def test_fft_init_matches_spatial_kernels():
    params = tm.init_params(tm.MNIST_TOY, np.random.default_rng(0))
    w = tm.spectral_kernels(params, "conv1")
    spatial = sc.ifft2(w)
    # support confined to the 5x5 corner, imaginary part zero
    assert np.abs(spatial[..., 5:, :]).max() < 1e-12 and np.abs(spatial.imag).max() < 1e-12
    with pytest.raises(ValueError):
        tm.init_params(tm.MNIST_TOY, np.random.default_rng(0), spectral_init="bogus")


def test_forward_rejects_bad_batch():
    params = tm.init_params(tm.SYNTHETIC_TOY, np.random.default_rng(0))
    with pytest.raises(ValueError):
        tm.forward_loss(tm.SYNTHETIC_TOY, params, np.zeros((2, 1, 9, 9)), np.zeros(2, int))
    with pytest.raises(ValueError):
        tm.forward_loss(tm.SYNTHETIC_TOY, params, np.zeros((2, 1, 8, 8)), np.zeros(3, int))
    with pytest.raises(ValueError):
        tm.backward(None)


def test_untrained_accuracy_near_chance():
    spec = tm.SYNTHETIC_TOY
    data = synthetic_digits(1000, 8, 10, seed=0)
    accs = [tm.accuracy(spec, tm.init_params(spec, np.random.default_rng(s)), data.x, data.y) for s in range(5)]
    assert 0.0 < np.mean(accs) < 0.3


def test_save_load_roundtrip(tmp_path):
    params = tm.init_params(tm.MNIST_TOY, np.random.default_rng(3))
    tm.save_model(tmp_path / "m.npz", tm.MNIST_TOY, params)
    spec, back = tm.load_model(tmp_path / "m.npz")
    assert spec == tm.MNIST_TOY and back.keys() == params.keys()
    for k in params:
        np.testing.assert_array_equal(back[k], params[k])
