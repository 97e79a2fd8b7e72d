"""Analytic gradients against central finite differences, 64-bit."""

import numpy as np
import pytest

from uqnet.nn import gradcheck
from uqnet.nn import layers as L
from uqnet.nn.builder import build_shallow_convnet
from uqnet.nn.gradcheck import check_gradients, gradient_errors
from uqnet.nn.network import NetworkSpec, init_params

CLASSES = 3
TOLERANCE = 1e-4


def _net(*layers, loss="categorical_ce"):
    return NetworkSpec(layers=layers, channels=3, timesteps=12, classes=CLASSES, loss=loss)


LAYER_NETS = {
    "conv2d": lambda: _net(L.conv2d("conv", 2, (1, 3)), L.dense("classifier", CLASSES), L.softmax()),
    "dense_relu": lambda: _net(L.dense("hidden", 5, "relu"), L.dense("classifier", CLASSES), L.softmax()),
    "batchnorm": lambda: _net(
        L.conv2d("conv", 2, (1, 3), use_bias=False), L.batchnorm("bn"), L.dense("classifier", CLASSES), L.softmax()
    ),
    "square_avgpool_log": lambda: _net(
        L.conv2d("conv", 2, (3, 3)),
        L.square("square"),
        L.avgpool("pool", (1, 4), (1, 2)),
        L.log("log"),
        L.dense("classifier", CLASSES),
        L.softmax(),
    ),
    "dropout": lambda: _net(
        L.dense("hidden", 6, "relu"), L.dropout("drop", 0.3), L.dense("classifier", CLASSES), L.softmax()
    ),
    "dropconnect": lambda: _net(
        L.conv2d("conv", 2, (1, 3)), L.dropconnect("dc", 0.3), L.dense("classifier", CLASSES), L.softmax()
    ),
    "flipout_dense": lambda: _net(
        L.flipout_dense("flipout_hidden", 5, "relu"), L.flipout_dense("flipout_classifier", CLASSES), L.softmax()
    ),
    "rbf": lambda: _net(L.dense("hidden", 6, "relu"), L.rbf("rbf", CLASSES, 4, 0.4), loss="binary_ce"),
}


@pytest.fixture
def data():
    rng = np.random.default_rng(21)
    return rng.standard_normal((5, 3, 12)), np.eye(CLASSES)[rng.integers(0, CLASSES, size=5)]


class TestLayerGradients:
    @pytest.mark.parametrize("kind", sorted(LAYER_NETS))
    def test_layer_kind(self, kind, data):
        net = LAYER_NETS[kind]()
        params = init_params(net, np.random.default_rng(22), dtype=np.float64)
        batch, labels = data
        kl_weight = 0.1 if kind == "flipout_dense" else 0.0
        assert check_gradients(net, params, batch, labels, kl_weight=kl_weight) < TOLERANCE

    def test_linear_toy_net(self, data):
        net = _net(L.dense("classifier", CLASSES), L.softmax())
        params = init_params(net, np.random.default_rng(23), dtype=np.float64)
        assert check_gradients(net, params, *data) < 1e-7

    def test_zero_batch_and_labels_stay_finite(self):
        net = LAYER_NETS["batchnorm"]()
        params = init_params(net, np.random.default_rng(24), dtype=np.float64)
        error = check_gradients(net, params, np.zeros((4, 3, 12)), np.zeros((4, CLASSES)))
        assert np.isfinite(error)


class TestShallowConvNetGradients:
    @pytest.mark.parametrize("variant", ["mc_dropout", "mc_dropconnect", "flipout", "duq"])
    def test_variant(self, variant, small_arch):
        rng = np.random.default_rng(25)
        net = build_shallow_convnet(variant, 3, 60, 4, small_arch)
        params = init_params(net, rng, dtype=np.float64)
        batch = rng.standard_normal((4, 3, 60))
        labels = np.eye(4)[rng.integers(0, 4, size=4)]
        kl_weight = 0.05 if variant == "flipout" else 0.0
        errors = gradient_errors(net, params, batch, labels, kl_weight=kl_weight, rng=rng)
        assert set(errors) == {name for name in params if "running_" not in name}
        assert max(errors.values()) < TOLERANCE


class TestRelativeError:
    @pytest.fixture
    def bumped(self, monkeypatch):
        """backward with one mid-sized element of hidden.weight off by 10%"""
        original = gradcheck.backward

        def backward(*args, **kwargs):
            grads = original(*args, **kwargs)
            weight = grads["hidden.weight"].copy()
            nonzero = np.flatnonzero(weight)
            index = nonzero[np.argsort(np.abs(weight.flat[nonzero]))[len(nonzero) // 2]]
            weight.flat[index] *= 1.1
            return {**grads, "hidden.weight": weight}

        monkeypatch.setattr(gradcheck, "backward", backward)

    def test_single_bad_element_is_caught(self, bumped, data):
        net = LAYER_NETS["dense_relu"]()
        params = init_params(net, np.random.default_rng(26), dtype=np.float64)
        elementwise = gradient_errors(net, params, *data)["hidden.weight"]
        tensor_level = gradient_errors(net, params, *data, norm=True)["hidden.weight"]
        assert elementwise == pytest.approx(0.1 / 1.1, rel=1e-3)
        assert tensor_level < elementwise / 5
        assert check_gradients(net, params, *data) == pytest.approx(elementwise)

    def test_elementwise_is_never_looser(self, data):
        net = LAYER_NETS["dropout"]()
        params = init_params(net, np.random.default_rng(27), dtype=np.float64)
        elementwise = gradient_errors(net, params, *data)
        tensor_level = gradient_errors(net, params, *data, norm=True)
        for name, value in tensor_level.items():
            assert elementwise[name] >= value * 0.5
