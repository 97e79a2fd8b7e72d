import numpy as np
import pytest

from uqnet.config import ShallowConvNetConfig
from uqnet.errors import ConfigurationError, DimensionError, NumericError, StateError
from uqnet.nn import layers as L
from uqnet.nn.builder import build_shallow_convnet
from uqnet.nn.network import (
    ForwardMode,
    NetworkSpec,
    backward,
    cast_params,
    compute_loss,
    forward,
    init_params,
)


def _two_layer_net(classes=3):
    return NetworkSpec(
        layers=(L.conv2d("conv", 2, (1, 3)), L.dense("classifier", classes), L.softmax()),
        channels=2,
        timesteps=7,
        classes=classes,
    )


def _reference_forward(params, batch):
    """Straight-line loops, no vectorization shared with the library"""
    weight, bias = params["conv.weight"], params["conv.bias"]
    n_trials, channels, timesteps = batch.shape
    width = timesteps - weight.shape[3] + 1
    conv = np.zeros((n_trials, weight.shape[0], channels, width))
    for n in range(n_trials):
        for f in range(weight.shape[0]):
            for h in range(channels):
                for w in range(width):
                    total = 0.0
                    for j in range(weight.shape[3]):
                        total += batch[n, h, w + j] * weight[f, 0, 0, j]
                    conv[n, f, h, w] = total + bias[f]
    logits = conv.reshape(n_trials, -1) @ params["classifier.weight"] + params["classifier.bias"]
    exp = np.exp(logits - logits.max(axis=1, keepdims=True))
    return exp / exp.sum(axis=1, keepdims=True)


class TestNetworkSpec:
    def test_needs_single_head_last(self):
        with pytest.raises(ConfigurationError):
            NetworkSpec(layers=(L.softmax(), L.dense("d", 3)), channels=2, timesteps=7, classes=3)
        with pytest.raises(ConfigurationError):
            NetworkSpec(layers=(L.dense("d", 3),), channels=2, timesteps=7, classes=3)

    def test_rbf_head_goes_with_binary_ce(self):
        with pytest.raises(ConfigurationError):
            NetworkSpec(layers=(L.rbf("rbf", 3, 4, 0.4),), channels=2, timesteps=7, classes=3)
        NetworkSpec(layers=(L.rbf("rbf", 3, 4, 0.4),), channels=2, timesteps=7, classes=3, loss="binary_ce")

    def test_dropconnect_must_follow_weights(self):
        with pytest.raises(ConfigurationError):
            NetworkSpec(
                layers=(L.conv2d("conv", 2, (1, 3)), L.square("sq"), L.dropconnect("dc", 0.1), L.dense("d", 3), L.softmax()),
                channels=2,
                timesteps=7,
                classes=3,
            )

    def test_output_must_match_classes(self):
        with pytest.raises(DimensionError):
            NetworkSpec(layers=(L.dense("d", 4), L.softmax()), channels=2, timesteps=7, classes=3)

    def test_dict_round_trip(self, small_arch):
        for variant in ("mc_dropconnect", "flipout", "duq"):
            net = build_shallow_convnet(variant, 3, 60, 4, small_arch)
            assert NetworkSpec.from_dict(net.to_dict()) == net

    def test_malformed_dict(self):
        with pytest.raises(ConfigurationError):
            NetworkSpec.from_dict({"layers": [{"kind": "dense"}]})


class TestForward:
    def test_matches_reference_in_float64(self):
        rng = np.random.default_rng(0)
        net = _two_layer_net()
        params = cast_params(init_params(net, rng), np.float64)
        params["conv.bias"] = rng.standard_normal(2)
        batch = rng.standard_normal((4, 2, 7))
        outputs, _ = forward(net, params, batch, ForwardMode.POINT)
        np.testing.assert_allclose(outputs, _reference_forward(params, batch), rtol=1e-5)

    def test_point_mode_is_pure(self, small_arch, batch):
        net = build_shallow_convnet("mc_dropout", 3, 60, 4, small_arch)
        params = init_params(net, np.random.default_rng(1))
        first, _ = forward(net, params, batch, ForwardMode.POINT)
        second, _ = forward(net, params, batch, ForwardMode.POINT)
        np.testing.assert_array_equal(first, second)

    def test_softmax_rows_on_simplex_in_every_mode(self, small_arch, batch):
        rng = np.random.default_rng(2)
        for variant in ("dropout", "mc_dropconnect", "flipout"):
            net = build_shallow_convnet(variant, 3, 60, 4, small_arch)
            params = init_params(net, rng)
            for mode in ForwardMode:
                outputs, _ = forward(net, params, batch, mode, rng=rng)
                np.testing.assert_allclose(outputs.sum(axis=1), 1.0, atol=1e-6)
                assert np.all((outputs >= 0) & (outputs <= 1))

    def test_stochastic_mode_samples(self, small_arch, batch):
        net = build_shallow_convnet("mc_dropout", 3, 60, 4, small_arch)
        params = init_params(net, np.random.default_rng(3))
        rng = np.random.default_rng(4)
        first, _ = forward(net, params, batch, ForwardMode.STOCHASTIC, rng=rng)
        second, _ = forward(net, params, batch, ForwardMode.STOCHASTIC, rng=rng)
        assert not np.array_equal(first, second)

    def test_train_mode_updates_running_stats_only_in_train(self, small_arch, batch):
        net = build_shallow_convnet("dropout", 3, 60, 4, small_arch)
        params = init_params(net, np.random.default_rng(5))
        _, train_cache = forward(net, params, batch, ForwardMode.TRAIN, rng=np.random.default_rng(6))
        _, point_cache = forward(net, params, batch, ForwardMode.POINT)
        assert set(train_cache.state_updates) == {"batchnorm.running_mean", "batchnorm.running_var"}
        assert point_cache.state_updates == {}

    def test_sampling_modes_need_rng(self, small_arch, batch):
        net = build_shallow_convnet("mc_dropout", 3, 60, 4, small_arch)
        params = init_params(net, np.random.default_rng(7))
        with pytest.raises(ConfigurationError):
            forward(net, params, batch, ForwardMode.STOCHASTIC)

    def test_batch_shape_checked(self, small_arch):
        net = build_shallow_convnet("dropout", 3, 60, 4, small_arch)
        params = init_params(net, np.random.default_rng(8))
        with pytest.raises(DimensionError):
            forward(net, params, np.zeros((2, 3, 59)))
        with pytest.raises(DimensionError):
            forward(net, params, np.zeros((0, 3, 60)))

    def test_non_finite_values_name_the_layer(self):
        net = _two_layer_net()
        params = init_params(net, np.random.default_rng(9))
        batch = np.zeros((1, 2, 7))
        batch[0, 0, 0] = np.nan
        with pytest.raises(NumericError) as info:
            forward(net, params, batch)
        assert info.value.layer == "conv"


class TestLoss:
    def test_categorical_cross_entropy(self):
        net = _two_layer_net()
        outputs = np.array([[0.5, 0.25, 0.25], [0.1, 0.8, 0.1]])
        labels = np.eye(3)[[0, 1]]
        expected = -(np.log(0.5) + np.log(0.8)) / 2
        assert compute_loss(net, outputs, labels) == pytest.approx(expected, rel=1e-12)

    def test_label_shape_checked(self):
        with pytest.raises(DimensionError):
            compute_loss(_two_layer_net(), np.full((2, 3), 1 / 3), np.eye(2))


class TestBackward:
    def test_rejects_foreign_cache(self, small_arch, batch, one_hot):
        net = build_shallow_convnet("dropout", 3, 60, 4, small_arch)
        other = build_shallow_convnet("mc_dropout", 3, 60, 4, small_arch)
        params = init_params(net, np.random.default_rng(10))
        _, cache = forward(other, params, batch, ForwardMode.POINT)
        with pytest.raises(StateError):
            backward(net, params, cache, one_hot)

    def test_rejects_changed_parameters(self, small_arch, batch, one_hot):
        net = build_shallow_convnet("dropout", 3, 60, 4, small_arch)
        params = init_params(net, np.random.default_rng(11))
        _, cache = forward(net, params, batch, ForwardMode.POINT)
        wider = build_shallow_convnet("dropout", 3, 60, 4, ShallowConvNetConfig(filters=5, temporal_kernel=5, pool=10, pool_stride=5))
        with pytest.raises(StateError):
            backward(net, init_params(wider, np.random.default_rng(12)), cache, one_hot)

    def test_gradients_cover_trainable_parameters(self, small_arch, batch, one_hot):
        net = build_shallow_convnet("dropout", 3, 60, 4, small_arch)
        params = init_params(net, np.random.default_rng(13))
        _, cache = forward(net, params, batch, ForwardMode.TRAIN, rng=np.random.default_rng(14))
        grads = backward(net, params, cache, one_hot)
        assert "batchnorm.running_mean" not in grads
        assert set(grads) == set(params) - {"batchnorm.running_mean", "batchnorm.running_var"}
        for name, grad in grads.items():
            assert grad.shape == params[name].shape
            assert grad.dtype == params[name].dtype

    def test_softmax_head_gradient_is_p_minus_y(self):
        net = NetworkSpec(layers=(L.dense("classifier", 4), L.softmax()), channels=2, timesteps=3, classes=4)
        params = {name: np.zeros_like(value) for name, value in init_params(net, np.random.default_rng(15), dtype=np.float64).items()}
        batch = np.random.default_rng(16).standard_normal((1, 2, 3))
        _, cache = forward(net, params, batch, ForwardMode.TRAIN, rng=np.random.default_rng(17))
        grads = backward(net, params, cache, np.eye(4)[[0]])
        np.testing.assert_allclose(grads["classifier.bias"], [-0.75, 0.25, 0.25, 0.25], atol=1e-12)
        np.testing.assert_allclose(grads["classifier.weight"], batch.reshape(-1, 1) * [[-0.75, 0.25, 0.25, 0.25]], atol=1e-12)
