import math

import numpy as np
import pytest

from idsadv import neuralnet
from idsadv.dataio import encode_one_hot
from idsadv.errors import (DimensionMismatch, InvalidConfig, InvalidRate, NonFiniteInput)

from conftest import blobs
import oracles


# initialization

def test_init_bounds():
    assert neuralnet.glorot_bound(10, 16) == pytest.approx(math.sqrt(6 / 26))
    assert neuralnet.glorot_bound(10, 16) == pytest.approx(0.48038, abs=5e-6)
    assert neuralnet.lecun_bound(16) == pytest.approx(0.43301, abs=5e-6)


@pytest.mark.parametrize("variant", neuralnet.VARIANTS)
def test_init_respects_bounds_and_shapes(variant):
    cfg = neuralnet.ModelConfig(variant, 10, seed=4)
    model = neuralnet.init_model(cfg)
    sizes = cfg.layer_sizes()
    assert sizes == [10, 16, 16, 16, 5]
    for w, b, fan_in, fan_out in zip(model.weights, model.biases, sizes[:-1], sizes[1:]):
        bound = (neuralnet.glorot_bound(fan_in, fan_out) if variant == "FNN"
                 else neuralnet.lecun_bound(fan_in))
        assert w.shape == (fan_in, fan_out)
        assert np.abs(w).max() <= bound
        assert np.abs(w).max() > 0.8 * bound
        np.testing.assert_array_equal(b, 0.0)
    assert not model.trained


def test_init_deterministic():
    cfg = neuralnet.ModelConfig("SNN", 10, seed=7)
    a, b = neuralnet.init_model(cfg), neuralnet.init_model(cfg)
    assert a.checksum() == b.checksum()
    assert a.checksum() != neuralnet.init_model(neuralnet.ModelConfig("SNN", 10, seed=8)).checksum()


def test_variant_fixes_components():
    fnn = neuralnet.ModelConfig("FNN", 10)
    snn = neuralnet.ModelConfig("SNN", 10)
    assert (fnn.activation, fnn.dropout_kind, fnn.initializer) == ("relu", "standard",
                                                                  "glorot_uniform")
    assert (snn.activation, snn.dropout_kind, snn.initializer) == ("selu", "alpha",
                                                                  "lecun_uniform")


@pytest.mark.parametrize("kwargs, err", [
    ({"variant": "CNN"}, InvalidConfig),
    ({"hidden_layers": 0}, InvalidConfig),
    ({"dropout_rate": 1.0}, InvalidRate),
    ({"dropout_rate": -0.1}, InvalidRate),
])
def test_invalid_model_config(kwargs, err):
    base = {"variant": "FNN", "input_dim": 10}
    base.update(kwargs)
    with pytest.raises(err):
        neuralnet.init_model(neuralnet.ModelConfig(**base))


# activations and dropout

def test_activation_values():
    assert neuralnet.selu(0.0) == 0.0
    assert neuralnet.selu(1.0) == pytest.approx(1.0507009874, abs=1e-10)
    assert neuralnet.selu(-1.0) == pytest.approx(
        neuralnet.SELU_LAMBDA * neuralnet.SELU_ALPHA * (math.exp(-1) - 1), rel=1e-14)
    assert neuralnet.selu(-1.0) == pytest.approx(-1.11133, abs=5e-6)
    assert neuralnet.relu(-2.0) == 0.0 and neuralnet.relu(3.0) == 3.0


@pytest.mark.parametrize("kind", ["standard", "alpha"])
def test_dropout_identity_cases(kind):
    x = np.random.default_rng(0).normal(size=(5, 4))
    assert np.array_equal(neuralnet.dropout_forward(x, 0.3, "infer", kind), x)
    assert np.array_equal(neuralnet.dropout_forward(x, 0.0, "train", kind,
                                                   np.random.default_rng(1)), x)


def test_alpha_constants_at_zero_rate():
    a, b, _ = neuralnet.alpha_dropout_constants(0.0)
    assert (a, b) == (1.0, 0.0)


def test_alpha_dropout_keeps_moments():
    x = np.random.default_rng(0).standard_normal(100_000)
    out = neuralnet.dropout_forward(x, 0.1, "train", "alpha", np.random.default_rng(1))
    assert -0.05 <= out.mean() <= 0.05
    assert 0.9 <= out.var() <= 1.1


def test_standard_dropout_statistics():
    x = np.ones(100_000)
    out = neuralnet.dropout_forward(x, 0.25, "train", "standard", np.random.default_rng(2))
    assert set(np.unique(out)) <= {0.0, 1 / 0.75}
    assert (out == 0).mean() == pytest.approx(0.25, abs=0.01)
    assert out.mean() == pytest.approx(1.0, abs=0.01)


def test_dropout_rate_validated():
    with pytest.raises(InvalidRate):
        neuralnet.dropout_forward(np.ones(3), 1.0, "train", "standard")


# forward, loss, predict

def _zero_model(k=5, d=10):
    model = neuralnet.init_model(neuralnet.ModelConfig("FNN", d, output_dim=k))
    for w in model.weights:
        w[:] = 0.0
    return model


def test_zero_model_is_uniform():
    probs = neuralnet.forward(_zero_model(), np.random.default_rng(0).uniform(size=(3, 10)))
    np.testing.assert_allclose(probs, 0.2, rtol=1e-15)


def test_probe_softmax(probe):
    probs = neuralnet.forward(probe, np.array([math.log(3), 0.0]))
    np.testing.assert_allclose(probs, [0.75, 0.25], rtol=1e-14)


def test_batch_matches_single_calls():
    model = neuralnet.init_model(neuralnet.ModelConfig("SNN", 10, seed=3))
    x = np.random.default_rng(1).uniform(size=(2, 10))
    batch = neuralnet.forward(model, x)
    # BLAS may block batched products differently, so allow last-ulp noise
    np.testing.assert_allclose(batch[0], neuralnet.forward(model, x[0]), rtol=1e-14)
    np.testing.assert_allclose(batch[1], neuralnet.forward(model, x[1]), rtol=1e-14)


def test_forward_is_stable_for_huge_logits(probe):
    probs = neuralnet.forward(probe, np.array([1000.0, -1000.0]))
    assert np.all(np.isfinite(probs)) and probs[0] == 1.0


def test_forward_input_checks(probe):
    with pytest.raises(DimensionMismatch):
        neuralnet.forward(probe, np.zeros(3))
    with pytest.raises(NonFiniteInput):
        neuralnet.forward(probe, np.array([np.nan, 0.0]))


@pytest.mark.parametrize("probs, label, k, expected", [
    ([1.0, 0.0, 0.0], 0, 3, 0.0),
    ([0.2] * 5, 3, 5, math.log(5)),
    ([0.75, 0.25], 1, 2, -math.log(0.25)),
])
def test_loss_values(probs, label, k, expected):
    loss = neuralnet.loss_cross_entropy(probs, encode_one_hot([label], k)[0])
    assert loss == pytest.approx(expected, abs=1e-12)


def test_loss_floor_keeps_it_finite():
    loss = neuralnet.loss_cross_entropy([1.0, 0.0], [0.0, 1.0])
    assert loss == pytest.approx(-math.log(1e-12))


def test_predict_ties_and_argmax(probe):
    assert neuralnet.predict(probe, np.array([math.log(0.1), math.log(0.7)])) == 1
    assert neuralnet.predict(probe, np.array([0.3, 0.3])) == 0
    assert np.all(neuralnet.predict(_zero_model(), np.ones((4, 10))) == 0)


# training

@pytest.mark.parametrize("variant", neuralnet.VARIANTS)
def test_training_fits_separable_blobs(variant, blob_data):
    cfg = neuralnet.ModelConfig(variant, blob_data.d, output_dim=2, seed=0)
    model, history = neuralnet.train(neuralnet.init_model(cfg), blob_data,
                                     neuralnet.TrainConfig(epochs=20, batch_size=32))
    assert neuralnet.accuracy(model, blob_data) >= 0.99
    assert model.trained and history.train_loss[-1] < history.initial_loss
    assert len(history.train_loss) == len(history.val_loss) == 20


def test_blob_models_fixture_fits(blob_data, blob_models):
    for model in blob_models:
        assert neuralnet.accuracy(model, blob_data) >= 0.99


def test_training_deterministic():
    ds = blobs(n_per_class=200, seed=3)
    cfg = neuralnet.ModelConfig("SNN", ds.d, output_dim=2, seed=1)
    tc = neuralnet.TrainConfig(epochs=3, batch_size=32, seed=5)
    a, ha = neuralnet.train(neuralnet.init_model(cfg), ds, tc)
    b, hb = neuralnet.train(neuralnet.init_model(cfg), ds, tc)
    assert a.checksum() == b.checksum()
    assert ha.to_dict() == hb.to_dict()


def test_training_does_not_touch_input_model():
    ds = blobs(n_per_class=100)
    model = neuralnet.init_model(neuralnet.ModelConfig("FNN", ds.d, output_dim=2))
    before = model.checksum()
    neuralnet.train(model, ds, neuralnet.TrainConfig(epochs=1, batch_size=32))
    assert model.checksum() == before and not model.trained


@pytest.mark.parametrize("kwargs", [{"epochs": 0}, {"batch_size": 0}, {"learning_rate": 0.0},
                                    {"optimizer": "rmsprop"}, {"batch_size": 10_000}])
def test_invalid_train_config(kwargs):
    ds = blobs(n_per_class=50)
    model = neuralnet.init_model(neuralnet.ModelConfig("FNN", ds.d, output_dim=2))
    with pytest.raises(InvalidConfig):
        neuralnet.train(model, ds, neuralnet.TrainConfig(**kwargs))


def test_sgd_also_learns():
    ds = blobs(n_per_class=300)
    model = neuralnet.init_model(neuralnet.ModelConfig("FNN", ds.d, output_dim=2))
    trained, hist = neuralnet.train(model, ds, neuralnet.TrainConfig(
        epochs=5, batch_size=16, learning_rate=0.05, optimizer="sgd"))
    assert hist.train_loss[-1] < hist.initial_loss


# persistence

def test_checkpoint_round_trip(tmp_path, blob_models):
    model = blob_models[0]
    digest = model.save(tmp_path / "m.json")
    back = neuralnet.Model.load(tmp_path / "m.json")
    assert back.checksum() == model.checksum() == digest
    assert back.trained and back.config == model.config
    x = np.random.default_rng(0).uniform(size=(8, model.input_dim))
    np.testing.assert_array_equal(neuralnet.forward(back, x), neuralnet.forward(model, x))


# self-normalization

def test_snn_layers_self_normalize():
    for seed in range(3):
        for mean, var in oracles.layer_moments("SNN", seed=seed):
            assert -0.3 <= mean <= 0.3
            assert 0.5 <= var <= 1.5


def test_layer_activations_depth():
    outs = neuralnet.layer_activations(
        neuralnet.init_model(neuralnet.ModelConfig("FNN", 10)), np.zeros((2, 10)))
    assert [o.shape for o in outs] == [(2, 16)] * 3
