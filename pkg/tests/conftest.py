import numpy as np
import pytest

from idsadv import dataio, neuralnet

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def blobs(n_per_class=1000, d=10, lo=0.4, hi=0.6, sd=0.05, seed=0):
    """Two Gaussian blobs inside [0, 1]^d, linearly separable along the diagonal."""
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(lo, sd, (n_per_class, d)), rng.normal(hi, sd, (n_per_class, d))])
    y = np.repeat([0, 1], n_per_class)
    order = rng.permutation(y.size)
    schema = dataio.FeatureSchema(tuple(f"f{i}" for i in range(d)), "label", ("A", "B"))
    return dataio.Dataset(np.clip(x[order], 0.0, 1.0), y[order], schema, normalized=True)


@pytest.fixture(scope="session")
def blob_data():
    return blobs()


@pytest.fixture(scope="session")
def blob_models(blob_data):
    """FNN models trained on the blob set for three seeds."""
    out = []
    for seed in (0, 1, 2):
        cfg = neuralnet.ModelConfig("FNN", blob_data.d, output_dim=2, seed=seed)
        model, _ = neuralnet.train(neuralnet.init_model(cfg), blob_data,
                                   neuralnet.TrainConfig(epochs=20, batch_size=32, seed=seed))
        out.append(model)
    return out


@pytest.fixture
def probe():
    """2-feature, 2-class linear model with identity weights."""
    return neuralnet.Model.from_arrays([np.eye(2)], [np.zeros(2)])
