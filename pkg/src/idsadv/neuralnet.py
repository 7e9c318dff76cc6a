"""Dense feed-forward classifiers in two flavours.

FNN: ReLU activations, standard dropout, Glorot-uniform weights.
SNN: SELU activations, alpha dropout, LeCun-uniform weights.

Hidden layers are ordered dense -> activation -> dropout; the output layer is
dense -> softmax. Everything is float64 numpy; the elementwise activation and
dropout kernels come from :mod:`idsadv.kernels`.
"""
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .dataio import encode_one_hot, stratified_split
from .errors import (
    DimensionMismatch,
    DivergenceDetected,
    InvalidConfig,
    InvalidRate,
    NonFiniteInput,
)

SELU_LAMBDA = kernels.SELU_LAMBDA
SELU_ALPHA = kernels.SELU_ALPHA
PROB_FLOOR = 1e-12
VARIANTS = ("FNN", "SNN")

_ACTIVATION = {"FNN": "relu", "SNN": "selu"}
_DROPOUT = {"FNN": "standard", "SNN": "alpha"}
_INIT = {"FNN": "glorot_uniform", "SNN": "lecun_uniform"}
_KERNEL_KIND = {"relu": kernels.RELU, "selu": kernels.SELU}


@dataclass(frozen=True)
class ModelConfig:
    variant: str
    input_dim: int
    hidden_layers: int = 3
    hidden_width: int = 16
    output_dim: int = 5
    dropout_rate: float = 0.1
    dropout_after_output: bool = False
    seed: int = 0

    def validate(self, allow_no_hidden=False):
        if self.variant not in VARIANTS:
            raise InvalidConfig(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.hidden_layers < (0 if allow_no_hidden else 1):
            raise InvalidConfig("hidden_layers must be >= 1")
        if self.input_dim < 1 or self.hidden_width < 1 or self.output_dim < 2:
            raise InvalidConfig("layer widths must be >= 1 and output_dim >= 2")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidRate(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.seed < 0:
            raise InvalidConfig("seed must be non-negative")

    @property
    def activation(self):
        return _ACTIVATION[self.variant]

    @property
    def dropout_kind(self):
        return _DROPOUT[self.variant]

    @property
    def initializer(self):
        return _INIT[self.variant]

    def layer_sizes(self):
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 256
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    validation_fraction: float = 0.1
    seed: int = 0

    def validate(self):
        if self.epochs < 1:
            raise InvalidConfig("epochs must be >= 1")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if not self.learning_rate > 0:
            raise InvalidConfig("learning_rate must be positive")
        if self.optimizer not in ("sgd", "adam"):
            raise InvalidConfig(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise InvalidConfig("validation_fraction must be in (0, 1)")


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    initial_loss: float = float("nan")

    def to_dict(self):
        return {"train_loss": list(self.train_loss), "val_loss": list(self.val_loss),
                "initial_loss": self.initial_loss}


class Model:
    """Layer stack plus config. Treat as immutable once trained."""

    def __init__(self, config, weights, biases, trained=False, train_seed=None):
        self.config = config
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.trained = trained
        self.train_seed = train_seed
        if len(self.weights) != len(self.biases) or len(self.weights) != config.hidden_layers + 1:
            raise DimensionMismatch("one weight matrix and bias per layer required")
        sizes = config.layer_sizes()
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i], sizes[i + 1]) or b.shape != (sizes[i + 1],):
                raise DimensionMismatch(f"layer {i}: weight {w.shape}, bias {b.shape}")

    @classmethod
    def from_arrays(cls, weights, biases, variant="FNN", dropout_rate=0.0, trained=True):
        """Build a model from explicit parameters, e.g. a hand-set probe."""
        weights = [np.atleast_2d(np.asarray(w, dtype=np.float64)) for w in weights]
        cfg = ModelConfig(
            variant=variant,
            input_dim=weights[0].shape[0],
            hidden_layers=len(weights) - 1,
            hidden_width=weights[0].shape[1] if len(weights) > 1 else 1,
            output_dim=weights[-1].shape[1],
            dropout_rate=dropout_rate,
        )
        cfg.validate(allow_no_hidden=True)
        return cls(cfg, weights, biases, trained=trained)

    @property
    def input_dim(self):
        return self.config.input_dim

    @property
    def num_classes(self):
        return self.config.output_dim

    def copy(self):
        return Model(self.config, [w.copy() for w in self.weights],
                     [b.copy() for b in self.biases], self.trained, self.train_seed)

    def to_dict(self):
        return {
            "config": asdict(self.config),
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "selu": {"lambda": SELU_LAMBDA, "alpha": SELU_ALPHA},
            "trained": self.trained,
            "train_seed": self.train_seed,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        cfg = ModelConfig(**doc["config"])
        cfg.validate(allow_no_hidden=True)
        return cls(cfg, doc["weights"], doc["biases"], doc.get("trained", False),
                   doc.get("train_seed"))

    def save(self, path):
        text = self.to_json()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def checksum(self):
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def glorot_bound(fan_in, fan_out):
    return math.sqrt(6.0 / (fan_in + fan_out))


def lecun_bound(fan_in):
    return math.sqrt(3.0 / fan_in)


def init_model(cfg):
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    sizes = cfg.layer_sizes()
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if cfg.initializer == "glorot_uniform":
            bound = glorot_bound(fan_in, fan_out)
        else:
            bound = lecun_bound(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Model(cfg, weights, biases)


def relu(x):
    out = kernels.act_forward(x, kernels.RELU)
    return float(out) if np.ndim(x) == 0 else out


def selu(x):
    out = kernels.act_forward(x, kernels.SELU)
    return float(out) if np.ndim(x) == 0 else out


def alpha_dropout_constants(p):
    """Return (a, b, alpha') so that a * (kept or alpha') + b keeps zero mean, unit variance."""
    q = 1.0 - p
    alpha_p = -SELU_LAMBDA * SELU_ALPHA
    a = (q + alpha_p * alpha_p * q * (1.0 - q)) ** -0.5
    b = -a * (1.0 - q) * alpha_p
    return a, b, alpha_p


def _dropout(x, p, kind, rng):
    """Train-mode dropout; returns (output, backward-multiplier)."""
    if p == 0.0:
        return x, None
    keep = rng.random(x.shape) >= p
    if kind == "standard":
        scale = keep / (1.0 - p)
        return x * scale, scale
    a, b, alpha_p = alpha_dropout_constants(p)
    return kernels.alpha_dropout(x, keep, a, b, alpha_p), a * keep


def dropout_forward(x, p, mode, kind, rng=None):
    if not 0.0 <= p < 1.0:
        raise InvalidRate(f"dropout rate must be in [0, 1), got {p}")
    if kind not in ("standard", "alpha"):
        raise InvalidConfig(f"unknown dropout kind {kind!r}")
    x = np.asarray(x, dtype=np.float64)
    if mode == "infer":
        return x
    if rng is None:
        rng = np.random.default_rng()
    return _dropout(x, p, kind, rng)[0]


def _softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_input(model, x):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = x.reshape(1, -1) if single else x
    if x2.ndim != 2 or x2.shape[1] != model.input_dim:
        raise DimensionMismatch(f"expected {model.input_dim} features, got shape {x.shape}")
    if not np.all(np.isfinite(x2)):
        raise NonFiniteInput("input contains NaN or Inf")
    return x2, single


def _forward(model, x, mode, rng):
    """Run the network, keeping what the backward pass needs."""
    cfg = model.config
    kind = _KERNEL_KIND[cfg.activation]
    train = mode == "train"
    if mode not in ("train", "infer"):
        raise InvalidConfig(f"mode must be 'train' or 'infer', got {mode!r}")
    if train and rng is None:
        rng = np.random.default_rng()
    a = x
    cache = []
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        z = a @ w + b
        h = kernels.act_forward(z, kind)
        mult = None
        if train:
            h, mult = _dropout(h, cfg.dropout_rate, cfg.dropout_kind, rng)
        cache.append((a, z, mult))
        a = h
    logits = a @ model.weights[-1] + model.biases[-1]
    out_mult = None
    if train and cfg.dropout_after_output:
        logits, out_mult = _dropout(logits, cfg.dropout_rate, cfg.dropout_kind, rng)
    return _softmax(logits), (cache, a, out_mult)


def forward(model, x, mode="infer", rng=None):
    x2, single = _check_input(model, x)
    probs, _ = _forward(model, x2, mode, rng)
    return probs[0] if single else probs


def loss_cross_entropy(probs, y_onehot):
    """Per-row cross-entropy with probabilities floored at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    y = np.asarray(y_onehot, dtype=np.float64)
    return -np.sum(y * np.log(np.maximum(probs, PROB_FLOOR)), axis=-1)


def _logit_grad(probs, y):
    # softmax cross-entropy gradient; matches the floored loss whenever every
    # target probability exceeds PROB_FLOOR. Differentiating the floor itself
    # would give zero gradient on confidently wrong rows and freeze training.
    return probs * y.sum(axis=1, keepdims=True) - y


def _backward(model, probs, y, state, want_params):
    cache, last_act, out_mult = state
    kind = _KERNEL_KIND[model.config.activation]
    g = _logit_grad(probs, y)
    if out_mult is not None:
        g = g * out_mult
    dws, dbs = [], []
    if want_params:
        dws.append(last_act.T @ g)
        dbs.append(g.sum(axis=0))
    g = g @ model.weights[-1].T
    for i in range(len(cache) - 1, -1, -1):
        a_prev, z, mult = cache[i]
        if mult is not None:
            g = g * mult
        g = kernels.act_backward(z, g, kind)
        if want_params:
            dws.append(a_prev.T @ g)
            dbs.append(g.sum(axis=0))
        g = g @ model.weights[i].T
    return g, dws[::-1], dbs[::-1]


def _targets(model, x2, y_onehot):
    y = np.asarray(y_onehot, dtype=np.float64).reshape(x2.shape[0], -1)
    if y.shape[1] != model.num_classes:
        raise DimensionMismatch(f"targets need {model.num_classes} columns, got {y.shape[1]}")
    return y


def grad_params(model, x, y_onehot, mode="infer", rng=None):
    """Gradients of the mean batch loss w.r.t. every weight and bias.

    Returns (weight_grads, bias_grads), shaped like ``model.weights``/``biases``.
    """
    x2, _ = _check_input(model, x)
    y = _targets(model, x2, y_onehot)
    probs, state = _forward(model, x2, mode, rng)
    _, dws, dbs = _backward(model, probs, y, state, want_params=True)
    n = x2.shape[0]
    return [dw / n for dw in dws], [db / n for db in dbs]


def grad_input(model, x, y_onehot):
    """Gradient of each row's own loss w.r.t. that row's input (infer mode)."""
    x2, single = _check_input(model, x)
    y = _targets(model, x2, y_onehot)
    probs, state = _forward(model, x2, "infer", None)
    gx, _, _ = _backward(model, probs, y, state, want_params=False)
    return gx[0] if single else gx


def predict(model, x):
    """Most probable class; ties go to the lowest index."""
    return np.argmax(forward(model, x, "infer"), axis=-1)


def mean_loss(model, x, y_onehot):
    return float(np.mean(loss_cross_entropy(forward(model, x, "infer"), y_onehot)))


class _Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m = self.v = None

    def step(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


class _SGD:
    def __init__(self, lr):
        self.lr = lr

    def step(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.lr * g


def train(model, ds, tc):
    """Mini-batch training on a copy of ``model``; returns (trained_model, history).

    A stratified ``validation_fraction`` of ``ds`` is held out for the
    per-epoch validation loss.
    """
    tc.validate()
    if ds.n < tc.batch_size:
        raise InvalidConfig(f"dataset has {ds.n} rows, fewer than batch_size {tc.batch_size}")
    if ds.d != model.input_dim or ds.k != model.num_classes:
        raise DimensionMismatch("dataset shape does not match the model")
    rng = np.random.default_rng([tc.seed, 1])
    fit, val = stratified_split(ds, tc.validation_fraction, rng.integers(2**32))
    x, y = fit.features, encode_one_hot(fit.labels, ds.k)
    xv, yv = val.features, encode_one_hot(val.labels, ds.k)

    model = model.copy()
    params = model.weights + model.biases
    opt = _Adam(tc.learning_rate) if tc.optimizer == "adam" else _SGD(tc.learning_rate)
    history = TrainHistory(initial_loss=mean_loss(model, x, y))
    for epoch in range(tc.epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            train_loss, val_loss = _epoch(model, params, opt, x, y, xv, yv, tc, rng)
        if not (math.isfinite(train_loss) and math.isfinite(val_loss)):
            raise DivergenceDetected(f"non-finite loss at epoch {epoch + 1}")
        history.train_loss.append(train_loss)
        history.val_loss.append(val_loss)
    model.trained = True
    model.train_seed = tc.seed
    return model, history


def _epoch(model, params, opt, x, y, xv, yv, tc, rng):
    order = rng.permutation(x.shape[0])
    total = 0.0
    for start in range(0, x.shape[0], tc.batch_size):
        idx = order[start:start + tc.batch_size]
        xb, yb = x[idx], y[idx]
        probs, state = _forward(model, xb, "train", rng)
        total += float(loss_cross_entropy(probs, yb).sum())
        _, dws, dbs = _backward(model, probs, yb, state, want_params=True)
        opt.step(params, [g / idx.size for g in dws + dbs])
    return total / x.shape[0], mean_loss(model, xv, yv)


def accuracy(model, ds):
    return float(np.mean(predict(model, ds.features) == ds.labels))


def layer_activations(model, x):
    """Post-activation outputs of every hidden layer (infer mode)."""
    x2, _ = _check_input(model, x)
    kind = _KERNEL_KIND[model.config.activation]
    outs = []
    a = x2
    for w, b in zip(model.weights[:-1], model.biases[:-1]):
        a = kernels.act_forward(a @ w + b, kind)
        outs.append(a)
    return outs


__all__ = [
    "ModelConfig", "TrainConfig", "TrainHistory", "Model", "init_model", "relu", "selu",
    "dropout_forward", "alpha_dropout_constants", "forward", "loss_cross_entropy",
    "grad_params", "grad_input", "train", "predict", "accuracy", "layer_activations",
    "glorot_bound", "lecun_bound",
]
