"""White-box L-infinity evasion attacks: FGSM, BIM and PGD.

All three are untargeted: they ascend the cross-entropy of the true label
using the sign of the input gradient, computed with dropout disabled. The
model is never modified.
"""
import json
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import kernels
from .dataio import encode_one_hot
from .errors import ConfigInvalid, DimensionMismatch, InputOutOfBounds, UntrainedModel
from .neuralnet import grad_input

ATTACKS = ("FGSM", "BIM", "PGD")
_BOUNDS_TOL = 1e-12


@dataclass(frozen=True)
class AttackConfig:
    """Budget and schedule shared by the three attacks.

    ``epsilon`` and ``step_size`` are multiplied per feature by ``scale``
    (default 1), which lets raw-feature runs express the budget as a fraction
    of each feature's range. ``step_size=None`` means ``epsilon / 10``.
    """

    epsilon: float = 0.1
    step_size: float = None
    iterations: int = 10
    clip_min: object = 0.0
    clip_max: object = 1.0
    random_start: bool = False
    scale: object = None
    seed: int = 0

    @property
    def step(self):
        return self.epsilon / 10.0 if self.step_size is None else self.step_size

    def validate(self, d=None):
        if not (np.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ConfigInvalid(f"epsilon must be >= 0, got {self.epsilon}")
        step = self.step
        if step < 0 or step > self.epsilon * (1 + 1e-12):
            raise ConfigInvalid(f"step size must lie in [0, epsilon], got {step}")
        if step == 0 and self.epsilon > 0:
            raise ConfigInvalid("step size must be positive when epsilon > 0")
        if int(self.iterations) != self.iterations or self.iterations < 1:
            raise ConfigInvalid("iterations must be an integer >= 1")
        lo, hi = np.asarray(self.clip_min, dtype=float), np.asarray(self.clip_max, dtype=float)
        if np.any(lo > hi):
            raise ConfigInvalid("clip_min exceeds clip_max")
        if self.scale is not None and np.any(np.asarray(self.scale, dtype=float) < 0):
            raise ConfigInvalid("scale must be non-negative")
        if d is not None:
            for name, v in (("clip_min", lo), ("clip_max", hi), ("scale", self.scale)):
                if v is not None and np.ndim(v) and np.shape(v) != (d,):
                    raise DimensionMismatch(f"{name} has shape {np.shape(v)}, expected ({d},)")

    def bounds(self, d):
        lo = np.broadcast_to(np.asarray(self.clip_min, dtype=np.float64), (d,)).copy()
        hi = np.broadcast_to(np.asarray(self.clip_max, dtype=np.float64), (d,)).copy()
        return lo, hi

    def budgets(self, d):
        """Per-feature (epsilon, step) vectors."""
        s = np.ones(d) if self.scale is None else np.broadcast_to(
            np.asarray(self.scale, dtype=np.float64), (d,))
        return self.epsilon * s, self.step * s

    def to_dict(self):
        def plain(v):
            return np.asarray(v, dtype=float).tolist() if v is not None else None
        return {
            "epsilon": self.epsilon, "step_size": self.step, "iterations": int(self.iterations),
            "clip_min": plain(self.clip_min), "clip_max": plain(self.clip_max),
            "random_start": self.random_start, "scale": plain(self.scale), "seed": self.seed,
        }


@dataclass(frozen=True, eq=False)
class AdversarialBatch:
    originals: np.ndarray
    perturbed: np.ndarray
    labels: np.ndarray
    attack: str
    config: AttackConfig

    def linf(self):
        """Row-wise L-infinity distance between perturbed and original rows."""
        return np.max(np.abs(self.perturbed - self.originals), axis=1)

    def to_csv(self, path, schema):
        frame = pd.DataFrame(self.perturbed, columns=list(schema.names))
        frame[schema.label_column] = np.asarray(schema.class_names, dtype=object)[self.labels]
        frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")

    def sidecar(self, model_hash):
        return {"attack": self.attack, "config": self.config.to_dict(),
                "model_sha256": model_hash, "rows": int(self.labels.shape[0])}

    def write(self, csv_path, json_path, schema, model_hash):
        self.to_csv(csv_path, schema)
        with open(json_path, "w", encoding="utf-8") as fh:
            json.dump(self.sidecar(model_hash), fh, indent=2, sort_keys=True)
            fh.write("\n")


def project_linf(candidate, origin, epsilon, clip_min, clip_max):
    """Project onto the intersection of the epsilon-ball around ``origin`` and the clip box."""
    return kernels.project_linf(candidate, origin, epsilon, clip_min, clip_max)


def _prepare(model, x, y, cfg):
    if not getattr(model, "trained", False):
        raise UntrainedModel("attacks need a trained model")
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x2 = np.atleast_2d(x)
    d = x2.shape[1]
    cfg.validate(d)
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if y.shape != (x2.shape[0],):
        raise DimensionMismatch("one label per input row required")
    lo, hi = cfg.bounds(d)
    if np.any(x2 < lo - _BOUNDS_TOL) or np.any(x2 > hi + _BOUNDS_TOL):
        raise InputOutOfBounds("inputs lie outside the clip bounds")
    return x2, y, encode_one_hot(y, model.num_classes), lo, hi, single


def _finish(x2, adv, y, name, cfg, single):
    if single:
        return AdversarialBatch(x2[0], adv[0], y, name, cfg)
    return AdversarialBatch(x2, adv, y, name, cfg)


def fgsm(model, x, y, cfg):
    x2, y, onehot, lo, hi, single = _prepare(model, x, y, cfg)
    eps, _ = cfg.budgets(x2.shape[1])
    g = grad_input(model, x2, onehot)
    adv = np.clip(kernels.signed_step(x2, g, eps), lo, hi)
    return _finish(x2, adv, y, "FGSM", cfg, single)


def _iterate(model, x2, onehot, start, cfg, lo, hi):
    eps, step = cfg.budgets(x2.shape[1])
    adv = start
    for _ in range(int(cfg.iterations)):
        g = grad_input(model, adv, onehot)
        adv = kernels.project_linf(kernels.signed_step(adv, g, step), x2, eps, lo, hi)
    return adv


def bim(model, x, y, cfg):
    x2, y, onehot, lo, hi, single = _prepare(model, x, y, cfg)
    adv = _iterate(model, x2, onehot, x2.copy(), cfg, lo, hi)
    return _finish(x2, adv, y, "BIM", cfg, single)


def pgd(model, x, y, cfg):
    x2, y, onehot, lo, hi, single = _prepare(model, x, y, cfg)
    start = x2.copy()
    if cfg.random_start:
        eps, _ = cfg.budgets(x2.shape[1])
        rng = np.random.default_rng(cfg.seed)
        start = np.clip(x2 + rng.uniform(-1.0, 1.0, size=x2.shape) * eps, lo, hi)
    adv = _iterate(model, x2, onehot, start, cfg, lo, hi)
    return _finish(x2, adv, y, "PGD", cfg, single)


def run_attack(name, model, x, y, cfg):
    try:
        fn = {"FGSM": fgsm, "BIM": bim, "PGD": pgd}[name]
    except KeyError:
        raise ConfigInvalid(f"unknown attack {name!r}") from None
    return fn(model, x, y, cfg)
