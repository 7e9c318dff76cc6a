"""End-to-end adversarial evaluation of FNN and SNN intrusion detectors.

For every seed, normalization regime and model variant: initialise, train,
evaluate on the clean test split, craft FGSM/BIM/PGD samples from the test
split and evaluate again. Results are collected in an
:class:`ExperimentReport` and can be emitted as JSON, a flat CSV grid, or
per-figure plot tables.
"""
import copy
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import attacks as atk
from . import dataio, neuralnet
from .errors import ConfigError, IdsAdvError, InvalidConfig, MissingCell
from .metrics import ClassificationReport, evaluate

logger = logging.getLogger(__name__)

CONDITIONS = ("clean",) + atk.ATTACKS
REGIMES = ("normalized", "raw")
FIGURE_DATASETS = {"clean": "Adversarial-Free", "FGSM": "FGSM", "BIM": "BIM", "PGD": "PGD"}
FIG5_METRICS = (
    ("Prediction Accuracy", "accuracy"),
    ("Average Precision", "precision"),
    ("Average Recall", "recall"),
    ("Average F1-Score", "f1"),
    ("Cohen Cappa Score", "cohen_kappa"),
    ("MC Coefficient", "mcc"),
)


# -- configuration ---------------------------------------------------------

@dataclass
class DataConfig:
    synthetic: object = "botiot-mini"
    train_csv: str = None
    test_csv: str = None
    test_fraction: float = 0.2
    subsample: float = 1.0
    split_seed: int = 0
    exclude_identifiers: bool = False
    features: list = None
    label_column: str = dataio.LABEL_COLUMN
    class_names: list = None

    def schema(self):
        names = self.features or list(dataio.BOTIOT_FEATURES)
        if self.exclude_identifiers:
            names = [n for n in names if n not in dataio.IDENTIFIER_FEATURES]
        return dataio.FeatureSchema(tuple(names), self.label_column,
                                    tuple(self.class_names or dataio.BOTIOT_CLASSES))


@dataclass
class ModelSection:
    hidden_layers: int = 3
    hidden_width: int = 16
    dropout_rate: float = 0.1
    dropout_after_output: bool = False


@dataclass
class AttackSection:
    epsilon: float = 0.1
    step_size: float = None
    iterations: int = 10
    random_start: bool = False


def _default_attacks():
    return {name: AttackSection() for name in atk.ATTACKS}


def _default_models():
    return {v: ModelSection() for v in neuralnet.VARIANTS}


@dataclass
class ExperimentConfig:
    data: DataConfig = field(default_factory=DataConfig)
    normalize: object = "both"
    variants: list = field(default_factory=lambda: list(neuralnet.VARIANTS))
    models: dict = field(default_factory=_default_models)
    train: neuralnet.TrainConfig = field(default_factory=neuralnet.TrainConfig)
    attacks: dict = field(default_factory=_default_attacks)
    conditions: list = field(default_factory=lambda: list(CONDITIONS))
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    out_dir: str = "results"
    threads: int = 1

    @property
    def regimes(self):
        if self.normalize == "both":
            return list(REGIMES)
        return ["normalized"] if self.normalize else ["raw"]

    def validate(self):
        if self.normalize not in (True, False, "both"):
            raise InvalidConfig("normalize must be true, false or \"both\"")
        if not self.variants:
            raise InvalidConfig("at least one model variant must be enabled")
        for v in self.variants:
            if v not in neuralnet.VARIANTS:
                raise InvalidConfig(f"unknown variant {v!r}")
            if v not in self.models:
                raise InvalidConfig(f"no model section for {v}")
        if not self.conditions:
            raise InvalidConfig("at least one evaluation condition must be enabled")
        for c in self.conditions:
            if c not in CONDITIONS:
                raise InvalidConfig(f"unknown condition {c!r}")
            if c != "clean" and c not in self.attacks:
                raise InvalidConfig(f"no attack section for {c}")
        if not self.seeds:
            raise InvalidConfig("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds) or any(s < 0 for s in self.seeds):
            raise InvalidConfig("seeds must be distinct non-negative integers")
        if self.threads < 1:
            raise InvalidConfig("threads must be >= 1")
        d = self.data
        if (d.train_csv is None) != (d.test_csv is None) and d.train_csv is None:
            raise InvalidConfig("test_csv given without train_csv")
        if d.train_csv is None and d.synthetic is None:
            raise InvalidConfig("data needs either train_csv or a synthetic source")
        if not 0.0 < d.subsample <= 1.0:
            raise InvalidConfig("subsample must be in (0, 1]")
        self.train.validate()
        for name, sec in self.attacks.items():
            atk.AttackConfig(sec.epsilon, sec.step_size, sec.iterations).validate()
        d.schema()

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, doc):
        doc = copy.deepcopy(doc)
        _reject_unknown(doc, cls, "")
        kw = {}
        for f in fields(cls):
            if f.name not in doc:
                continue
            val = doc[f.name]
            if f.name == "data":
                _reject_unknown(val, DataConfig, "data.")
                val = DataConfig(**val)
            elif f.name == "train":
                _reject_unknown(val, neuralnet.TrainConfig, "train.")
                val = neuralnet.TrainConfig(**val)
            elif f.name == "models":
                merged = _default_models()
                for k, sec in val.items():
                    _reject_unknown(sec, ModelSection, f"models.{k}.")
                    merged[k] = ModelSection(**{**asdict(merged.get(k, ModelSection())), **sec})
                val = merged
            elif f.name == "attacks":
                merged = _default_attacks()
                for k, sec in val.items():
                    _reject_unknown(sec, AttackSection, f"attacks.{k}.")
                    merged[k] = AttackSection(**{**asdict(merged.get(k, AttackSection())), **sec})
                val = merged
            kw[f.name] = val
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, overrides=()):
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        return cls.from_dict(apply_overrides(doc, overrides))


def _reject_unknown(doc, klass, prefix):
    if not isinstance(doc, dict):
        raise InvalidConfig(f"{prefix or 'config'} must be an object")
    known = {f.name for f in fields(klass)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise InvalidConfig(f"unknown config keys: {', '.join(prefix + k for k in unknown)}")


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc, overrides):
    """Apply ``dotted.key=value`` overrides to a config document (values parsed as JSON)."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise InvalidConfig(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        node = doc
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise InvalidConfig(f"override {key!r} descends into a non-object")
        node[parts[-1]] = _parse_value(raw)
    return doc


# -- data ------------------------------------------------------------------

@dataclass
class RegimeData:
    """Train/test matrices for one normalization regime plus attack geometry."""

    train: dataio.Dataset
    test: dataio.Dataset
    clip_min: np.ndarray
    clip_max: np.ndarray
    scale: np.ndarray


@dataclass
class PreparedData:
    train: dataio.Dataset
    test: dataio.Dataset
    stats: dataio.FeatureStats
    fingerprint: dict

    def regime(self, name):
        if name == "normalized":
            train = dataio.apply_normalization(self.train, self.stats)
            test = dataio.apply_normalization(self.test, self.stats)
            d = train.d
            return RegimeData(train, test, np.zeros(d), np.ones(d), np.ones(d))
        # raw features: test rows are clamped to the training range so that the
        # clip box used by the attacks contains every original point
        test = dataio.clamp_to_range(self.test, self.stats)
        return RegimeData(self.train, test, self.stats.min.copy(), self.stats.max.copy(),
                          self.stats.span.copy())


def _file_sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def prepare_data(cfg):
    d = cfg.data
    schema = d.schema()
    source = {}
    if d.train_csv is not None:
        train = dataio.load_csv(d.train_csv, schema)
        source["train_csv"] = {"path": str(d.train_csv), "sha256": _file_sha256(d.train_csv),
                               "rejected_rows": train.rejected_rows}
        if d.test_csv is not None:
            test = dataio.load_csv(d.test_csv, schema)
            source["test_csv"] = {"path": str(d.test_csv), "sha256": _file_sha256(d.test_csv),
                                  "rejected_rows": test.rejected_rows}
        else:
            train, test = dataio.stratified_split(train, d.test_fraction, d.split_seed)
    else:
        spec = (dataio.load_preset(d.synthetic) if isinstance(d.synthetic, str)
                else dataio.SyntheticSpec.from_dict(d.synthetic))
        full = dataio.generate_synthetic(spec)
        if list(full.schema.names) != list(schema.names):
            full = full.select(schema.names)
        source["synthetic"] = {
            "preset": d.synthetic if isinstance(d.synthetic, str) else None,
            "sha256": hashlib.sha256(json.dumps(spec.to_dict(), sort_keys=True)
                                     .encode()).hexdigest(),
        }
        train, test = dataio.stratified_split(full, d.test_fraction, d.split_seed)
    if d.subsample < 1.0:
        train = dataio.stratified_subsample(train, d.subsample, d.split_seed)
        test = dataio.stratified_subsample(test, d.subsample, d.split_seed + 1)
    stats = dataio.fit_normalizer(train)
    fp = {"source": source, "train": train.fingerprint(), "test": test.fingerprint(),
          "features": list(schema.names)}
    return PreparedData(train, test, stats, fp)


# -- cells -----------------------------------------------------------------

def model_key(regime, variant, seed):
    return f"{regime}/{variant}/seed{seed}"


def cell_key(regime, variant, condition, seed):
    return f"{regime}/{variant}/{condition}/seed{seed}"


def parse_cell_key(key):
    regime, variant, condition, seed = key.split("/")
    return regime, variant, condition, int(seed[4:])


def model_config(cfg, variant, seed, data):
    sec = cfg.models[variant]
    return neuralnet.ModelConfig(
        variant=variant, input_dim=data.train.d, hidden_layers=sec.hidden_layers,
        hidden_width=sec.hidden_width, output_dim=data.train.k,
        dropout_rate=sec.dropout_rate, dropout_after_output=sec.dropout_after_output, seed=seed)


def attack_config(cfg, method, regime_data, seed):
    sec = cfg.attacks[method]
    return atk.AttackConfig(
        epsilon=sec.epsilon, step_size=sec.step_size, iterations=sec.iterations,
        clip_min=regime_data.clip_min, clip_max=regime_data.clip_max,
        random_start=sec.random_start, scale=regime_data.scale, seed=seed)


def _with_context(exc, context):
    exc.args = (f"[{context}] {exc.args[0] if exc.args else exc}",) + exc.args[1:]
    return exc


def train_cell(cfg, regime_data, regime, variant, seed):
    ctx = model_key(regime, variant, seed)
    try:
        model = neuralnet.init_model(model_config(cfg, variant, seed, regime_data))
        tc = neuralnet.TrainConfig(**{**asdict(cfg.train), "seed": seed})
        trained, history = neuralnet.train(model, regime_data.train, tc)
    except IdsAdvError as exc:
        raise _with_context(exc, ctx)
    logger.info("trained %s: final train loss %.4f, val loss %.4f", ctx,
                history.train_loss[-1], history.val_loss[-1])
    return trained, history


def craft_cell(cfg, model, regime_data, regime, method, seed):
    ctx = cell_key(regime, model.config.variant, method, seed)
    try:
        acfg = attack_config(cfg, method, regime_data, seed)
        return atk.run_attack(method, model, regime_data.test.features,
                              regime_data.test.labels, acfg)
    except IdsAdvError as exc:
        raise _with_context(exc, ctx)


def score(model, x, labels, schema):
    pred = neuralnet.predict(model, x)
    return evaluate(labels, pred, schema.num_classes, schema.class_names)


@dataclass
class ExperimentReport:
    cells: dict
    histories: dict
    config: dict
    attack_configs: dict
    dataset: dict
    majority_share: dict = field(default_factory=dict)

    def accuracy(self, regime, variant, condition):
        """Per-seed accuracies, ordered by seed."""
        seeds = self.seeds()
        out = []
        for s in seeds:
            key = cell_key(regime, variant, condition, s)
            if key not in self.cells:
                raise MissingCell(key)
            out.append(self.cells[key].accuracy)
        return out

    def seeds(self):
        return sorted({parse_cell_key(k)[3] for k in self.cells})

    def has(self, regime, variant, condition):
        return any(parse_cell_key(k)[:3] == (regime, variant, condition) for k in self.cells)

    def to_dict(self):
        return {
            "config": self.config,
            "dataset": self.dataset,
            "majority_share": self.majority_share,
            "attack_configs": self.attack_configs,
            "histories": self.histories,
            "cells": {k: self.cells[k].to_dict() for k in sorted(self.cells)},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc):
        cells = {k: ClassificationReport.from_dict(v) for k, v in doc["cells"].items()}
        return cls(cells, doc.get("histories", {}), doc.get("config", {}),
                   doc.get("attack_configs", {}), doc.get("dataset", {}),
                   doc.get("majority_share", {}))

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _majority_share(ds):
    counts = ds.class_counts()
    return float(counts.max() / counts.sum())


def _map_cells(cfg, fn, jobs):
    if cfg.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            return list(pool.map(lambda j: fn(*j), jobs))
    return [fn(*j) for j in jobs]


def _model_jobs(cfg):
    return [(r, v, s) for r in cfg.regimes for v in cfg.variants for s in cfg.seeds]


def run(cfg, out_dir=None):
    """Execute the whole pipeline in memory; persist artefacts when ``out_dir`` is given."""
    cfg.validate()
    data = prepare_data(cfg)
    regimes = {r: data.regime(r) for r in cfg.regimes}
    jobs = _model_jobs(cfg)

    def one(regime, variant, seed):
        rd = regimes[regime]
        model, history = train_cell(cfg, rd, regime, variant, seed)
        cells, batches = {}, {}
        for cond in cfg.conditions:
            if cond == "clean":
                x = rd.test.features
            else:
                batch = craft_cell(cfg, model, rd, regime, cond, seed)
                batches[cond] = batch
                x = batch.perturbed
            cells[cell_key(regime, variant, cond, seed)] = score(model, x, rd.test.labels,
                                                                 rd.test.schema)
        return model, history, cells, batches

    results = _map_cells(cfg, one, jobs)
    report = _assemble(cfg, data, regimes, jobs,
                       [(h, c) for _, h, c, _ in results])
    if out_dir is not None:
        out = Path(out_dir)
        _write_models(out, data, jobs, [(m, h) for m, h, _, _ in results])
        for (regime, variant, seed), (model, _, _, batches) in zip(jobs, results):
            _write_batches(out, regimes[regime], regime, variant, seed, model, batches)
        write_report(report, out)
    return report


def _assemble(cfg, data, regimes, jobs, results):
    cells, histories = {}, {}
    for (regime, variant, seed), (history, cell) in zip(jobs, results):
        histories[model_key(regime, variant, seed)] = history.to_dict()
        cells.update(cell)
    attack_cfgs = {}
    for regime, rd in regimes.items():
        for method in cfg.conditions:
            if method != "clean":
                d = attack_config(cfg, method, rd, 0).to_dict()
                d.pop("seed")
                attack_cfgs[f"{regime}/{method}"] = d
    return ExperimentReport(
        cells=cells, histories=histories, config=_jsonable(cfg.to_dict()),
        attack_configs=attack_cfgs, dataset=data.fingerprint,
        majority_share={"train": _majority_share(data.train), "test": _majority_share(data.test)},
    )


def _jsonable(obj):
    return json.loads(json.dumps(obj))


# -- phase-by-phase execution (CLI caching) --------------------------------

def _ckpt_path(out, regime, variant, seed):
    return out / "checkpoints" / f"{regime}-{variant}-seed{seed}.json"


def _adv_paths(out, regime, variant, seed, method):
    stem = out / "adversarial" / f"{regime}-{variant}-seed{seed}-{method}"
    return stem.with_suffix(".csv"), stem.with_suffix(".json")


def _write_models(out, data, jobs, models):
    (out / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out / "histories").mkdir(parents=True, exist_ok=True)
    with open(out / "normalizer.json", "w", encoding="utf-8") as fh:
        fh.write(data.stats.to_json() + "\n")
    for (regime, variant, seed), (model, history) in zip(jobs, models):
        model.save(_ckpt_path(out, regime, variant, seed))
        with open(out / "histories" / f"{regime}-{variant}-seed{seed}.json", "w",
                  encoding="utf-8") as fh:
            json.dump(history.to_dict(), fh, sort_keys=True)
            fh.write("\n")


def _write_batches(out, rd, regime, variant, seed, model, batches):
    (out / "adversarial").mkdir(parents=True, exist_ok=True)
    digest = model.checksum()
    for method, batch in batches.items():
        csv_path, json_path = _adv_paths(out, regime, variant, seed, method)
        batch.write(csv_path, json_path, rd.test.schema, digest)


def run_train(cfg, out_dir):
    """Train every (regime, variant, seed) model and save checkpoints."""
    cfg.validate()
    out = Path(out_dir)
    data = prepare_data(cfg)
    regimes = {r: data.regime(r) for r in cfg.regimes}
    jobs = _model_jobs(cfg)
    models = _map_cells(cfg, lambda r, v, s: train_cell(cfg, regimes[r], r, v, s), jobs)
    _write_models(out, data, jobs, models)
    return [_ckpt_path(out, *j) for j in jobs]


def _load_model(out, regime, variant, seed):
    path = _ckpt_path(out, regime, variant, seed)
    if not path.exists():
        raise MissingCell(f"no checkpoint {path}; run the train phase first")
    return neuralnet.Model.load(path)


def run_attacks(cfg, out_dir):
    """Craft adversarial test sets from saved checkpoints."""
    cfg.validate()
    out = Path(out_dir)
    data = prepare_data(cfg)
    regimes = {r: data.regime(r) for r in cfg.regimes}
    methods = [c for c in cfg.conditions if c != "clean"]

    def one(regime, variant, seed):
        model = _load_model(out, regime, variant, seed)
        batches = {m: craft_cell(cfg, model, regimes[regime], regime, m, seed) for m in methods}
        _write_batches(out, regimes[regime], regime, variant, seed, model, batches)

    _map_cells(cfg, one, _model_jobs(cfg))


def run_evaluate(cfg, out_dir):
    """Score saved checkpoints on the clean test split and saved adversarial sets."""
    cfg.validate()
    out = Path(out_dir)
    data = prepare_data(cfg)
    regimes = {r: data.regime(r) for r in cfg.regimes}
    jobs = _model_jobs(cfg)
    results = []
    for regime, variant, seed in jobs:
        rd = regimes[regime]
        model = _load_model(out, regime, variant, seed)
        cells = {}
        for cond in cfg.conditions:
            if cond == "clean":
                x, labels = rd.test.features, rd.test.labels
            else:
                csv_path, _ = _adv_paths(out, regime, variant, seed, cond)
                if not csv_path.exists():
                    raise MissingCell(f"no adversarial set {csv_path}; run the attack phase first")
                adv = dataio.load_csv(csv_path, rd.test.schema, strict=True)
                x, labels = adv.features, adv.labels
            cells[cell_key(regime, variant, cond, seed)] = score(model, x, labels, rd.test.schema)
        hist_path = out / "histories" / f"{regime}-{variant}-seed{seed}.json"
        with open(hist_path, encoding="utf-8") as fh:
            history = neuralnet.TrainHistory(**json.load(fh))
        results.append((history, cells))
    report = _assemble(cfg, data, regimes, jobs, results)
    write_report(report, out)
    return report


def write_report(report, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit(report, "json", out)
    emit(report, "csv-grid", out)
    emit(report, "plot-data", out)
    with open(out / "comparison.json", "w", encoding="utf-8") as fh:
        fh.write(json.dumps(compare(report), indent=2, sort_keys=True) + "\n")


# -- comparison --------------------------------------------------------------

def _vote(flags):
    flags = [bool(f) for f in flags]
    yes = sum(flags)
    n = len(flags)
    return {
        "result": yes * 2 > n,
        "votes": f"{yes}/{n}",
        "status": "unreplicated" if n == 1 else "replicated",
    }


def _mean(xs):
    return float(sum(xs) / len(xs))


def compare(report):
    """Summarize FNN-vs-SNN deltas, degradation and direction flags."""
    seeds = report.seeds()
    regimes = sorted({parse_cell_key(k)[0] for k in report.cells})
    summary = {"seeds": seeds, "regimes": {}}
    for regime in regimes:
        variants = [v for v in neuralnet.VARIANTS if report.has(regime, v, "clean")
                    or any(report.has(regime, v, c) for c in CONDITIONS)]
        conds = [c for c in CONDITIONS if all(report.has(regime, v, c) for v in variants)]
        acc = {(v, c): report.accuracy(regime, v, c) for v in variants for c in conds}
        block = {"accuracy": {}, "degradation": {}, "flags": {}}
        for v in variants:
            block["accuracy"][v] = {c: {"mean": _mean(acc[v, c]), "min": min(acc[v, c]),
                                        "max": max(acc[v, c]), "per_seed": acc[v, c]}
                                    for c in conds}
            if "clean" in conds:
                block["degradation"][v] = {
                    c: _mean([a - b for a, b in zip(acc[v, "clean"], acc[v, c])])
                    for c in conds if c != "clean"}
                if "BIM" in conds and "FGSM" in conds:
                    block["flags"][f"{v}: BIM <= FGSM"] = _vote(
                        [b <= f for b, f in zip(acc[v, "BIM"], acc[v, "FGSM"])])
        if "FNN" in variants and "SNN" in variants:
            block["delta_fnn_minus_snn"] = {
                c: _mean([a - b for a, b in zip(acc["FNN", c], acc["SNN", c])]) for c in conds}
            if "clean" in conds:
                block["flags"]["clean favors FNN"] = _vote(
                    [a >= b for a, b in zip(acc["FNN", "clean"], acc["SNN", "clean"])])
            for c in conds:
                if c != "clean":
                    block["flags"][f"SNN more resilient under {c}"] = _vote(
                        [s >= f for s, f in zip(acc["SNN", c], acc["FNN", c])])
        summary["regimes"][regime] = block
    if len(regimes) == 2:
        cross = {}
        for v in neuralnet.VARIANTS:
            if all(report.has(r, v, "clean") for r in REGIMES):
                norm = report.accuracy("normalized", v, "clean")
                raw = report.accuracy("raw", v, "clean")
                cross[f"{v}: raw clean < normalized clean"] = _vote(
                    [r < n for r, n in zip(raw, norm)])
        summary["normalization"] = cross
    return summary


# -- emitters ----------------------------------------------------------------

def _pct(x):
    return f"{100.0 * x:.4f}"


def _metric(rep, name, averaging="macro"):
    if name in ("accuracy", "cohen_kappa", "mcc"):
        return getattr(rep, name)
    return getattr(rep, f"{averaging}_{name}")


def _mean_metric(report, regime, variant, condition, name, averaging="macro"):
    vals = [_metric(report.cells[cell_key(regime, variant, condition, s)], name, averaging)
            for s in report.seeds()]
    return _mean(vals)


def _write_table(path, header, rows):
    lines = [",".join(header)] + [",".join(r) for r in rows]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def figure_tables(report):
    """Per-figure tables as {name: (header, rows)}; figures lacking cells are omitted."""
    tables = {}
    conds = [c for c in CONDITIONS]

    def ok(*triples):
        return all(report.has(*t) for t in triples)

    if ok(*[("normalized", "FNN", c) for c in conds]):
        tables["fig4"] = (["dataset", "accuracy_pct"],
                          [[FIGURE_DATASETS[c], _pct(_mean_metric(report, "normalized", "FNN", c,
                                                                  "accuracy"))] for c in conds])
    if ok(("normalized", "FNN", "clean"), ("normalized", "SNN", "clean")):
        for averaging, name in (("macro", "fig5"), ("weighted", "fig5_weighted")):
            tables[name] = (["metric", "FNN", "SNN"], [
                [label] + [_pct(_mean_metric(report, "normalized", v, "clean", m, averaging))
                           for v in ("FNN", "SNN")]
                for label, m in FIG5_METRICS])
    if ok(*[("normalized", v, c) for v in ("FNN", "SNN") for c in conds]):
        tables["fig6"] = (["dataset", "FNN", "SNN"], [
            [FIGURE_DATASETS[c]] + [_pct(_mean_metric(report, "normalized", v, c, "accuracy"))
                                    for v in ("FNN", "SNN")] for c in conds])
    for fig, v in (("fig7", "FNN"), ("fig8", "SNN")):
        if ok(*[(r, v, c) for r in REGIMES for c in conds]):
            tables[fig] = (["dataset", "Normalized", "Raw Input"], [
                [FIGURE_DATASETS[c]] + [_pct(_mean_metric(report, r, v, c, "accuracy"))
                                        for r in REGIMES] for c in conds])
    if ok(*[(r, v, "clean") for r in REGIMES for v in ("FNN", "SNN")]):
        tables["fig9"] = (
            ["metric", "FNN Normalized", "FNN Raw Input", "SNN Normalized", "SNN Raw Input"],
            [[label] + [_pct(_mean_metric(report, r, v, "clean", m))
                        for v in ("FNN", "SNN") for r in REGIMES]
             for label, m in FIG5_METRICS])
    return tables


GRID_COLUMNS = ("regime", "variant", "condition", "seed", "accuracy", "macro_precision",
                "macro_recall", "macro_f1", "weighted_precision", "weighted_recall",
                "weighted_f1", "cohen_kappa", "mcc")


def _grid_order(key):
    regime, variant, cond, seed = parse_cell_key(key)
    return regime, variant, CONDITIONS.index(cond), seed


def emit(report, fmt, out_dir):
    """Write ``report`` in one format under ``out_dir``; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        path = out / "report.json"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.to_json())
        return [path]
    if fmt == "csv-grid":
        rows = []
        for key in sorted(report.cells, key=_grid_order):
            regime, variant, cond, seed = parse_cell_key(key)
            rep = report.cells[key]
            rows.append([regime, variant, cond, str(seed)] + [
                repr(float(getattr(rep, c))) for c in GRID_COLUMNS[4:]])
        path = out / "grid.csv"
        _write_table(path, GRID_COLUMNS, rows)
        return [path]
    if fmt == "plot-data":
        fig_dir = out / "figures"
        fig_dir.mkdir(parents=True, exist_ok=True)
        paths = []
        for name, (header, rows) in sorted(figure_tables(report).items()):
            path = fig_dir / f"{name}.csv"
            _write_table(path, header, rows)
            paths.append(path)
        return paths
    raise ConfigError(f"unknown emit format {fmt!r}")


def direction_suite(report):
    """Evaluate the desk-scale direction checks on a normalized+raw report.

    Returns {name: (passed, detail)}; each check is a majority vote over seeds.
    """
    share = report.majority_share.get("test", float("nan"))
    acc = {}
    for r in REGIMES:
        for v in neuralnet.VARIANTS:
            for c in CONDITIONS:
                if report.has(r, v, c):
                    acc[r, v, c] = report.accuracy(r, v, c)

    def majority(flags):
        flags = list(flags)
        return sum(flags) * 2 > len(flags), f"{sum(flags)}/{len(flags)} seeds"

    checks = {}
    fnn_clean = acc["normalized", "FNN", "clean"]
    checks["a: FNN normalized clean >= 0.90"] = majority(a >= 0.90 for a in fnn_clean)
    for v in neuralnet.VARIANTS:
        for m in atk.ATTACKS:
            checks[f"b: {v} {m} drop >= 20 points"] = majority(
                c - a >= 0.20 for c, a in zip(acc["normalized", v, "clean"],
                                              acc["normalized", v, m]))
        checks[f"c: {v} BIM <= FGSM"] = majority(
            b <= f for b, f in zip(acc["normalized", v, "BIM"], acc["normalized", v, "FGSM"]))
    for m in atk.ATTACKS:
        checks[f"d: SNN {m} >= FNN {m}"] = majority(
            s >= f for s, f in zip(acc["normalized", "SNN", m], acc["normalized", "FNN", m]))
    checks["e: FNN clean >= SNN clean"] = majority(
        f >= s for f, s in zip(fnn_clean, acc["normalized", "SNN", "clean"]))
    for v in neuralnet.VARIANTS:
        raw_clean = acc["raw", v, "clean"]
        checks[f"f: {v} raw clean within 10 points of majority share"] = majority(
            abs(a - share) <= 0.10 for a in raw_clean)
        for m in atk.ATTACKS:
            checks[f"f: {v} raw {m} within 5 points of raw clean"] = majority(
                abs(c - a) <= 0.05 for c, a in zip(raw_clean, acc["raw", v, m]))
    return checks


__all__ = ["ExperimentConfig", "ExperimentReport", "run", "compare", "emit", "prepare_data",
           "run_train", "run_attacks", "run_evaluate", "direction_suite"]
