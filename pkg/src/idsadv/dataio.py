"""Dataset ingestion, label encoding, min-max normalization, stratified
sampling and synthetic BoT-IoT-style data generation."""
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import (
    ConstantFeatureWarning,
    DimensionMismatch,
    EmptyDataset,
    FractionOutOfRange,
    InvalidSpec,
    LabelOutOfRange,
    LabelOutOfVocabulary,
    MissingColumn,
    NonFiniteInput,
)

logger = logging.getLogger(__name__)

# pkSeqID is a row identifier and is never a model input
BOTIOT_FEATURES = (
    "Stime", "Seq", "Mean", "Stddev", "Min", "Max", "Srate", "Drate",
    "N_IN_Conn_P_SrcIP", "N_IN_Conn_P_DstIP",
)
BOTIOT_CLASSES = ("DDoS", "DoS", "Reconnaissance", "Normal", "Theft")
IDENTIFIER_FEATURES = ("Stime", "Seq")
LABEL_COLUMN = "category"


@dataclass(frozen=True)
class FeatureSchema:
    names: tuple
    label_column: str = LABEL_COLUMN
    class_names: tuple = BOTIOT_CLASSES

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if not self.names or any(not n for n in self.names):
            raise InvalidSpec("feature names must be non-empty")
        if len(set(self.names)) != len(self.names):
            raise InvalidSpec("feature names must be unique")
        if len(self.class_names) < 2:
            raise InvalidSpec("need at least two classes")
        if len(set(self.class_names)) != len(self.class_names):
            raise InvalidSpec("class names must be unique")
        if self.label_column in self.names:
            raise InvalidSpec("label column cannot also be a feature")

    @classmethod
    def botiot(cls, exclude_identifiers=False):
        names = BOTIOT_FEATURES
        if exclude_identifiers:
            names = tuple(n for n in names if n not in IDENTIFIER_FEATURES)
        return cls(names)

    @property
    def num_classes(self):
        return len(self.class_names)

    def to_dict(self):
        return {"names": list(self.names), "label_column": self.label_column,
                "class_names": list(self.class_names)}


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable feature matrix plus integer labels.

    ``rejected_rows`` counts input rows dropped during ingestion because of
    unparseable numbers or unknown labels.
    """

    features: np.ndarray
    labels: np.ndarray
    schema: FeatureSchema
    normalized: bool = False
    rejected_rows: int = 0

    def __post_init__(self):
        x = np.array(self.features, dtype=np.float64, copy=True)
        y = np.array(self.labels, dtype=np.int64, copy=True)
        if x.ndim != 2:
            raise DimensionMismatch(f"features must be 2-D, got shape {x.shape}")
        if x.shape[1] != len(self.schema.names):
            raise DimensionMismatch(
                f"{x.shape[1]} feature columns but schema names {len(self.schema.names)}")
        if y.shape != (x.shape[0],):
            raise DimensionMismatch("labels must be a vector with one entry per row")
        if y.size and (y.min() < 0 or y.max() >= self.schema.num_classes):
            raise LabelOutOfRange("label index outside 0..K-1")
        if not np.all(np.isfinite(x)):
            raise NonFiniteInput("features contain NaN or Inf")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def d(self):
        return self.features.shape[1]

    @property
    def k(self):
        return self.schema.num_classes

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.k)

    def take(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.schema, self.normalized)

    def with_features(self, features, normalized=None):
        return Dataset(features, self.labels, self.schema,
                       self.normalized if normalized is None else normalized)

    def select(self, names):
        """Restrict to a subset of feature columns, in the given order."""
        cols = [self.schema.names.index(n) for n in names]
        schema = FeatureSchema(tuple(names), self.schema.label_column, self.schema.class_names)
        return Dataset(self.features[:, cols], self.labels, schema, self.normalized)

    def equals(self, other, atol=0.0):
        return (self.schema == other.schema
                and self.normalized == other.normalized
                and np.array_equal(self.labels, other.labels)
                and self.features.shape == other.features.shape
                and np.allclose(self.features, other.features, rtol=0.0, atol=atol))

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.features).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return {
            "n": int(self.n),
            "class_counts": {c: int(v) for c, v in zip(self.schema.class_names, self.class_counts())},
            "sha256": h.hexdigest(),
        }


@dataclass(frozen=True)
class FeatureStats:
    min: np.ndarray
    max: np.ndarray
    n: int

    def __post_init__(self):
        lo = np.asarray(self.min, dtype=np.float64)
        hi = np.asarray(self.max, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise DimensionMismatch("min and max must be vectors of equal length")
        if np.any(lo > hi):
            raise InvalidSpec("min exceeds max for some feature")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def span(self):
        return self.max - self.min

    def to_json(self):
        return json.dumps({"min": self.min.tolist(), "max": self.max.tolist(), "n": int(self.n)})

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(np.array(doc["min"], dtype=np.float64), np.array(doc["max"], dtype=np.float64),
                   int(doc["n"]))


def _match_columns(header, wanted):
    """Map wanted names onto header names; exact match first, then case-insensitive."""
    lowered = {h.lower(): h for h in header}
    out = {}
    for name in wanted:
        if name in header:
            out[name] = name
        elif name.lower() in lowered:
            out[name] = lowered[name.lower()]
        else:
            raise MissingColumn(name)
    return out


def _to_float(text):
    try:
        return float(text)
    except ValueError:
        return np.nan


def _parse_numeric(col):
    """Exact string-to-float conversion; unparseable cells become NaN.

    pd.to_numeric can be off by one ulp, which breaks CSV round trips.
    """
    values = col.str.strip().to_numpy(dtype=object)
    try:
        return values.astype(np.float64)
    except ValueError:
        return np.array([_to_float(v) for v in values], dtype=np.float64)


def load_csv(path, schema, strict=False):
    """Read a comma-separated flow file into a Dataset.

    Feature columns are reordered to follow ``schema.names``. Rows with
    unparseable numbers or unknown labels are dropped and counted in
    ``Dataset.rejected_rows``; with ``strict=True`` an unknown label raises
    ``LabelOutOfVocabulary`` instead.
    """
    header = pd.read_csv(path, nrows=0, encoding="utf-8").columns.tolist()
    cols = _match_columns(header, list(schema.names) + [schema.label_column])
    frame = pd.read_csv(path, usecols=list(cols.values()), dtype=str,
                        keep_default_na=False, encoding="utf-8")
    if frame.empty:
        raise EmptyDataset(f"{path}: no data rows")

    numeric = np.column_stack([_parse_numeric(frame[cols[n]]) for n in schema.names])
    lookup = {c: i for i, c in enumerate(schema.class_names)}
    raw_labels = frame[cols[schema.label_column]].str.strip()
    labels = raw_labels.map(lookup)

    unknown = labels.isna().to_numpy()
    if strict and unknown.any():
        row = int(np.flatnonzero(unknown)[0])
        raise LabelOutOfVocabulary(raw_labels.iloc[row], row)
    bad_numeric = ~np.all(np.isfinite(numeric), axis=1)
    keep = ~(unknown | bad_numeric)
    rejected = int((~keep).sum())
    if rejected:
        logger.warning("%s: rejected %d rows (%d unknown labels, %d bad numeric)",
                       path, rejected, int(unknown.sum()), int(bad_numeric.sum()))
    if not keep.any():
        raise EmptyDataset(f"{path}: every row was rejected")
    return Dataset(numeric[keep], labels.to_numpy()[keep].astype(np.int64), schema,
                   normalized=False, rejected_rows=rejected)


def write_csv(ds, path):
    frame = pd.DataFrame(ds.features, columns=list(ds.schema.names))
    frame[ds.schema.label_column] = np.asarray(ds.schema.class_names, dtype=object)[ds.labels]
    # float_format=None writes shortest round-trip repr
    frame.to_csv(path, index=False, lineterminator="\n", encoding="utf-8")


def fit_normalizer(train):
    if train.n < 2:
        raise EmptyDataset("need at least two training rows to fit a normalizer")
    lo = train.features.min(axis=0)
    hi = train.features.max(axis=0)
    for j in np.flatnonzero(lo == hi):
        warnings.warn(f"feature {train.schema.names[j]!r} (column {j}) is constant",
                      ConstantFeatureWarning, stacklevel=2)
    return FeatureStats(lo, hi, train.n)


def apply_normalization(ds, stats):
    """Min-max scale into [0, 1] with training stats; out-of-range values clamp,
    constant features map to 0."""
    if ds.d != stats.min.shape[0]:
        raise DimensionMismatch(f"dataset has {ds.d} features, stats have {stats.min.shape[0]}")
    span = stats.span
    safe = np.where(span > 0, span, 1.0)
    x = (ds.features - stats.min) / safe
    x = np.where(span > 0, np.clip(x, 0.0, 1.0), 0.0)
    return ds.with_features(x, normalized=True)


def clamp_to_range(ds, stats):
    """Clamp raw features into the training [min, max] box without rescaling."""
    if ds.d != stats.min.shape[0]:
        raise DimensionMismatch(f"dataset has {ds.d} features, stats have {stats.min.shape[0]}")
    return ds.with_features(np.clip(ds.features, stats.min, stats.max))


def encode_one_hot(labels, k):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise LabelOutOfRange(f"labels must lie in 0..{k - 1}")
    out = np.zeros((labels.shape[0], k), dtype=np.float64)
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def stratified_subsample(ds, fraction, seed):
    """Keep ceil(fraction * count) rows of every class, chosen at random.

    Rows keep their original relative order.
    """
    if not 0.0 < fraction <= 1.0:
        raise FractionOutOfRange(f"fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    chosen = []
    for c in range(ds.k):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size == 0:
            continue
        m = math.ceil(fraction * idx.size)
        chosen.append(rng.choice(idx, size=m, replace=False))
    return ds.take(np.sort(np.concatenate(chosen)))


def stratified_split(ds, holdout_fraction, seed):
    """Split into (kept, held_out) with per-class held-out share ``holdout_fraction``.

    Every class with at least two rows contributes at least one row to each side.
    """
    if not 0.0 < holdout_fraction < 1.0:
        raise FractionOutOfRange(f"holdout fraction must be in (0, 1), got {holdout_fraction}")
    rng = np.random.default_rng(seed)
    keep, hold = [], []
    for c in range(ds.k):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size == 0:
            continue
        idx = rng.permutation(idx)
        m = int(round(holdout_fraction * idx.size))
        if idx.size >= 2:
            m = min(max(m, 1), idx.size - 1)
        hold.append(idx[:m])
        keep.append(idx[m:])
    return ds.take(np.sort(np.concatenate(keep))), ds.take(np.sort(np.concatenate(hold)))


@dataclass
class SyntheticSpec:
    """Per-class Gaussian (or log-normal) feature generator.

    ``loc`` and ``scale`` are [K x D]; for features flagged in ``lognormal``
    they parameterize the log of the value.
    """

    class_names: tuple
    counts: tuple
    loc: np.ndarray
    scale: np.ndarray
    seed: int = 0
    feature_names: tuple = BOTIOT_FEATURES
    lognormal: tuple = field(default=None)

    def __post_init__(self):
        self.class_names = tuple(self.class_names)
        self.counts = tuple(int(c) for c in self.counts)
        self.feature_names = tuple(self.feature_names)
        self.loc = np.asarray(self.loc, dtype=np.float64)
        self.scale = np.asarray(self.scale, dtype=np.float64)
        if self.lognormal is None:
            self.lognormal = (False,) * len(self.feature_names)
        self.lognormal = tuple(bool(v) for v in self.lognormal)
        self.validate()

    def validate(self):
        k, d = len(self.class_names), len(self.feature_names)
        if len(self.counts) != k:
            raise InvalidSpec("one count per class required")
        if any(c <= 0 for c in self.counts):
            raise InvalidSpec("class counts must be positive")
        if self.loc.shape != (k, d) or self.scale.shape != (k, d):
            raise InvalidSpec(f"loc and scale must have shape ({k}, {d})")
        if not np.all(self.scale > 0):
            raise InvalidSpec("scale parameters must be positive")
        if not (np.all(np.isfinite(self.loc)) and np.all(np.isfinite(self.scale))):
            raise InvalidSpec("loc and scale must be finite")
        if len(self.lognormal) != d:
            raise InvalidSpec("one lognormal flag per feature required")
        if self.seed < 0:
            raise InvalidSpec("seed must be non-negative")
        FeatureSchema(self.feature_names, LABEL_COLUMN, self.class_names)

    @property
    def schema(self):
        return FeatureSchema(self.feature_names, LABEL_COLUMN, self.class_names)

    def to_dict(self):
        return {
            "class_names": list(self.class_names),
            "counts": list(self.counts),
            "feature_names": list(self.feature_names),
            "lognormal": list(self.lognormal),
            "loc": self.loc.tolist(),
            "scale": self.scale.tolist(),
            "seed": int(self.seed),
        }

    @classmethod
    def from_dict(cls, doc):
        allowed = {"class_names", "counts", "feature_names", "lognormal", "loc", "scale", "seed",
                   "description"}
        unknown = set(doc) - allowed
        if unknown:
            raise InvalidSpec(f"unknown synthetic spec keys: {sorted(unknown)}")
        try:
            return cls(class_names=doc["class_names"], counts=doc["counts"], loc=doc["loc"],
                       scale=doc["scale"], seed=doc.get("seed", 0),
                       feature_names=doc.get("feature_names", BOTIOT_FEATURES),
                       lognormal=doc.get("lognormal"))
        except KeyError as exc:
            raise InvalidSpec(f"synthetic spec missing key {exc.args[0]!r}") from None


def generate_synthetic(spec):
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    blocks, labels = [], []
    for c, count in enumerate(spec.counts):
        z = rng.standard_normal((count, len(spec.feature_names)))
        blocks.append(spec.loc[c] + spec.scale[c] * z)
        labels.append(np.full(count, c, dtype=np.int64))
    x = np.vstack(blocks)
    logf = np.asarray(spec.lognormal)
    x[:, logf] = np.exp(x[:, logf])
    y = np.concatenate(labels)
    order = rng.permutation(y.size)
    return Dataset(x[order], y[order], spec.schema)


PRESETS = ("botiot-mini",)


def load_preset(name, seed=None):
    if name not in PRESETS:
        raise InvalidSpec(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    text = resources.files("idsadv.presets").joinpath(f"{name}.json").read_text(encoding="utf-8")
    spec = SyntheticSpec.from_dict(json.loads(text))
    if seed is not None:
        spec.seed = int(seed)
        spec.validate()
    return spec


def load_spec_file(path):
    return SyntheticSpec.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
