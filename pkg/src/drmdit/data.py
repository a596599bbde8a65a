"""Dataset ingestion, normalization, skew filtering, splits, and the
synthetic near/far anomaly generator.

CSV handling is deliberately strict: header required, selected columns must
parse as floats, rows with non-finite values are dropped (and counted), and
row order is preserved so score traces line up with source rows.
"""
from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ParameterError
from .robust import MAD_FLOOR

SKEW_CUTOFF_MADS = 6.0  # about 4 sigma for Gaussian columns
MAX_SKEW_DROP_FRACTION = 0.10
DEFAULT_NORMAL_VALUES = ("Benign", "BENIGN", "benign", "normal", "Normal", "0")


@dataclass
class FeatureMatrix:
    """N x d feature table with optional binary labels and an optional
    record of the training min-max transform that produced it."""

    features: np.ndarray
    labels: np.ndarray | None = None
    feature_names: list = field(default_factory=list)
    normalization: list | None = None  # per-feature (min, max) from TRAINING data
    tags: np.ndarray | None = None  # synthetic near/far provenance

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64)
            if self.labels.shape[0] != self.features.shape[0]:
                raise ParameterError("labels length does not match feature rows")

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def take(self, idx):
        return FeatureMatrix(
            features=self.features[idx],
            labels=None if self.labels is None else self.labels[idx],
            feature_names=list(self.feature_names),
            normalization=self.normalization,
            tags=None if self.tags is None else self.tags[idx],
        )


def load_csv(path, label_column=None, columns=None,
             normal_values=DEFAULT_NORMAL_VALUES):
    """Read a headered CSV into a raw (unnormalized) FeatureMatrix.

    Rows with unparseable or non-finite selected values are dropped; the
    drop count is returned alongside. Label values in normal_values map to
    0, everything else to 1.

    Returns (FeatureMatrix, dropped_count).
    """
    if not os.path.exists(path):
        raise DataError(f"no such file: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file (missing header)") from None
        header = [h.strip() for h in header]
        if columns is None:
            # "tag" is the provenance column save_csv writes; never a feature
            feature_names = [h for h in header if h not in (label_column, "tag")]
        else:
            missing = [c for c in columns if c not in header]
            if missing:
                raise DataError(f"{path}: missing columns {missing}")
            feature_names = list(columns)
        if label_column is not None and label_column not in header:
            raise DataError(f"{path}: missing label column {label_column!r}")
        feat_idx = [header.index(c) for c in feature_names]
        label_idx = header.index(label_column) if label_column else None

        rows, labels, dropped = [], [], 0
        normal_set = set(normal_values)
        for raw in reader:
            if not raw:
                continue
            try:
                vals = [float(raw[i]) for i in feat_idx]
            except (ValueError, IndexError):
                dropped += 1
                continue
            if not all(np.isfinite(vals)):
                dropped += 1
                continue
            rows.append(vals)
            if label_idx is not None:
                labels.append(0 if raw[label_idx].strip() in normal_set else 1)
    if not rows:
        raise DataError(f"{path}: no usable rows")
    return FeatureMatrix(
        features=np.asarray(rows, dtype=np.float64),
        labels=np.asarray(labels, dtype=np.int64) if label_idx is not None else None,
        feature_names=feature_names,
    ), dropped


def save_csv(data: FeatureMatrix, path, label_column="label"):
    """Write a FeatureMatrix back out as a headered CSV."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        names = data.feature_names or [f"f{j}" for j in range(data.n_features)]
        header = list(names)
        if data.labels is not None:
            header.append(label_column)
        if data.tags is not None:
            header.append("tag")
        writer.writerow(header)
        for i in range(data.n_rows):
            row = [repr(float(v)) for v in data.features[i]]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            if data.tags is not None:
                row.append(str(data.tags[i]))
            writer.writerow(row)


def fit_minmax(train: FeatureMatrix):
    """Per-feature (min, max) record from training data."""
    if train.n_rows == 0:
        raise ParameterError("cannot fit min-max on empty data")
    lo = train.features.min(axis=0)
    hi = train.features.max(axis=0)
    return [(float(a), float(b)) for a, b in zip(lo, hi)]


def apply_minmax(data: FeatureMatrix, record, clamp=False) -> FeatureMatrix:
    """(x - min) / (max - min) with the TRAINING record.

    Constant training features map to 0. Test values outside the training
    range extrapolate beyond [0, 1] unless clamp is set.
    """
    if len(record) != data.n_features:
        raise ParameterError(
            f"normalization record has {len(record)} features, data has {data.n_features}"
        )
    lo = np.array([r[0] for r in record])
    hi = np.array([r[1] for r in record])
    span = hi - lo
    out = np.zeros_like(data.features)
    nonconst = span > 0
    out[:, nonconst] = (data.features[:, nonconst] - lo[nonconst]) / span[nonconst]
    if clamp:
        out = np.clip(out, 0.0, 1.0)
    return FeatureMatrix(features=out, labels=data.labels,
                         feature_names=list(data.feature_names),
                         normalization=list(record), tags=data.tags)


def skew_filter(train: FeatureMatrix):
    """Drop rows with any feature outside median +/- 6*MAD.

    Never removes more than 10% of rows: if the cutoff would, it widens to
    the exact 10%-drop quantile of the per-row exceedance. Returns
    (filtered FeatureMatrix, dropped_count, widened_flag).
    """
    x = train.features
    if x.shape[0] < 10:
        raise ParameterError(f"skew_filter needs >= 10 rows, got {x.shape[0]}")
    med = np.median(x, axis=0)
    mads = np.maximum(np.median(np.abs(x - med), axis=0), MAD_FLOOR)
    exceed = np.max(np.abs(x - med) / mads, axis=1)  # worst feature per row
    keep = exceed <= SKEW_CUTOFF_MADS
    widened = False
    max_drop = int(np.floor(MAX_SKEW_DROP_FRACTION * x.shape[0]))
    if (~keep).sum() > max_drop:
        widened = True
        cutoff = np.sort(exceed)[x.shape[0] - max_drop - 1]
        keep = exceed <= cutoff
    return train.take(np.nonzero(keep)[0]), int((~keep).sum()), widened


@dataclass(frozen=True)
class SynthSpec:
    """Correlated-Gaussian normals plus displaced near/far anomalies."""

    n_normal: int = 2000
    n_near: int = 250
    n_far: int = 250
    d: int = 10
    rho: float = 0.7
    near_offset: float = 1.5  # along the correlation structure's minor axis
    far_offset: float = 8.0  # isotropic
    seed: int = 42

    def validate(self):
        if self.d < 2:
            raise ParameterError("synthetic generator needs d >= 2 for correlation")
        if min(self.n_normal, self.n_near, self.n_far) < 0:
            raise ParameterError("counts must be non-negative")
        if self.near_offset <= 0 or self.far_offset <= 0:
            raise ParameterError("offsets must be positive")
        if not -1.0 < self.rho < 1.0:
            raise ParameterError(f"rho {self.rho} must lie in (-1, 1)")


def synth_generate(spec: SynthSpec) -> FeatureMatrix:
    """Deterministic synthetic benchmark.

    Normals are zero-mean unit-variance Gaussians with serial correlation
    rho (cov[i, j] = rho^|i-j|), which has a unique minor axis (the
    smallest-eigenvalue eigenvector). Offsets are per feature coordinate:
    an offset of c means c feature-sigmas in every dimension, a vector of
    length c*sqrt(d). Near anomalies are displaced near_offset along the
    minor axis (random sign), breaking the correlation structure while
    staying inside the normals' Euclidean distance range. Far anomalies
    are displaced far_offset along a random isotropic direction, far
    outside that range.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    d = spec.d
    idx = np.arange(d)
    cov = spec.rho ** np.abs(idx[:, None] - idx[None, :])
    chol = np.linalg.cholesky(cov)
    eigvals, eigvecs = np.linalg.eigh(cov)
    minor_axis = eigvecs[:, 0]  # smallest-eigenvalue direction

    def draw(n):
        return rng.standard_normal((n, d)) @ chol.T

    normals = draw(spec.n_normal)

    near = draw(spec.n_near)
    if spec.n_near:
        signs = rng.choice([-1.0, 1.0], size=spec.n_near)
        near += spec.near_offset * np.sqrt(d - 1) * np.outer(signs, minor_axis)

    far = draw(spec.n_far)
    if spec.n_far:
        raw = rng.standard_normal((spec.n_far, d))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        far += spec.far_offset * np.sqrt(d) * raw

    features = np.vstack([normals, near, far])
    labels = np.concatenate([
        np.zeros(spec.n_normal, dtype=np.int64),
        np.ones(spec.n_near + spec.n_far, dtype=np.int64),
    ])
    tags = np.concatenate([
        np.full(spec.n_normal, "normal"),
        np.full(spec.n_near, "near"),
        np.full(spec.n_far, "far"),
    ])
    return FeatureMatrix(features=features, labels=labels,
                         feature_names=[f"f{j}" for j in range(d)], tags=tags)


def split(data: FeatureMatrix, train_fraction, seed=42):
    """Seed-deterministic (train, validation, test) split.

    Validation and test share the remainder equally. Stratified by label
    when labels are present.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError(f"train_fraction must be in (0,1), got {train_fraction}")
    n = data.n_rows
    rng = np.random.default_rng(seed)

    def partition(indices):
        indices = rng.permutation(indices)
        n_tr = int(round(train_fraction * indices.size))
        n_val = (indices.size - n_tr) // 2
        return (indices[:n_tr], indices[n_tr:n_tr + n_val], indices[n_tr + n_val:])

    if data.labels is None:
        tr, va, te = partition(np.arange(n))
    else:
        parts = ([], [], [])
        for lab in np.unique(data.labels):
            for bucket, chunk in zip(parts, partition(np.nonzero(data.labels == lab)[0])):
                bucket.append(chunk)
        tr, va, te = (np.concatenate(b) for b in parts)
    if min(tr.size, va.size, te.size) < 1:
        raise ParameterError(
            f"{n} rows cannot support a {train_fraction:.2f} train split"
        )
    return data.take(np.sort(tr)), data.take(np.sort(va)), data.take(np.sort(te))
