"""Embedding stores: synthetic generation, file ingestion, normalization,
query quantization, and per-dimension domain statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

ALLOWED_BITS = (2, 4, 8, 16, 32)
VARIANCE_FLOOR = 1e-6


class EmbeddingFormatError(ValueError):
    """Malformed embedding file; message carries the 1-based line number."""


def _as_float_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class SampleRecord:
    """One embedded sample: id, identity label, vector, target flag."""

    sample_id: str
    identity_label: str
    vector: np.ndarray
    contains_target: bool = False

    def __post_init__(self):
        vec = _as_float_vector(self.vector)
        if vec.size < 1:
            raise ValueError("empty vector")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"non-finite values in sample {self.sample_id!r}")
        object.__setattr__(self, "vector", vec)


@dataclass(eq=False)
class EmbeddingStore:
    dimension: int
    records: list[SampleRecord] = field(default_factory=list)

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        seen: set[str] = set()
        for rec in self.records:
            if rec.vector.size != self.dimension:
                raise ValueError(
                    f"sample {rec.sample_id!r} has dimension {rec.vector.size}, "
                    f"store declares {self.dimension}"
                )
            if rec.sample_id in seen:
                raise ValueError(f"duplicate sample_id {rec.sample_id!r}")
            seen.add(rec.sample_id)

    def identities(self) -> list[str]:
        return sorted({rec.identity_label for rec in self.records})

    def by_identity(self, label: str) -> list[SampleRecord]:
        return [rec for rec in self.records if rec.identity_label == label]


@dataclass(frozen=True)
class SyntheticGenConfig:
    num_identities: int
    samples_per_identity: int
    dimension: int
    intra_class_noise_sigma: float
    seed: int

    def __post_init__(self):
        if self.num_identities < 1:
            raise ValueError("num_identities must be >= 1")
        if self.samples_per_identity < 1:
            raise ValueError("samples_per_identity must be >= 1")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if not (self.intra_class_noise_sigma >= 0):
            raise ValueError("intra_class_noise_sigma must be >= 0")


@dataclass(frozen=True, eq=False)
class DomainStats:
    """Per-dimension mean and variance of a diagonal Gaussian fit."""

    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        mean = _as_float_vector(self.mean)
        var = _as_float_vector(self.variance)
        if mean.size != var.size:
            raise ValueError("mean and variance lengths differ")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(var))):
            raise ValueError("non-finite domain statistics")
        if np.any(var <= 0):
            raise ValueError("variance must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "variance", var)

    @property
    def dimension(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class QuantizationSpec:
    kept_dimensions: int
    bits_per_dimension: int

    def __post_init__(self):
        if self.kept_dimensions < 1:
            raise ValueError("kept_dimensions must be >= 1")
        if self.bits_per_dimension not in ALLOWED_BITS:
            raise ValueError(
                f"bits_per_dimension must be one of {ALLOWED_BITS}, "
                f"got {self.bits_per_dimension}"
            )

    @property
    def payload_bits(self) -> int:
        return self.kept_dimensions * self.bits_per_dimension


def unit_normalize(v) -> np.ndarray:
    """Scale v to Euclidean norm 1. Rejects zero and non-finite vectors."""
    vec = _as_float_vector(v)
    if not np.all(np.isfinite(vec)):
        raise ValueError("non-finite vector")
    norm = float(np.linalg.norm(vec))
    if norm == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return vec / norm


def generate_synthetic(config: SyntheticGenConfig) -> EmbeddingStore:
    """Draw a clustered store: one unit centroid per identity, samples =
    centroid + sigma * gaussian noise, re-normalized to the unit sphere.

    Deterministic for a given config (single seeded generator, fixed draw
    order). sigma = 0 returns each centroid verbatim for all its samples.
    """
    rng = np.random.default_rng(config.seed)
    sigma = config.intra_class_noise_sigma
    records = []
    for i in range(config.num_identities):
        label = f"id{i:03d}"
        centroid = unit_normalize(rng.standard_normal(config.dimension))
        for j in range(config.samples_per_identity):
            if sigma == 0.0:
                vec = centroid.copy()
            else:
                noise = rng.standard_normal(config.dimension)
                vec = unit_normalize(centroid + sigma * noise)
            records.append(SampleRecord(f"{label}-s{j:02d}", label, vec))
    return EmbeddingStore(config.dimension, records)


def quantize_query(v, spec: QuantizationSpec) -> np.ndarray:
    """Truncate to the first kept_dimensions coordinates (zero-filling the
    rest) and snap each kept coordinate to its cell midpoint in a uniform
    2^b-level mid-rise grid over [-1, 1]. b = 32 keeps native precision.

    Expects a unit-normalized input, so every entry lies in [-1, 1].
    """
    vec = _as_float_vector(v)
    d = spec.kept_dimensions
    if d > vec.size:
        raise ValueError(f"kept_dimensions {d} exceeds vector dimension {vec.size}")
    if np.any(np.abs(vec) > 1.0 + 1e-9):
        raise ValueError("entries outside [-1, 1]; quantize unit-normalized vectors")
    out = np.zeros_like(vec)
    kept = np.clip(vec[:d], -1.0, 1.0)
    if spec.bits_per_dimension == 32:
        out[:d] = kept
        return out
    levels = 2 ** spec.bits_per_dimension
    cell = 2.0 / levels
    idx = np.floor((kept + 1.0) / cell).astype(np.int64)
    np.clip(idx, 0, levels - 1, out=idx)
    out[:d] = -1.0 + cell * (idx + 0.5)
    return out


def fit_domain_stats(samples) -> DomainStats:
    """Per-dimension mean and unbiased variance, floored at VARIANCE_FLOOR."""
    mat = np.asarray([_as_float_vector(s) for s in samples], dtype=np.float64)
    if mat.shape[0] < 2:
        raise ValueError("need at least 2 samples to fit domain statistics")
    mean = mat.mean(axis=0)
    var = mat.var(axis=0, ddof=1)
    # floor keeps the closed-form KL finite on degenerate mini-batches
    var = np.maximum(var, VARIANCE_FLOOR)
    return DomainStats(mean, var)


def save_embeddings(store: EmbeddingStore, path) -> None:
    """Write the line-oriented text format: `dim=<D>` then one
    `<sample_id>,<identity_label>,<v1>,...,<vD>` row per record."""
    lines = [f"dim={store.dimension}"]
    for rec in store.records:
        for name in (rec.sample_id, rec.identity_label):
            if "," in name or "\n" in name:
                raise ValueError(f"id/label may not contain commas: {name!r}")
        values = ",".join(repr(float(x)) for x in rec.vector)
        lines.append(f"{rec.sample_id},{rec.identity_label},{values}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_embeddings(path) -> EmbeddingStore:
    """Parse the text format written by save_embeddings.

    Raises EmbeddingFormatError naming the 1-based offending line.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise EmbeddingFormatError("line 1: empty file, expected dim=<D> header")
    header = lines[0].strip()
    if not header.startswith("dim="):
        raise EmbeddingFormatError(f"line 1: expected dim=<D> header, got {header!r}")
    try:
        dimension = int(header[4:])
    except ValueError:
        raise EmbeddingFormatError(f"line 1: bad dimension {header[4:]!r}") from None
    if dimension < 1:
        raise EmbeddingFormatError(f"line 1: dimension must be >= 1, got {dimension}")

    records = []
    seen: set[str] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        parts = raw.split(",")
        if len(parts) != 2 + dimension:
            raise EmbeddingFormatError(
                f"line {lineno}: expected {2 + dimension} fields "
                f"(id, label, {dimension} values), got {len(parts)}"
            )
        sample_id, label = parts[0], parts[1]
        if sample_id in seen:
            raise EmbeddingFormatError(f"line {lineno}: duplicate sample_id {sample_id!r}")
        try:
            vec = np.array([float(x) for x in parts[2:]], dtype=np.float64)
        except ValueError:
            raise EmbeddingFormatError(f"line {lineno}: non-numeric value") from None
        if not np.all(np.isfinite(vec)):
            raise EmbeddingFormatError(f"line {lineno}: non-finite value")
        seen.add(sample_id)
        records.append(SampleRecord(sample_id, label, vec))
    if not records:
        raise EmbeddingFormatError("line 1: file declares a dimension but has no rows")
    return EmbeddingStore(dimension, records)


def expected_cosine_separation(store: EmbeddingStore, rng, num_pairs: int = 10_000):
    """Monte-Carlo estimate of (mean same-identity cosine, mean cross-identity
    cosine) over num_pairs random pairs each. Diagnostic for the separability
    of a generated store."""
    by_label = {label: store.by_identity(label) for label in store.identities()}
    labels = [lb for lb, recs in by_label.items() if len(recs) >= 2]
    if len(labels) < 2:
        raise ValueError("need >= 2 identities with >= 2 samples each")
    same = np.empty(num_pairs)
    cross = np.empty(num_pairs)
    all_labels = list(by_label)
    for n in range(num_pairs):
        lb = labels[rng.integers(len(labels))]
        recs = by_label[lb]
        i, j = rng.choice(len(recs), size=2, replace=False)
        same[n] = float(recs[i].vector @ recs[j].vector)
        la, lc = rng.choice(len(all_labels), size=2, replace=False)
        ra = by_label[all_labels[la]]
        rc = by_label[all_labels[lc]]
        va = ra[rng.integers(len(ra))].vector
        vc = rc[rng.integers(len(rc))].vector
        cross[n] = float(va @ vc)
    return float(same.mean()), float(cross.mean())
