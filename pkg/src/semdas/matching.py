"""Semantic matching techniques: similarity scoring in the shared embedding
space, distribution-level domain matching, and the two model-selection
rankers (expert gateway, server polling)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import DomainStats, _as_float_vector

SCORE_MODES = ("cosine", "dot")


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.size != b.size:
        raise ValueError(f"dimension mismatch: {a.size} vs {b.size}")


def cosine_score(query, key) -> float:
    """Cosine similarity in [-1, 1]. Rejects zero vectors."""
    q = _as_float_vector(query)
    k = _as_float_vector(key)
    _check_same_dim(q, k)
    qn = float(np.linalg.norm(q))
    kn = float(np.linalg.norm(k))
    if qn == 0.0 or kn == 0.0:
        raise ValueError("cosine score undefined for the zero vector")
    value = float(q @ k) / (qn * kn)
    # clamp float drift so the [-1, 1] contract holds exactly
    return min(1.0, max(-1.0, value))


def dot_score(query, key) -> float:
    """Plain inner product. Zero vectors allowed (score 0)."""
    q = _as_float_vector(query)
    k = _as_float_vector(key)
    _check_same_dim(q, k)
    return float(q @ k)


def score(query, key, mode: str = "cosine") -> float:
    if mode == "cosine":
        return cosine_score(query, key)
    if mode == "dot":
        return dot_score(query, key)
    raise ValueError(f"unknown score mode {mode!r}, expected one of {SCORE_MODES}")


def kl_gaussian(p: DomainStats, q: DomainStats) -> float:
    """Closed-form KL(p || q) between diagonal Gaussians.

    Sum over dimensions of 0.5 * (ln(vq/vp) + (vp + (mp-mq)^2)/vq - 1).
    Non-negative; zero iff p == q. Not symmetric.
    """
    if p.dimension != q.dimension:
        raise ValueError(f"dimension mismatch: {p.dimension} vs {q.dimension}")
    vp, vq = p.variance, q.variance
    dm = p.mean - q.mean
    terms = 0.5 * (np.log(vq / vp) + (vp + dm * dm) / vq - 1.0)
    return float(np.sum(terms))


def domain_match_score(p: DomainStats, q: DomainStats) -> float:
    """Negated KL, so higher = better match like every other score here."""
    return -kl_gaussian(p, q)


@dataclass(frozen=True, eq=False)
class ExpertModel:
    """Rank-r linear autoencoder: an affine subspace (mean + orthonormal
    basis rows) fitted to one expert's training data."""

    expert_id: str
    subspace_basis: np.ndarray  # shape (r, D), orthonormal rows
    training_mean: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.subspace_basis, dtype=np.float64)
        mean = _as_float_vector(self.training_mean)
        if basis.ndim != 2:
            raise ValueError(f"basis must be 2-D (r, D), got shape {basis.shape}")
        r, dim = basis.shape
        if not (1 <= r < dim):
            raise ValueError(f"need 1 <= r < D, got r={r}, D={dim}")
        if mean.size != dim:
            raise ValueError("training_mean dimension does not match basis")
        gram = basis @ basis.T
        if np.max(np.abs(gram - np.eye(r))) > 1e-8:
            raise ValueError("basis rows are not orthonormal within 1e-8")
        object.__setattr__(self, "subspace_basis", basis)
        object.__setattr__(self, "training_mean", mean)

    @property
    def rank(self) -> int:
        return self.subspace_basis.shape[0]

    @property
    def dimension(self) -> int:
        return self.subspace_basis.shape[1]


def fit_expert(samples, r: int, expert_id: str = "expert") -> ExpertModel:
    """PCA fit: mean + top-r principal directions of the centered samples.

    Needs at least r + 1 samples and r < D. Basis sign is fixed by making
    the first nonzero component of each direction positive, so refits are
    bit-identical.
    """
    mat = np.asarray([_as_float_vector(s) for s in samples], dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("need at least one sample")
    n, dim = mat.shape
    if r >= dim:
        raise ValueError(f"rank r={r} must be < dimension {dim}")
    if r < 1:
        raise ValueError("rank r must be >= 1")
    if n < r + 1:
        raise ValueError(f"need at least {r + 1} samples to fit rank {r}, got {n}")
    mean = mat.mean(axis=0)
    centered = mat - mean
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    basis = vt[:r].copy()
    for row in basis:
        nz = np.nonzero(np.abs(row) > 1e-12)[0]
        if nz.size and row[nz[0]] < 0:
            row *= -1.0
    return ExpertModel(expert_id, basis, mean)


def reconstruction_errors(model: ExpertModel, samples) -> np.ndarray:
    """Squared residual of each sample off the expert's affine subspace."""
    mat = np.asarray([_as_float_vector(s) for s in samples], dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("need at least one sample")
    if mat.shape[1] != model.dimension:
        raise ValueError(
            f"dimension mismatch: samples {mat.shape[1]}, expert {model.dimension}"
        )
    centered = mat - model.training_mean
    coords = centered @ model.subspace_basis.T
    resid = centered - coords @ model.subspace_basis
    return np.sum(resid * resid, axis=1)


def expert_gateway_rank(test_samples, experts) -> list[tuple[str, float]]:
    """Rank experts by ascending mean reconstruction error on the test
    samples; ties broken by expert_id. First element is the match."""
    experts = list(experts)
    if not experts:
        raise ValueError("empty expert list")
    ids = [e.expert_id for e in experts]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate expert_id")
    scored = [
        (e.expert_id, float(np.mean(reconstruction_errors(e, test_samples))))
        for e in experts
    ]
    scored.sort(key=lambda pair: (pair[1], pair[0]))
    return scored


@dataclass(frozen=True, eq=False)
class PolledModel:
    """Nearest-centroid classifier polled for its confidence: one labeled
    centroid per class plus a softmax temperature."""

    model_id: str
    class_centroids: dict
    temperature: float

    def __post_init__(self):
        if len(self.class_centroids) < 2:
            raise ValueError("need at least 2 class centroids")
        if not (self.temperature > 0):
            raise ValueError("temperature must be > 0")
        cents = {}
        dim = None
        for label, c in self.class_centroids.items():
            vec = _as_float_vector(c)
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ValueError("centroid dimensions differ")
            cents[str(label)] = vec
        object.__setattr__(self, "class_centroids", cents)

    @property
    def dimension(self) -> int:
        return next(iter(self.class_centroids.values())).size


def poll_confidences(model: PolledModel, samples) -> np.ndarray:
    """Max-softmax confidence per sample, logits = -||x - c||^2 / T."""
    mat = np.asarray([_as_float_vector(s) for s in samples], dtype=np.float64)
    if mat.ndim != 2:
        raise ValueError("need at least one sample")
    if mat.shape[1] != model.dimension:
        raise ValueError(
            f"dimension mismatch: samples {mat.shape[1]}, model {model.dimension}"
        )
    cents = np.asarray(list(model.class_centroids.values()))
    diff = mat[:, None, :] - cents[None, :, :]
    logits = -np.sum(diff * diff, axis=2) / model.temperature
    # softmax max, computed stably: 1 / sum(exp(logit - max))
    shifted = logits - logits.max(axis=1, keepdims=True)
    return 1.0 / np.sum(np.exp(shifted), axis=1)


def server_poll_rank(test_samples, models) -> list[tuple[str, float]]:
    """Rank polled models by descending mean confidence on the test samples;
    ties broken by model_id. First element is the match."""
    models = list(models)
    if not models:
        raise ValueError("empty model list")
    ids = [m.model_id for m in models]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate model_id")
    scored = [
        (m.model_id, float(np.mean(poll_confidences(m, test_samples))))
        for m in models
    ]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored
