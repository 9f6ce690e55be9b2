"""Request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: str
    version: str


class GenerateRequest(BaseModel):
    num_identities: int
    samples_per_identity: int
    dimension: int
    intra_class_noise_sigma: float = 0.05
    seed: int = 0


class SampleOut(BaseModel):
    sample_id: str
    identity_label: str
    vector: list[float]


class GenerateResponse(BaseModel):
    dimension: int
    records: list[SampleOut]


class ScoreRequest(BaseModel):
    query: list[float]
    key: list[float]
    mode: str = "cosine"


class ScoreResponse(BaseModel):
    score: float


class DomainScoreRequest(BaseModel):
    p_mean: list[float]
    p_variance: list[float]
    q_mean: list[float]
    q_variance: list[float]


class DomainScoreResponse(BaseModel):
    kl: float
    score: float


class ExpertIn(BaseModel):
    expert_id: str
    subspace_basis: list[list[float]]
    training_mean: list[float]


class ExpertRankRequest(BaseModel):
    test_samples: list[list[float]]
    experts: list[ExpertIn]


class RankEntry(BaseModel):
    id: str
    value: float


class RankResponse(BaseModel):
    ranking: list[RankEntry]


class PolledModelIn(BaseModel):
    model_id: str
    class_centroids: dict[str, list[float]]
    temperature: float = 1.0


class PollRankRequest(BaseModel):
    test_samples: list[list[float]]
    models: list[PolledModelIn]


class RateRequest(BaseModel):
    bandwidth_hz: float
    avg_snr_db: float
    power_gain: float


class RateResponse(BaseModel):
    rate_bps: float


class SchemeIn(BaseModel):
    kind: str
    w_semantic: float = 1.0
    w_rate: float = 0.09
    theta_score: float = 0.0
    theta_gain: float = 0.0


class CandidateIn(BaseModel):
    source_id: str
    semantic_score: float
    rate_mbps: float
    power_gain: float


class SelectRequest(BaseModel):
    scheme: SchemeIn
    candidates: list[CandidateIn]
    k: int = 1
    seed: int | None = None


class SelectResponse(BaseModel):
    selected: list[str]


class RoundSourceIn(BaseModel):
    sample_id: str
    identity_label: str
    vector: list[float]
    contains_target: bool = False
    power_gain: float


class RoundQueryIn(BaseModel):
    sample_id: str
    identity_label: str
    vector: list[float]


class RoundRequest(BaseModel):
    query: RoundQueryIn
    sources: list[RoundSourceIn]
    scheme: SchemeIn
    k: int = 1
    kept_dimensions: int | None = None  # None = full query dimension
    bits_per_dimension: int = 32
    total_bandwidth_hz: float = 5e6
    avg_snr_db: float = 10.0
    payload_bits: int = 1_000_000
    score_mode: str = "cosine"
    rate_reference_bandwidth_hz: float = 2e6
    verify_threshold: float | None = None
    seed: int | None = None


class RoundResponse(BaseModel):
    selected: list[str]
    missing: bool
    latency_ms: float
    uplink_bits: int
    downlink_bits: int
    per_source_rate_bps: dict[str, float]
    trace: list[str]


class QuantizationIn(BaseModel):
    kept_dimensions: int
    bits_per_dimension: int


class ExperimentRequest(BaseModel):
    num_sensors: int = 20
    targets_per_trial: int = 4
    trials: int = Field(default=200, le=100_000)
    dimension: int = 64
    payload_bits: int = 1_000_000
    bandwidth_hz: float = 5e6
    avg_snr_db: float = 10.0
    rate_reference_bandwidth_hz: float = 2e6
    schemes: list[SchemeIn] | None = None
    k_sweep: list[int] | None = None
    quantization_sweep: list[QuantizationIn] | None = None
    score_mode: str = "cosine"
    master_seed: int = 12345
    num_identities: int = 32
    samples_per_identity: int = 8
    intra_class_noise_sigma: float = 0.05
    embedding_seed: int | None = None


class MetricsRowOut(BaseModel):
    scheme: str
    k: int
    bits_per_dim: int
    kept_dims: int
    trials: int
    missing_rate: float
    avg_latency_ms: float
    avg_uplink_mbits: float
    downlink_bits: int
    ci95_missing: float


class ExperimentResponse(BaseModel):
    rows: list[MetricsRowOut]
