"""HTTP service exposing the core operations: matching, channel accounting,
selection, single protocol rounds, and full experiments."""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..channel import ChannelState, LinkBudget, achievable_rate
from ..embeddings import (
    DomainStats,
    QuantizationSpec,
    SampleRecord,
    SyntheticGenConfig,
    generate_synthetic,
)
from ..experiment import ExperimentConfig, run_experiment
from ..matching import (
    ExpertModel,
    PolledModel,
    expert_gateway_rank,
    kl_gaussian,
    score,
    server_poll_rank,
)
from ..protocol import format_trace, run_round
from ..selection import Candidate, SchemeConfig, select, threshold_select
from . import schemas

app = FastAPI(title="semdas", version=__version__)


@app.exception_handler(ValueError)
async def value_error_handler(request, exc: ValueError):
    # domain precondition violations are client errors, not server faults
    return JSONResponse(status_code=400, content={"detail": str(exc)})


def _scheme(model: schemas.SchemeIn) -> SchemeConfig:
    return SchemeConfig(
        kind=model.kind,
        w_semantic=model.w_semantic,
        w_rate=model.w_rate,
        theta_score=model.theta_score,
        theta_gain=model.theta_gain,
    )


@app.get("/health", response_model=schemas.HealthResponse)
def health():
    return schemas.HealthResponse(status="ok", version=__version__)


@app.post("/embeddings/generate", response_model=schemas.GenerateResponse)
def embeddings_generate(req: schemas.GenerateRequest):
    store = generate_synthetic(SyntheticGenConfig(
        num_identities=req.num_identities,
        samples_per_identity=req.samples_per_identity,
        dimension=req.dimension,
        intra_class_noise_sigma=req.intra_class_noise_sigma,
        seed=req.seed,
    ))
    return schemas.GenerateResponse(
        dimension=store.dimension,
        records=[
            schemas.SampleOut(
                sample_id=r.sample_id,
                identity_label=r.identity_label,
                vector=[float(x) for x in r.vector],
            )
            for r in store.records
        ],
    )


@app.post("/match/score", response_model=schemas.ScoreResponse)
def match_score(req: schemas.ScoreRequest):
    return schemas.ScoreResponse(score=score(req.query, req.key, req.mode))


@app.post("/match/domain", response_model=schemas.DomainScoreResponse)
def match_domain(req: schemas.DomainScoreRequest):
    p = DomainStats(np.array(req.p_mean), np.array(req.p_variance))
    q = DomainStats(np.array(req.q_mean), np.array(req.q_variance))
    kl = kl_gaussian(p, q)
    return schemas.DomainScoreResponse(kl=kl, score=-kl)


@app.post("/match/experts/rank", response_model=schemas.RankResponse)
def match_experts_rank(req: schemas.ExpertRankRequest):
    experts = [
        ExpertModel(e.expert_id, np.array(e.subspace_basis), np.array(e.training_mean))
        for e in req.experts
    ]
    ranking = expert_gateway_rank(req.test_samples, experts)
    return schemas.RankResponse(
        ranking=[schemas.RankEntry(id=i, value=v) for i, v in ranking]
    )


@app.post("/match/poll/rank", response_model=schemas.RankResponse)
def match_poll_rank(req: schemas.PollRankRequest):
    models = [
        PolledModel(m.model_id, m.class_centroids, m.temperature) for m in req.models
    ]
    ranking = server_poll_rank(req.test_samples, models)
    return schemas.RankResponse(
        ranking=[schemas.RankEntry(id=i, value=v) for i, v in ranking]
    )


@app.post("/channel/rate", response_model=schemas.RateResponse)
def channel_rate(req: schemas.RateRequest):
    rate = achievable_rate(req.bandwidth_hz, req.avg_snr_db, ChannelState(req.power_gain))
    return schemas.RateResponse(rate_bps=rate)


@app.post("/select", response_model=schemas.SelectResponse)
def select_sources(req: schemas.SelectRequest):
    scheme = _scheme(req.scheme)
    candidates = [
        Candidate(c.source_id, c.semantic_score, c.rate_mbps, c.power_gain)
        for c in req.candidates
    ]
    if scheme.kind == "threshold":
        picked = threshold_select(candidates, scheme.theta_score, scheme.theta_gain)
    else:
        rng = np.random.default_rng(req.seed) if req.seed is not None else None
        picked = select(scheme, candidates, req.k, rng)
    return schemas.SelectResponse(selected=picked)


@app.post("/round", response_model=schemas.RoundResponse)
def round_endpoint(req: schemas.RoundRequest):
    query = SampleRecord(req.query.sample_id, req.query.identity_label,
                         np.array(req.query.vector))
    sources = [
        (
            SampleRecord(s.sample_id, s.identity_label, np.array(s.vector),
                         s.contains_target),
            ChannelState(s.power_gain),
        )
        for s in req.sources
    ]
    kept = req.kept_dimensions if req.kept_dimensions is not None else len(req.query.vector)
    spec = QuantizationSpec(kept, req.bits_per_dimension)
    budget = LinkBudget(req.total_bandwidth_hz, req.avg_snr_db, req.payload_bits)
    rng = np.random.default_rng(req.seed) if req.seed is not None else None
    outcome = run_round(
        query, sources, _scheme(req.scheme), req.k, spec, budget,
        req.score_mode, rng,
        rate_reference_bandwidth_hz=req.rate_reference_bandwidth_hz,
        verify_threshold=req.verify_threshold,
    )
    return schemas.RoundResponse(
        selected=outcome.selected,
        missing=outcome.missing,
        latency_ms=outcome.accounting.latency_ms,
        uplink_bits=outcome.accounting.uplink_bits,
        downlink_bits=outcome.accounting.downlink_bits,
        per_source_rate_bps=outcome.accounting.per_source_rate_bps,
        trace=format_trace(outcome.trace),
    )


@app.post("/experiment", response_model=schemas.ExperimentResponse)
def experiment(req: schemas.ExperimentRequest):
    kwargs = dict(
        num_sensors=req.num_sensors,
        targets_per_trial=req.targets_per_trial,
        trials=req.trials,
        dimension=req.dimension,
        payload_bits=req.payload_bits,
        bandwidth_hz=req.bandwidth_hz,
        avg_snr_db=req.avg_snr_db,
        rate_reference_bandwidth_hz=req.rate_reference_bandwidth_hz,
        score_mode=req.score_mode,
        master_seed=req.master_seed,
        num_identities=req.num_identities,
        samples_per_identity=req.samples_per_identity,
        intra_class_noise_sigma=req.intra_class_noise_sigma,
        embedding_seed=req.embedding_seed,
    )
    if req.schemes is not None:
        kwargs["schemes"] = tuple(_scheme(s) for s in req.schemes)
    if req.k_sweep is not None:
        kwargs["k_sweep"] = tuple(req.k_sweep)
    if req.quantization_sweep is not None:
        kwargs["quantization_sweep"] = tuple(
            QuantizationSpec(q.kept_dimensions, q.bits_per_dimension)
            for q in req.quantization_sweep
        )
    rows = run_experiment(ExperimentConfig(**kwargs))
    return schemas.ExperimentResponse(
        rows=[schemas.MetricsRowOut(**row.__dict__) for row in rows]
    )
