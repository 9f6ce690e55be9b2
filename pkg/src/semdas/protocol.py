"""One round of the query/match/select/upload protocol over simulated nodes,
with a message trace, a node state machine, and upload verification."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .channel import ChannelState, LinkBudget, UploadAccounting, achievable_rate, account_upload
from .embeddings import QuantizationSpec, SampleRecord, quantize_query, unit_normalize
from .matching import score
from .selection import Candidate, SchemeConfig, select, threshold_select

# candidate rates are quoted at a fixed reference bandwidth so that rankings
# do not depend on how many sources are later selected (keeps top-k nested)
DEFAULT_RATE_REFERENCE_BANDWIDTH_HZ = 2e6


class ProtocolError(RuntimeError):
    """Illegal node state transition."""


@dataclass(frozen=True, eq=False)
class QueryMsg:
    query: np.ndarray
    spec: QuantizationSpec
    task_descriptor: str


@dataclass(frozen=True)
class ScoreReport:
    source_id: str
    score: float


@dataclass(frozen=True)
class SelectCmd:
    source_ids: tuple


@dataclass(frozen=True)
class DataUpload:
    source_id: str
    sample_id: str
    contains_target: bool


@dataclass(frozen=True)
class FoundAck:
    source_id: str


class RequesterState(Enum):
    IDLE = "idle"
    AWAITING_RESULT = "awaiting_result"
    DONE = "done"


class ControllerState(Enum):
    IDLE = "idle"
    BROADCASTING = "broadcasting"
    COLLECTING = "collecting"
    SELECTING = "selecting"
    FORWARDING = "forwarding"


class SourceState(Enum):
    IDLE = "idle"
    SCORING = "scoring"
    REPORTING = "reporting"
    UPLOADING = "uploading"


_REQUESTER_NEXT = {
    RequesterState.IDLE: RequesterState.AWAITING_RESULT,
    RequesterState.AWAITING_RESULT: RequesterState.DONE,
}
_CONTROLLER_NEXT = {
    ControllerState.IDLE: ControllerState.BROADCASTING,
    ControllerState.BROADCASTING: ControllerState.COLLECTING,
    ControllerState.COLLECTING: ControllerState.SELECTING,
    ControllerState.SELECTING: ControllerState.FORWARDING,
}
_SOURCE_NEXT = {
    SourceState.IDLE: SourceState.SCORING,
    SourceState.SCORING: SourceState.REPORTING,
    SourceState.REPORTING: SourceState.UPLOADING,
}


@dataclass
class NodeState:
    """Per-actor protocol states; transitions only advance along the fixed
    per-role order, anything else raises ProtocolError."""

    requester: RequesterState = RequesterState.IDLE
    controller: ControllerState = ControllerState.IDLE
    sources: dict = field(default_factory=dict)

    def advance_requester(self, new: RequesterState) -> None:
        if _REQUESTER_NEXT.get(self.requester) is not new:
            raise ProtocolError(f"requester cannot go {self.requester} -> {new}")
        self.requester = new

    def advance_controller(self, new: ControllerState) -> None:
        if _CONTROLLER_NEXT.get(self.controller) is not new:
            raise ProtocolError(f"controller cannot go {self.controller} -> {new}")
        self.controller = new

    def advance_source(self, source_id: str, new: SourceState) -> None:
        cur = self.sources.get(source_id, SourceState.IDLE)
        if _SOURCE_NEXT.get(cur) is not new:
            raise ProtocolError(f"source {source_id} cannot go {cur} -> {new}")
        self.sources[source_id] = new


@dataclass(eq=False)
class RoundOutcome:
    selected: list
    missing: bool
    accounting: UploadAccounting
    trace: list
    node_state: NodeState


def actor_of(message) -> str:
    if isinstance(message, QueryMsg):
        return "requester"
    if isinstance(message, SelectCmd):
        return "controller"
    if isinstance(message, (ScoreReport, DataUpload, FoundAck)):
        return f"source:{message.source_id}"
    raise ValueError(f"unknown message type {type(message).__name__}")


def source_id_for(index: int, count: int) -> str:
    """Positional source id, zero-padded so lexicographic = numeric order."""
    width = max(3, len(str(count - 1)))
    return f"src{index:0{width}d}"


def verify_source(controller_view: QueryMsg, upload_key, threshold: float,
                  score_mode: str = "cosine") -> bool:
    """Re-score the uploaded key against the query the controller actually
    broadcast; accept iff the recomputed score clears the threshold.

    A source may lie in its ScoreReport, but the upload reveals its true
    key, so an honest source's recomputed score equals its report.
    """
    key = unit_normalize(upload_key)
    return score(controller_view.query, key, score_mode) >= threshold


def run_round(query_sample: SampleRecord, sources, scheme: SchemeConfig, k: int,
              spec: QuantizationSpec, budget: LinkBudget,
              score_mode: str = "cosine", rng=None, *,
              rate_reference_bandwidth_hz: float = DEFAULT_RATE_REFERENCE_BANDWIDTH_HZ,
              verify_threshold: float | None = None,
              reported_scores: dict | None = None) -> RoundOutcome:
    """Execute one protocol round and return its outcome with a full trace.

    sources: list of (SampleRecord, ChannelState); ids are positional
    (src000, src001, ...). The requester broadcasts the normalized,
    quantized query; every source scores it against its own normalized key
    and reports; the controller builds candidates (rates quoted at
    rate_reference_bandwidth_hz), runs the scheme, and the selected sources
    upload in parallel over an equal split of the budget bandwidth.

    reported_scores overrides individual score reports by source index (the
    adversarial model: reports may lie, uploads cannot). verify_threshold,
    when set, makes the controller re-score each uploaded key; rejected
    uploads are dropped from `selected` and from accounting, and `missing`
    is then computed over the accepted uploads only. If every upload is
    rejected the round accounts zero uplink and zero latency.
    """
    sources = list(sources)
    if not sources:
        raise ValueError("sources must be non-empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    n = len(sources)
    ids = [source_id_for(i, n) for i in range(n)]
    by_id = {sid: src for sid, src in zip(ids, sources)}
    state = NodeState()
    trace = []
    step = 0

    def emit(message):
        nonlocal step
        trace.append((step, message))
        step += 1

    # service requesting: the query goes out once, as a broadcast
    qvec = quantize_query(unit_normalize(query_sample.vector), spec)
    query_msg = QueryMsg(qvec, spec, task_descriptor=query_sample.sample_id)
    state.advance_requester(RequesterState.AWAITING_RESULT)
    state.advance_controller(ControllerState.BROADCASTING)
    emit(query_msg)
    state.advance_controller(ControllerState.COLLECTING)

    # each source scores the query against its own key and reports back
    candidates = []
    for i, sid in enumerate(ids):
        record, chan = by_id[sid]
        state.advance_source(sid, SourceState.SCORING)
        key = unit_normalize(record.vector)
        true_score = score(qvec, key, score_mode)
        reported = true_score
        if reported_scores is not None and i in reported_scores:
            reported = float(reported_scores[i])
        state.advance_source(sid, SourceState.REPORTING)
        emit(ScoreReport(sid, reported))
        rate_bps = achievable_rate(rate_reference_bandwidth_hz, budget.avg_snr_db, chan)
        candidates.append(Candidate(sid, reported, rate_bps / 1e6, chan.power_gain))

    state.advance_controller(ControllerState.SELECTING)
    if scheme.kind == "threshold":
        selected_ids = threshold_select(candidates, scheme.theta_score, scheme.theta_gain)
    else:
        selected_ids = select(scheme, candidates, k, rng)
    emit(SelectCmd(tuple(selected_ids)))

    # selected sources upload; a target-holding upload also acks
    for sid in selected_ids:
        record, _ = by_id[sid]
        state.advance_source(sid, SourceState.UPLOADING)
        emit(DataUpload(sid, record.sample_id, record.contains_target))
        if record.contains_target:
            emit(FoundAck(sid))

    accepted_ids = list(selected_ids)
    if verify_threshold is not None:
        accepted_ids = [
            sid for sid in selected_ids
            if verify_source(query_msg, by_id[sid][0].vector, verify_threshold, score_mode)
        ]

    if accepted_ids:
        accounting = account_upload(
            [(sid, by_id[sid][1]) for sid in accepted_ids], budget, spec.payload_bits
        )
    else:
        accounting = UploadAccounting({}, 0.0, 0, spec.payload_bits)

    missing = not any(by_id[sid][0].contains_target for sid in accepted_ids)
    state.advance_controller(ControllerState.FORWARDING)
    state.advance_requester(RequesterState.DONE)
    return RoundOutcome(list(accepted_ids), missing, accounting, trace, state)


def _format_message(message) -> str:
    if isinstance(message, QueryMsg):
        return (f"query,{message.task_descriptor},"
                f"{message.spec.kept_dimensions},{message.spec.bits_per_dimension}")
    if isinstance(message, ScoreReport):
        return f"score,{message.source_id},{repr(message.score)}"
    if isinstance(message, SelectCmd):
        return "select," + ";".join(message.source_ids)
    if isinstance(message, DataUpload):
        return f"upload,{message.sample_id},{int(message.contains_target)}"
    if isinstance(message, FoundAck):
        return "ack"
    raise ValueError(f"unknown message type {type(message).__name__}")


def format_trace(trace) -> list[str]:
    """One line per message: `<step>,<actor>,<kind>,<fields...>`."""
    return [f"{step},{actor_of(msg)},{_format_message(msg)}" for step, msg in trace]


def export_trace(trace, path) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(format_trace(trace)) + "\n")
