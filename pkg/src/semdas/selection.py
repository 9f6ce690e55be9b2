"""Source-selection policies: joint semantics-and-channel matching (jscm),
best-semantic (bss), best-channel (bcs), uniform random (rs), and the
two-threshold multi-access variant."""

from __future__ import annotations

import math
from dataclasses import dataclass

SCHEME_KINDS = ("jscm", "bss", "bcs", "rs", "threshold")

DEFAULT_W_SEMANTIC = 1.0
DEFAULT_W_RATE = 0.09


@dataclass(frozen=True)
class Candidate:
    source_id: str
    semantic_score: float
    rate_mbps: float
    power_gain: float

    def __post_init__(self):
        for name in ("semantic_score", "rate_mbps", "power_gain"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        if self.rate_mbps < 0:
            raise ValueError("rate_mbps must be >= 0")
        if self.power_gain < 0:
            raise ValueError("power_gain must be >= 0")


@dataclass(frozen=True)
class SchemeConfig:
    kind: str
    w_semantic: float = DEFAULT_W_SEMANTIC
    w_rate: float = DEFAULT_W_RATE
    theta_score: float = 0.0
    theta_gain: float = 0.0

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown scheme kind {self.kind!r}, expected {SCHEME_KINDS}")
        if not (math.isfinite(self.w_semantic) and math.isfinite(self.w_rate)):
            raise ValueError("jscm weights must be finite")

    @classmethod
    def jscm(cls, w_semantic: float = DEFAULT_W_SEMANTIC, w_rate: float = DEFAULT_W_RATE):
        return cls("jscm", w_semantic=w_semantic, w_rate=w_rate)

    @classmethod
    def bss(cls):
        return cls("bss")

    @classmethod
    def bcs(cls):
        return cls("bcs")

    @classmethod
    def rs(cls):
        return cls("rs")

    @classmethod
    def threshold(cls, theta_score: float, theta_gain: float):
        return cls("threshold", theta_score=theta_score, theta_gain=theta_gain)

    @property
    def label(self) -> str:
        """Stable name used in metrics rows and report file names."""
        if self.kind == "jscm":
            if (self.w_semantic, self.w_rate) == (DEFAULT_W_SEMANTIC, DEFAULT_W_RATE):
                return "jscm"
            return f"jscm-{self.w_semantic:g}-{self.w_rate:g}"
        if self.kind == "threshold":
            return f"threshold-{self.theta_score:g}-{self.theta_gain:g}"
        return self.kind


def combined_score(scheme: SchemeConfig, candidate: Candidate) -> float:
    """The additive objective a ranked scheme maximizes per source."""
    if scheme.kind == "jscm":
        return scheme.w_semantic * candidate.semantic_score + scheme.w_rate * candidate.rate_mbps
    if scheme.kind == "bss":
        return candidate.semantic_score
    if scheme.kind == "bcs":
        return candidate.rate_mbps
    raise ValueError(f"scheme {scheme.kind!r} has no combined score")


def select(scheme: SchemeConfig, candidates, k: int, rng=None) -> list[str]:
    """Pick min(k, N) source ids under the scheme, ranked.

    jscm/bss/bcs sort by their objective, ties broken by source_id, so
    selections are deterministic and the top-k sets nest as k grows. rs
    draws uniformly without replacement and requires rng; the other kinds
    ignore rng entirely.
    """
    candidates = list(candidates)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not candidates:
        raise ValueError("empty candidate list")
    ids = [c.source_id for c in candidates]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate source_id among candidates")
    if scheme.kind == "threshold":
        raise ValueError("threshold scheme has no fixed k; use threshold_select")
    k = min(k, len(candidates))
    if scheme.kind == "rs":
        if rng is None:
            raise ValueError("rs selection requires a seeded rng")
        picks = rng.choice(len(candidates), size=k, replace=False)
        return [candidates[i].source_id for i in picks]
    order = sorted(candidates, key=lambda c: (-combined_score(scheme, c), c.source_id))
    return [c.source_id for c in order[:k]]


def threshold_select(candidates, theta_score: float, theta_gain: float) -> list[str]:
    """Every source clearing both thresholds, in source_id order.

    May be empty; an empty result is the legal "do not transmit" outcome.
    """
    picked = [
        c.source_id
        for c in candidates
        if c.semantic_score >= theta_score and c.power_gain >= theta_gain
    ]
    return sorted(picked)
