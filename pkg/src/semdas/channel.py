"""Uplink channel model: i.i.d. Rayleigh fading power gains, Shannon-rate
links over an equal orthogonal bandwidth split, and upload accounting."""

from __future__ import annotations

import math
from dataclasses import dataclass

# Exp(1) never yields exactly 0, but float underflow can; the floor keeps
# latency finite while preserving the heavy tail.
GAIN_FLOOR = 1e-12


@dataclass(frozen=True)
class ChannelState:
    power_gain: float  # |h|^2, dimensionless, unit mean

    def __post_init__(self):
        if not (math.isfinite(self.power_gain) and self.power_gain >= 0):
            raise ValueError(f"power_gain must be finite and >= 0, got {self.power_gain}")


@dataclass(frozen=True)
class LinkBudget:
    total_bandwidth_hz: float
    avg_snr_db: float
    payload_bits_per_source: int

    def __post_init__(self):
        if not (self.total_bandwidth_hz > 0):
            raise ValueError("total_bandwidth_hz must be > 0")
        if not math.isfinite(self.avg_snr_db):
            raise ValueError("avg_snr_db must be finite")
        if self.payload_bits_per_source <= 0:
            raise ValueError("payload_bits_per_source must be > 0")


@dataclass(frozen=True)
class UploadAccounting:
    per_source_rate_bps: dict
    latency_ms: float
    uplink_bits: int
    downlink_bits: int

    @property
    def fade_outage(self) -> bool:
        return math.isinf(self.latency_ms)


def sample_power_gain(rng) -> ChannelState:
    """One Rayleigh-fading power gain: Exponential(mean 1), floored at
    GAIN_FLOOR against underflow."""
    g = float(rng.exponential(1.0))
    if g < GAIN_FLOOR:
        g = GAIN_FLOOR
    return ChannelState(g)


def achievable_rate(bandwidth_hz: float, avg_snr_db: float, gain: ChannelState) -> float:
    """Shannon rate in bits/s: bandwidth * log2(1 + snr_linear * gain)."""
    if not (bandwidth_hz > 0):
        raise ValueError("bandwidth_hz must be > 0")
    snr_linear = 10.0 ** (avg_snr_db / 10.0)
    return bandwidth_hz * math.log2(1.0 + snr_linear * gain.power_gain)


def account_upload(selected, budget: LinkBudget, query_bits: int) -> UploadAccounting:
    """Account one parallel upload of the selected sources.

    selected: list of (source_id, ChannelState). Each source gets an equal
    orthogonal share total_bandwidth_hz / k; uploads run in parallel, so
    latency is the slowest source's transfer time in milliseconds. A zero
    rate yields latency inf (fade outage), flagged on the result.
    """
    selected = list(selected)
    if not selected:
        raise ValueError("empty selection")
    if query_bits < 0:
        raise ValueError("query_bits must be >= 0")
    k = len(selected)
    share = budget.total_bandwidth_hz / k
    rates = {}
    worst_s = 0.0
    for source_id, state in selected:
        rate = achievable_rate(share, budget.avg_snr_db, state)
        rates[source_id] = rate
        seconds = budget.payload_bits_per_source / rate if rate > 0 else math.inf
        worst_s = max(worst_s, seconds)
    return UploadAccounting(
        per_source_rate_bps=rates,
        latency_ms=1000.0 * worst_s,
        uplink_bits=k * budget.payload_bits_per_source,
        downlink_bits=query_bits,
    )
