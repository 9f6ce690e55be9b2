"""Monte-Carlo experiment harness: paired-world trials over schemes, k, and
query quantization, with exact-count metrics and CSV export.

Seeding discipline: trial i (0-based) draws its world from
default_rng(mix_seed(master_seed, i)), where mix_seed is the splitmix64
finalizer of master + GOLDEN * (i + 1) mod 2^64. Every (scheme, k,
quantization) cell replays the same per-trial worlds, so comparisons are
paired; random selection gets its own stream per (trial, k) via
mix_seed(trial_seed, k). Adding schemes or cells never perturbs the draws
of existing cells.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .channel import LinkBudget, sample_power_gain
from .embeddings import (
    EmbeddingStore,
    QuantizationSpec,
    SampleRecord,
    SyntheticGenConfig,
    generate_synthetic,
    load_embeddings,
)
from .matching import SCORE_MODES
from .protocol import run_round
from .selection import SchemeConfig

_GOLDEN = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1

# 97.5% normal quantile, for the 95% Wilson interval
_Z95 = 1.959963984540054

CSV_COLUMNS = (
    "scheme", "k", "bits_per_dim", "kept_dims", "trials",
    "missing_rate", "avg_latency_ms", "avg_uplink_mbits",
    "downlink_bits", "ci95_missing",
)


def mix_seed(master: int, index: int) -> int:
    """Derive a decorrelated 64-bit stream seed: splitmix64 finalizer of
    master + GOLDEN * (index + 1) mod 2^64."""
    z = (master + _GOLDEN * (index + 1)) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return (z ^ (z >> 31)) & _MASK


def wilson_halfwidth(p_hat: float, n: int, z: float = _Z95) -> float:
    """Half-width of the Wilson score interval for a binomial proportion.

    Stays sensible at p_hat near 0, where the normal interval collapses.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0.0 <= p_hat <= 1.0):
        raise ValueError(f"p_hat must be in [0, 1], got {p_hat}")
    z2n = z * z / n
    denom = 1.0 + z2n
    half = z * math.sqrt(p_hat * (1.0 - p_hat) / n + z2n / (4.0 * n)) / denom
    return half


def default_schemes() -> tuple:
    return (SchemeConfig.jscm(), SchemeConfig.bss(), SchemeConfig.bcs(), SchemeConfig.rs())


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment depends on. Two configs that compare equal
    produce byte-identical CSV exports."""

    num_sensors: int = 20
    targets_per_trial: int = 4
    trials: int = 1229
    dimension: int = 64
    payload_bits: int = 1_000_000
    bandwidth_hz: float = 5e6
    avg_snr_db: float = 10.0
    rate_reference_bandwidth_hz: float = 2e6
    schemes: tuple = field(default_factory=default_schemes)
    k_sweep: tuple = (1, 2, 3, 4, 5, 6, 7, 8)
    quantization_sweep: tuple = ()  # empty = native (store dimension, b=32)
    score_mode: str = "cosine"
    master_seed: int = 12345
    embedding_source: str = "synthetic"
    embedding_path: str | None = None
    num_identities: int = 32
    samples_per_identity: int = 8
    intra_class_noise_sigma: float = 0.05
    embedding_seed: int | None = None  # None = master_seed

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(self.schemes))
        object.__setattr__(self, "k_sweep", tuple(int(k) for k in self.k_sweep))
        object.__setattr__(self, "quantization_sweep", tuple(self.quantization_sweep))
        if self.num_sensors < 1:
            raise ValueError("num_sensors must be >= 1")
        if not (1 <= self.targets_per_trial < self.num_sensors):
            raise ValueError("need 1 <= targets_per_trial < num_sensors")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        if self.payload_bits < 1:
            raise ValueError("payload_bits must be >= 1")
        if not (self.bandwidth_hz > 0):
            raise ValueError("bandwidth_hz must be > 0")
        if not (self.rate_reference_bandwidth_hz > 0):
            raise ValueError("rate_reference_bandwidth_hz must be > 0")
        if not self.schemes:
            raise ValueError("schemes must be non-empty")
        labels = [s.label for s in self.schemes]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate scheme labels: {labels}")
        if not self.k_sweep or any(k < 1 for k in self.k_sweep):
            raise ValueError("k_sweep must be non-empty with every k >= 1")
        if self.score_mode not in SCORE_MODES:
            raise ValueError(f"score_mode must be one of {SCORE_MODES}")
        if self.embedding_source not in ("synthetic", "file"):
            raise ValueError("embedding_source must be 'synthetic' or 'file'")
        if self.embedding_source == "file" and not self.embedding_path:
            raise ValueError("embedding_source 'file' requires embedding_path")
        if self.embedding_source == "synthetic":
            if self.num_identities < 2:
                raise ValueError("need num_identities >= 2 (target plus distractors)")
            if self.samples_per_identity < 1:
                raise ValueError("samples_per_identity must be >= 1")
            if not (self.intra_class_noise_sigma >= 0):
                raise ValueError("intra_class_noise_sigma must be >= 0")


@dataclass(frozen=True)
class MetricsRow:
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


@dataclass(eq=False)
class TrialWorld:
    """One trial's frozen randomness: the query and the per-position
    (sample, channel) assignment, ready to hand to run_round."""

    query: SampleRecord
    sources: list
    target_label: str


@dataclass(eq=False)
class StoreIndex:
    store: EmbeddingStore
    labels: list
    by_label: dict


def build_store(config: ExperimentConfig) -> EmbeddingStore:
    if config.embedding_source == "file":
        return load_embeddings(config.embedding_path)
    seed = config.master_seed if config.embedding_seed is None else config.embedding_seed
    gen = SyntheticGenConfig(
        num_identities=config.num_identities,
        samples_per_identity=config.samples_per_identity,
        dimension=config.dimension,
        intra_class_noise_sigma=config.intra_class_noise_sigma,
        seed=seed,
    )
    return generate_synthetic(gen)


def index_store(store: EmbeddingStore) -> StoreIndex:
    by_label: dict = {}
    for rec in store.records:
        by_label.setdefault(rec.identity_label, []).append(rec)
    labels = sorted(by_label)
    if len(labels) < 2:
        raise ValueError("store must contain at least 2 identities")
    return StoreIndex(store, labels, by_label)


def draw_world(index: StoreIndex, rng, num_sensors: int, targets_per_trial: int) -> TrialWorld:
    """Draw one trial: a fresh uniform target identity, target-holding
    positions, the query plus target views, distractor holdings, and one
    fading gain per sensor.

    Draw order is fixed (target identity, positions, target sample indices,
    distractor identities, distractor samples, gains) so a given trial seed
    always produces the same world. Samples and distractor identities are
    drawn without replacement whenever the store is large enough.
    """
    labels = index.labels
    target_label = labels[int(rng.integers(len(labels)))]
    positions = set(int(p) for p in rng.choice(num_sensors, size=targets_per_trial, replace=False))

    target_recs = index.by_label[target_label]
    need = 1 + targets_per_trial
    if len(target_recs) >= need:
        picks = rng.choice(len(target_recs), size=need, replace=False)
    else:
        picks = rng.integers(0, len(target_recs), size=need)
    query = target_recs[int(picks[0])]
    views = [target_recs[int(i)] for i in picks[1:]]

    others = [lb for lb in labels if lb != target_label]
    need_d = num_sensors - targets_per_trial
    if len(others) >= need_d:
        lab_picks = rng.choice(len(others), size=need_d, replace=False)
    else:
        lab_picks = rng.integers(0, len(others), size=need_d)
    distractors = []
    for li in lab_picks:
        recs = index.by_label[others[int(li)]]
        distractors.append(recs[int(rng.integers(len(recs)))])

    gains = [sample_power_gain(rng) for _ in range(num_sensors)]

    sources = []
    vi = di = 0
    for pos in range(num_sensors):
        if pos in positions:
            rec = views[vi]
            vi += 1
            rec = SampleRecord(rec.sample_id, rec.identity_label, rec.vector, True)
        else:
            rec = distractors[di]
            di += 1
        sources.append((rec, gains[pos]))
    return TrialWorld(query, sources, target_label)


def _resolve_quantization(config: ExperimentConfig, store_dim: int) -> tuple:
    specs = config.quantization_sweep or (QuantizationSpec(store_dim, 32),)
    for spec in specs:
        if spec.kept_dimensions > store_dim:
            raise ValueError(
                f"kept_dimensions {spec.kept_dimensions} exceeds store dimension {store_dim}"
            )
    return specs


def run_experiment(config: ExperimentConfig) -> list[MetricsRow]:
    """Run every (scheme, k, quantization) cell over paired trial worlds and
    aggregate one MetricsRow per cell, sorted by (scheme, k, d, b)."""
    store = build_store(config)
    index = index_store(store)
    specs = _resolve_quantization(config, store.dimension)
    budget = LinkBudget(config.bandwidth_hz, config.avg_snr_db, config.payload_bits)

    cells = [
        (scheme, k, qspec)
        for qspec in specs
        for scheme in config.schemes
        for k in config.k_sweep
    ]
    missing_count = [0] * len(cells)
    latency_sum = [0.0] * len(cells)
    uplink_sum = [0] * len(cells)

    for i in range(config.trials):
        trial_seed = mix_seed(config.master_seed, i)
        world = draw_world(
            index, np.random.default_rng(trial_seed),
            config.num_sensors, config.targets_per_trial,
        )
        for ci, (scheme, k, qspec) in enumerate(cells):
            rng_sel = None
            if scheme.kind == "rs":
                rng_sel = np.random.default_rng(mix_seed(trial_seed, k))
            outcome = run_round(
                world.query, world.sources, scheme, k, qspec, budget,
                config.score_mode, rng_sel,
                rate_reference_bandwidth_hz=config.rate_reference_bandwidth_hz,
            )
            if outcome.missing:
                missing_count[ci] += 1
            latency_sum[ci] += outcome.accounting.latency_ms
            uplink_sum[ci] += outcome.accounting.uplink_bits

    rows = []
    for ci, (scheme, k, qspec) in enumerate(cells):
        p_hat = missing_count[ci] / config.trials
        rows.append(MetricsRow(
            scheme=scheme.label,
            k=k,
            bits_per_dim=qspec.bits_per_dimension,
            kept_dims=qspec.kept_dimensions,
            trials=config.trials,
            missing_rate=p_hat,
            avg_latency_ms=latency_sum[ci] / config.trials,
            avg_uplink_mbits=uplink_sum[ci] / config.trials / 1e6,
            downlink_bits=qspec.payload_bits,
            ci95_missing=wilson_halfwidth(p_hat, config.trials),
        ))
    rows.sort(key=lambda r: (r.scheme, r.k, r.kept_dims, r.bits_per_dim))
    return rows


def sweep_quantization(config: ExperimentConfig) -> list[MetricsRow]:
    """One run_experiment per QuantizationSpec in the sweep; because trial
    seeds depend only on master_seed, every spec faces identical worlds."""
    if not config.quantization_sweep:
        raise ValueError("quantization_sweep must be non-empty for a sweep")
    rows: list[MetricsRow] = []
    for spec in config.quantization_sweep:
        rows.extend(run_experiment(replace(config, quantization_sweep=(spec,))))
    rows.sort(key=lambda r: (r.scheme, r.k, r.kept_dims, r.bits_per_dim))
    return rows


def scheme_token(scheme: SchemeConfig) -> str:
    """Config-file token for a scheme (inverse of parse_scheme_token)."""
    if scheme.kind == "jscm":
        return f"jscm:{scheme.w_semantic:g}:{scheme.w_rate:g}"
    if scheme.kind == "threshold":
        return f"threshold:{scheme.theta_score:g}:{scheme.theta_gain:g}"
    return scheme.kind


def config_to_mapping(config: ExperimentConfig) -> dict:
    """Flat key=value view of a config, as written to CSV headers and
    accepted back by the CLI config parser."""
    out = {}
    for f in fields(ExperimentConfig):
        value = getattr(config, f.name)
        if f.name == "schemes":
            out[f.name] = ",".join(scheme_token(s) for s in value)
        elif f.name == "k_sweep":
            out[f.name] = ",".join(str(k) for k in value)
        elif f.name == "quantization_sweep":
            out[f.name] = ",".join(
                f"{s.kept_dimensions}:{s.bits_per_dimension}" for s in value
            )
        elif value is None:
            out[f.name] = ""
        elif isinstance(value, float):
            out[f.name] = repr(value)
        else:
            out[f.name] = str(value)
    return out


def parse_scheme_token(token: str) -> SchemeConfig:
    """Parse one scheme token: jscm | jscm:<ws>:<wr> | bss | bcs | rs |
    threshold:<theta_score>:<theta_gain>."""
    parts = token.strip().split(":")
    kind = parts[0]
    if kind == "jscm":
        if len(parts) == 1:
            return SchemeConfig.jscm()
        if len(parts) == 3:
            return SchemeConfig.jscm(float(parts[1]), float(parts[2]))
        raise ValueError(f"bad jscm token {token!r}, expected jscm or jscm:<ws>:<wr>")
    if kind == "threshold":
        if len(parts) != 3:
            raise ValueError(f"bad threshold token {token!r}, expected threshold:<ts>:<tg>")
        return SchemeConfig.threshold(float(parts[1]), float(parts[2]))
    if kind in ("bss", "bcs", "rs") and len(parts) == 1:
        return SchemeConfig(kind)
    raise ValueError(f"unknown scheme token {token!r}")


def parse_int_list(text: str) -> tuple:
    """Comma-separated ints, with a-b range syntax: '1-4,6' -> (1,2,3,4,6)."""
    out = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        if "-" in piece and not piece.startswith("-"):
            lo, _, hi = piece.partition("-")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError(f"empty range {piece!r}")
            out.extend(range(lo, hi + 1))
        else:
            out.append(int(piece))
    if not out:
        raise ValueError(f"empty int list {text!r}")
    return tuple(out)


def parse_quantization_list(text: str) -> tuple:
    """Comma-separated d:b pairs: '64:32,64:8' -> QuantizationSpecs."""
    specs = []
    for piece in text.split(","):
        piece = piece.strip()
        if not piece:
            continue
        d, sep, b = piece.partition(":")
        if not sep:
            raise ValueError(f"bad quantization token {piece!r}, expected <d>:<b>")
        specs.append(QuantizationSpec(int(d), int(b)))
    if not specs:
        raise ValueError(f"empty quantization list {text!r}")
    return tuple(specs)


_CONFIG_PARSERS = {
    "num_sensors": int,
    "targets_per_trial": int,
    "trials": int,
    "dimension": int,
    "payload_bits": int,
    "bandwidth_hz": float,
    "avg_snr_db": float,
    "rate_reference_bandwidth_hz": float,
    "schemes": lambda s: tuple(parse_scheme_token(t) for t in s.split(",") if t.strip()),
    "k_sweep": parse_int_list,
    "quantization_sweep": lambda s: parse_quantization_list(s) if s.strip() else (),
    "score_mode": str,
    "master_seed": int,
    "embedding_source": str,
    "embedding_path": lambda s: s or None,
    "num_identities": int,
    "samples_per_identity": int,
    "intra_class_noise_sigma": float,
    "embedding_seed": lambda s: int(s) if s.strip() else None,
}


def config_from_mapping(mapping: dict) -> ExperimentConfig:
    """Build a config from flat key=value strings (config files, CSV
    headers, CLI overrides). Unknown keys are errors."""
    kwargs = {}
    for key, raw in mapping.items():
        parser = _CONFIG_PARSERS.get(key)
        if parser is None:
            raise ValueError(f"unknown config key {key!r}")
        try:
            kwargs[key] = parser(str(raw))
        except ValueError as exc:
            raise ValueError(f"bad value for {key!r}: {raw!r} ({exc})") from None
    return ExperimentConfig(**kwargs)


def parse_config_file(path) -> dict:
    """Read a flat key=value config file; '#' starts a comment line."""
    mapping = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"line {lineno}: expected key=value, got {line!r}")
            mapping[key.strip()] = value.strip()
    return mapping


def _format_value(value) -> str:
    if isinstance(value, float):
        return format(value, ".6g")
    return str(value)


def format_csv(rows, config: ExperimentConfig) -> str:
    if not rows:
        raise ValueError("no rows to export")
    buf = io.StringIO()
    buf.write("# semdas metrics v1\n")
    for key, value in config_to_mapping(config).items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        buf.write(",".join(_format_value(getattr(row, col)) for col in CSV_COLUMNS) + "\n")
    return buf.getvalue()


def export_csv(rows, path, config: ExperimentConfig) -> None:
    """Write rows as CSV: a `# key=value` comment header carrying the full
    config, the column header, then one row per cell with floats at 6
    significant digits (the round-trip identity holds at that precision)."""
    text = format_csv(rows, config)
    with open(path, "w") as fh:
        fh.write(text)


def parse_metrics_csv(path) -> tuple:
    """Read back an exported CSV: (rows, header key=value mapping)."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    header_map = {}
    data = []
    for line in lines:
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                header_map[key.strip()] = value
            continue
        if line.strip():
            data.append(line)
    if not data:
        raise ValueError("no data rows in metrics CSV")
    if data[0] != ",".join(CSV_COLUMNS):
        raise ValueError(f"unexpected column header: {data[0]!r}")
    rows = []
    for line in data[1:]:
        parts = line.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(f"bad metrics row: {line!r}")
        rows.append(MetricsRow(
            scheme=parts[0],
            k=int(parts[1]),
            bits_per_dim=int(parts[2]),
            kept_dims=int(parts[3]),
            trials=int(parts[4]),
            missing_rate=float(parts[5]),
            avg_latency_ms=float(parts[6]),
            avg_uplink_mbits=float(parts[7]),
            downlink_bits=int(parts[8]),
            ci95_missing=float(parts[9]),
        ))
    return rows, header_map
