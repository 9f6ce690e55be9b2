"""semdas: deterministic simulator for semantic data sourcing, where a
network locates the data sources whose content matches a task query before
any bulk transfer, then uploads over a shared fading uplink."""

from .channel import (
    GAIN_FLOOR,
    ChannelState,
    LinkBudget,
    UploadAccounting,
    account_upload,
    achievable_rate,
    sample_power_gain,
)
from .embeddings import (
    ALLOWED_BITS,
    DomainStats,
    EmbeddingFormatError,
    EmbeddingStore,
    QuantizationSpec,
    SampleRecord,
    SyntheticGenConfig,
    fit_domain_stats,
    generate_synthetic,
    load_embeddings,
    quantize_query,
    save_embeddings,
    unit_normalize,
)
from .experiment import (
    ExperimentConfig,
    MetricsRow,
    build_store,
    config_from_mapping,
    config_to_mapping,
    draw_world,
    export_csv,
    index_store,
    mix_seed,
    parse_config_file,
    parse_metrics_csv,
    run_experiment,
    sweep_quantization,
    wilson_halfwidth,
)
from .matching import (
    ExpertModel,
    PolledModel,
    cosine_score,
    domain_match_score,
    dot_score,
    expert_gateway_rank,
    fit_expert,
    kl_gaussian,
    poll_confidences,
    reconstruction_errors,
    server_poll_rank,
)
from .protocol import (
    DataUpload,
    FoundAck,
    NodeState,
    ProtocolError,
    QueryMsg,
    RoundOutcome,
    ScoreReport,
    SelectCmd,
    export_trace,
    format_trace,
    run_round,
    verify_source,
)
from .selection import Candidate, SchemeConfig, select, threshold_select

__version__ = "0.1.0"
