"""Channel-attentive message passing for node classification."""

from ._chatgnn import (
    Dataset,
    DimensionError,
    EpochMetrics,
    FormatError,
    Graph,
    IoError,
    Model,
    ModelConfig,
    NodeIndexError,
    Split,
    TrainConfig,
    TrainResult,
    ValidationError,
    channel_beta,
    chat_layer_forward,
    collapse_monte_carlo,
    dirichlet_energy,
    edge_norms,
    energy_decay,
    evaluate,
    gradcheck,
    grid_graph,
    load_dataset,
    local_variation,
    local_variation_violations,
    reverse,
    row_normalize,
    save_dataset,
    synthetic_dataset,
    train,
)

__version__ = "0.1.0"
