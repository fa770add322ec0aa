"""Traffic forecasting with dynamic hypergraph structure learning."""

from ._core import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    Error,
    FormatError,
    Model,
    ModelConfig,
    NumericError,
    RoadNetwork,
    RunOptions,
    eval,
    evaluate,
    export_incidence,
    ha_baseline,
    init_parameters,
    load_checkpoint,
    predict,
    read_road_network_csv,
    read_signals,
    run_verification,
    synth,
    synth_generate,
    train,
    write_road_network_csv,
    write_signals,
    zero_parameters,
)

__version__ = "0.1.0"
