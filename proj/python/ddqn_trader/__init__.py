"""Python bindings for the double deep Q-network trading engine."""

from ._core import (  # noqa: F401
    Agent,
    ConfigError,
    DataError,
    FeatureFrame,
    NumericError,
    StateError,
    VersionError,
    annualized_metrics,
    backtest,
    build_frame,
    epsilon_at,
    ewma_vol,
    load_agent,
    log_returns,
    normalize,
    oracle_actions,
    param_count,
    score_actions,
    synth_generate,
    train,
)

__all__ = [name for name in dir() if not name.startswith("_")]
