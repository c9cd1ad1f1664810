"""Python access to the coverlab coverage-control core."""

import json as _json

from . import _core
from ._core import (
    Checkpoint,
    ConfigError,
    CoverlabError,
    Dataset,
    DensityField,
    DimensionError,
    EnvSpec,
    EpisodeLog,
    FormatError,
    GnnParams,
    GnnSpec,
    InputError,
    IoError,
    VersionError,
    coverage_reward,
    default_normalization,
    derive_seed,
    episode_seeds,
    forward,
    hungarian,
    init_params,
    lloyd_control,
    load_checkpoint,
    load_dataset,
    mass_and_centroids,
    ownership,
    rasterize,
    run_episode,
    sample_field,
    save_checkpoint,
)

__version__ = "0.1.0"


def default_config():
    """The built-in run configuration as a dict."""
    return _json.loads(_core.default_config())


def config_schema():
    """JSON schema every run configuration is validated against."""
    return _json.loads(_core.config_schema())


def validate_config(config):
    """List of schema violations of a config dict (empty when valid)."""
    return _core.validate_config(_json.dumps(config))


def evaluate(checkpoint, config=None):
    """Paired evaluation trials as a list of dicts, one per (condition, trial, controller)."""
    return _core.evaluate(checkpoint, _json.dumps(config or {}))
