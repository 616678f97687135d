"""Deep Neyman-Scott processes with variational posteriors.

Thin wrapper around the compiled ``_nspvi`` extension. Sequences are passed as
``(window, [(t, type), ...])`` tuples with 1-based types.
"""

import json as _json

from ._nspvi import (  # noqa: F401
    ArgumentError,
    ConfigError,
    NumericError,
    ParseError,
    WeibullKernel,
    cmd_bench,
    cmd_generate,
    cmd_plot,
    cmd_predict,
    cmd_train,
    default_config,
    generate,
    majority_type,
    mean_time,
    predict,
    read_dataset,
    top_rate_mle,
    weibull_eval,
    weibull_integral,
    write_dataset,
)


def config(**sections):
    """Default run configuration as a dict, with top-level sections merged in."""
    base = _json.loads(default_config())
    for key, value in sections.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            base[key].update(value)
        else:
            base[key] = value
    return base


def config_json(cfg):
    return cfg if isinstance(cfg, str) else _json.dumps(cfg)
