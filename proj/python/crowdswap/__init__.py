"""Python access to the crowdswap simulator."""

import json

from . import _core
from ._core import ConfigError, Error, classification_metrics, distance_m, resolve_auction

__all__ = [
    "ConfigError",
    "Error",
    "classification_metrics",
    "distance_m",
    "resolve_auction",
    "simulate",
    "simulate_default",
]


def simulate(config, variant="", seed=None, strategy="", model=""):
    """Run a scenario from a YAML config and return the result as a dict."""
    return json.loads(_core.simulate_config(str(config), variant, seed, strategy, model))


def simulate_default(kind, variant=1, seed=None, strategy="", model=""):
    """Run a built-in scenario ("crowdshipping" or "crowdsensing")."""
    return json.loads(_core.simulate_default(kind, variant, seed, strategy, model))
