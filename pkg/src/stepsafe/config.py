"""Versioned numeric defaults.

Every constant that is not forced by geometry lives in ``defaults.json`` and
is echoed into run manifests, so each run records the exact configuration it
used. CLI flags override these values; library callers pass them explicitly.
"""

import json
from importlib import resources

__all__ = ["DEFAULTS", "CONFIG_VERSION"]


def _load():
    with resources.files("stepsafe").joinpath("defaults.json").open("rb") as fh:
        return json.load(fh)


DEFAULTS = _load()
CONFIG_VERSION = DEFAULTS["config_version"]
