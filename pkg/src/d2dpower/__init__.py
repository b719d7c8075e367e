"""Distributed D2D transmit-power allocation.

A feed-forward network maps a single device pair's coordinates to a
per-channel transmit-power vector. Training maximizes expected sum
throughput over simulated multi-cell drops, with penalty terms that keep
per-transmitter power and base-station interference under their caps.

Submodules are imported lazily so the command line can configure thread
environment variables before numpy loads.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "channel",
    "cli",
    "config",
    "errors",
    "evaluation",
    "network",
    "objective",
    "topology",
    "training",
)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
