"""Stabilized semi-implicit Fourier-spectral solver for 2-d phase-field models.

Configs are plain dicts with the same shape the command-line tool reads from
JSON files; results come back as dicts of numpy arrays.
"""

import json as _json

from ._core import (
    ConfigError,
    DivergenceError,
    FormatError,
    advance,
    energy,
    read_snapshot,
    thread_cap,
    write_snapshot,
)
from . import _core as _core

__all__ = [
    "ConfigError",
    "DivergenceError",
    "FormatError",
    "advance",
    "converge",
    "energy",
    "make_initial",
    "read_snapshot",
    "run",
    "stability_scan",
    "thread_cap",
    "write_snapshot",
]


def run(config):
    """March one configured run; returns per-step series and the final state."""
    return _core.run_json(_json.dumps(config))


def converge(config):
    """Temporal or spatial self-convergence study."""
    return _core.converge_json(_json.dumps(config))


def stability_scan(config):
    """Energy-decay check over a (tau, stabilization) grid."""
    return _core.scan_json(_json.dumps(config))


def make_initial(init, N, M=None, cutoff="ball"):
    """Sample a configured initial state on the dealiased grid for radius N."""
    return _core.make_initial_json(_json.dumps(init), N, M, cutoff)
