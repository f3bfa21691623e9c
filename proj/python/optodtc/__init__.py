"""Driven two-membrane cavity: mean field, time-crystal protocol, quantum and spectrum tools."""

import json

from ._core import (  # noqa: F401
    Branch,
    ConfigError,
    InvalidArgument,
    ModelParams,
    NumericalFailure,
    SpectrumProblem,
    __version__,
    classical_amplitude,
    coupling_derivatives,
    critical_coupling,
    critical_coupling_dicke,
    dicke_params,
    effective_frequency,
    effective_potential,
    equilibrium_positions,
    preset_names,
    preset_text,
    solve_k,
    spectrum_residual,
    steady_state,
    tasks,
)
from ._core import _run_task


def run_task(task, config=None, *, preset="", output="", workers=0, write_files=True):
    """Run a CLI task in-process. Returns a dict with exit_code, message, summary, metadata, files."""
    if isinstance(config, str):
        text = config
    else:
        text = json.dumps(config or {})
    r = _run_task(task, text, preset, output, workers, write_files)
    r["summary"] = json.loads(r["summary"])
    r["metadata"] = json.loads(r["metadata"])
    return r


def load_preset(name):
    return json.loads(preset_text(name))
