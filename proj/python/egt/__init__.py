"""Fairness metrics, counterexamples and training for gridded generative models."""

import json as _json

from ._egt import *  # noqa: F401,F403
from ._egt import run_scenario as _run_scenario

__version__ = "0.1.0"


def run_scenario(config, out_dir):
    """Run a scenario config (dict or JSON string) into out_dir.

    Returns (exit_code, summary dict, table CSV text).
    """
    text = config if isinstance(config, str) else _json.dumps(config)
    code, summary, table = _run_scenario(text, str(out_dir))
    return code, _json.loads(summary), table
