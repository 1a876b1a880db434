from __future__ import annotations

import copy
import json
import os

import pytest
from hypothesis import HealthCheck, settings

_SUPPRESS = [HealthCheck.too_slow]

settings.register_profile(
    "default",
    settings(max_examples=50, deadline=None, suppress_health_check=_SUPPRESS),
)
settings.register_profile(
    "ci",
    settings(max_examples=150, deadline=None, suppress_health_check=_SUPPRESS),
)
settings.register_profile(
    "fuzz",
    settings(max_examples=500, deadline=None, suppress_health_check=_SUPPRESS),
)

settings.load_profile(os.getenv("HYPOTHESIS_PROFILE", "default"))

# small enough that every command finishes in a few seconds
FAST_CONFIG = {
    "model": {"num_inducing": 8},
    "fit": {"max_iters": 20, "hyper_max_evals": 3},
    "problem": {"n_per_batch": 20, "n_batches": 2},
    "stream": {"learn_hyperparameters": False, "grid_resolution": 5},
    "acquisition": {"budget": 2},
    "bo": {"batch_size": 2, "iterations": 1, "hyper_max_evals": 2},
    "bench": {"sizes": [20, 40], "num_inducing": 5, "repeats": 1},
}


@pytest.fixture
def write_config(tmp_path):
    """Write FAST_CONFIG, with whole sections replaced by keyword, and return the path."""

    def write(**sections) -> str:
        payload = copy.deepcopy(FAST_CONFIG)
        payload.update(sections)
        path = tmp_path / "config.json"
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)

    return write
