"""Boosted spanning-tree CRFs for partially labelled sequences.

States are 0-based here, as in the C++ API; files use 1-based states.
"""

import json

from . import _core
from ._core import (
    Error,
    InferenceResult,
    Model,
    Network,
    Prediction,
    Sequence,
    check_holder_inequality,
    decode,
    grid_network,
    infer,
    macro_f1,
    read_dataset,
    run_cli,
    strip_labels,
    write_dataset,
)


def generate_dataset(**settings):
    """Synthetic two-level activity corpus. Accepts the generator keys of the
    JSON config (num_train, num_test, seed, noise_sigma, hidden_fraction, ...)."""
    return _core._generate_dataset(json.dumps(settings))


def train(sequences, **settings):
    """Train on train-split sequences; returns (model, history lines as dicts).

    Settings are the config-file keys, e.g. trainer="mle-exact", max_rounds=10.
    """
    model, history = _core._train(list(sequences), json.dumps(settings))
    return model, [json.loads(line) for line in history.splitlines()]


def evaluate(predictions, truth):
    """Macro-F1 report per level, as written by `mrforest eval`."""
    return json.loads(_core._evaluate(list(predictions), list(truth)))


__all__ = [
    "Error", "InferenceResult", "Model", "Network", "Prediction", "Sequence", "check_holder_inequality",
    "decode", "evaluate", "generate_dataset", "grid_network", "infer", "macro_f1", "read_dataset",
    "run_cli", "strip_labels", "train", "write_dataset",
]
