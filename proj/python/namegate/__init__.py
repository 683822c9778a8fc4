"""Audio-text word naming recognizer over precomputed embeddings."""

import json as _json

from ._namegate import (
    ConfigError,
    FormatError,
    IoError,
    LoadError,
    NamegateError,
    Recognizer,
    ShapeError,
    contrastive_loss,
    ctc_loss,
    load_manifest,
    load_recognizer,
    read_embedding,
    write_embedding,
)
from . import _namegate

__all__ = [
    "ConfigError",
    "FormatError",
    "IoError",
    "LoadError",
    "NamegateError",
    "Recognizer",
    "ShapeError",
    "contrastive_loss",
    "crossval",
    "ctc_loss",
    "generate_synthetic",
    "gradcheck",
    "load_manifest",
    "load_recognizer",
    "metrics",
    "read_embedding",
    "write_embedding",
]


def generate_synthetic(spec, out_dir):
    """Write a synthetic dataset described by `spec` (a dict); returns the manifest path."""
    return _namegate._generate_synthetic(_json.dumps(spec), str(out_dir))


def crossval(config, model=None, jobs=1, out_dir=None):
    """Leave-one-speaker-out run for a configuration file; returns the report dict."""
    out = None if out_dir is None else str(out_dir)
    return _json.loads(_namegate._crossval(str(config), model or "", jobs, out))


def gradcheck(seeds=range(10)):
    """Finite-difference gradient suite over the given seeds."""
    return _json.loads(_namegate._gradcheck(list(seeds)))


def metrics(truth, predicted, classes):
    """Accuracy and per-class/macro P, R, F1 for integer class labels."""
    return _json.loads(_namegate._metrics(list(truth), list(predicted), classes))
