"""Python access to the SEAL toolkit (label-embedding alignment for activity recognition)."""

import json

from ._core import (
    SealError,
    expected_improvement,
    extract_features,
    fallback_embed,
    fourier_resample,
    gp_posterior,
    label_macro_f1,
    load_embeddings,
    mcc,
    predict,
    run_cli,
)
from ._core import synth_generate as _synth_generate

__all__ = [
    "SealError",
    "expected_improvement",
    "extract_features",
    "fallback_embed",
    "fourier_resample",
    "gp_posterior",
    "label_macro_f1",
    "load_embeddings",
    "mcc",
    "predict",
    "run_cli",
    "synth_generate",
]


def synth_generate(spec, out_dir):
    """Generate a synthetic dataset from a spec dict into out_dir; returns the instance count."""
    return _synth_generate(json.dumps(spec), str(out_dir))
