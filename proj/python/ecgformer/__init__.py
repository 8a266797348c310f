"""Python surface of the ecgformer C++ core."""

from ecgformer._core import (
    challenge_score,
    conv1d,
    design_bandpass,
    fbeta,
    forward_scores,
    gbeta,
    gradient_suite,
    layer_norm,
    macro_auc,
    matmul,
    preprocess,
    resample,
    softmax,
    synth_recording,
)

__all__ = [
    "challenge_score",
    "conv1d",
    "design_bandpass",
    "fbeta",
    "forward_scores",
    "gbeta",
    "gradient_suite",
    "layer_norm",
    "macro_auc",
    "matmul",
    "preprocess",
    "resample",
    "softmax",
    "synth_recording",
]
