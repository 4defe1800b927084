"""Prosody contour classification: F0 ingestion, from-scratch ConvNet and
LSTM classifiers, cross-validated evaluation, and a synthetic corpus
generator."""

from .contour_data import (
    FRAME_STEP,
    PADDED_LEN,
    ClassLabel,
    Dataset,
    F0Contour,
    PaddedSample,
    contour_to_sample,
    load_dataset,
    load_manifest,
    normalize_frames,
    pad_to_fixed,
    parse_contour_csv,
    parse_pitchtier,
    resample_contour,
    split_kfold,
)
from .errors import DataError, NumericError, PccError
from .models import (
    ConvNetConfig,
    LstmConfig,
    ModelBundle,
    build_convnet,
    build_lstm,
    classify,
    load_model,
    predict,
    save_model,
)
from .synth import SynthConfig, gen_corpus
from .training import TrainConfig, cross_validate, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "FRAME_STEP",
    "PADDED_LEN",
    "ClassLabel",
    "ConvNetConfig",
    "DataError",
    "Dataset",
    "F0Contour",
    "LstmConfig",
    "ModelBundle",
    "NumericError",
    "PaddedSample",
    "PccError",
    "SynthConfig",
    "TrainConfig",
    "build_convnet",
    "build_lstm",
    "classify",
    "contour_to_sample",
    "cross_validate",
    "evaluate",
    "gen_corpus",
    "load_dataset",
    "load_manifest",
    "load_model",
    "normalize_frames",
    "pad_to_fixed",
    "parse_contour_csv",
    "parse_pitchtier",
    "predict",
    "resample_contour",
    "save_model",
    "split_kfold",
    "train",
    "__version__",
]
