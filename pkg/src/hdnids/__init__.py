"""Hyperdimensional computing classifier for NSL-KDD style network records.

Records are encoded into high-dimensional binary vectors by binding each
feature's position vector with its quantized value vector and bundling
the results. Classes are represented by accumulated class vectors,
refined with an iterative miss/match update, and queried by cosine
similarity.
"""

from .hypervector import (
    AccumulatorVector,
    Hypervector,
    RandomSource,
    accumulate,
    cosine,
    flip_bits,
    hamming,
    popcount,
    random_hv,
    xor,
)
from .codebook import (
    Codebook,
    FeatureSchema,
    FeatureSpec,
    build_codebook,
    level_index,
    lookup_level,
)
from .dataset import (
    CLASS_NAMES,
    COLUMN_NAMES,
    NUM_FEATURES,
    LabelMap,
    ParseError,
    RawRecord,
    SplitSpec,
    UnknownLabelError,
    class_indices,
    infer_schema,
    load_label_map,
    map_label,
    parse_file,
    parse_line,
    split,
)
from .encoding import (
    EncodedDataset,
    EncodedRecord,
    binarize,
    default_threshold,
    encode,
    encode_binary,
    encode_dataset,
)
from .model import (
    ClassModel,
    CorruptModelError,
    Hyperparams,
    Prediction,
    load_model,
    predict,
    predict_batch,
    retrain,
    save_model,
    train_initial,
)
from .evaluation import (
    ConfusionMatrix,
    EvaluationReport,
    evaluate,
    render_report,
)

__version__ = "0.1.0"

__all__ = [
    "AccumulatorVector", "Hypervector", "RandomSource", "accumulate", "cosine",
    "flip_bits", "hamming", "popcount", "random_hv", "xor",
    "Codebook", "FeatureSchema", "FeatureSpec", "build_codebook", "level_index",
    "lookup_level",
    "CLASS_NAMES", "COLUMN_NAMES", "NUM_FEATURES", "LabelMap", "ParseError",
    "RawRecord", "SplitSpec", "UnknownLabelError", "class_indices", "infer_schema",
    "load_label_map", "map_label", "parse_file", "parse_line", "split",
    "EncodedDataset", "EncodedRecord", "binarize", "default_threshold", "encode",
    "encode_binary", "encode_dataset",
    "ClassModel", "CorruptModelError", "Hyperparams", "Prediction", "load_model",
    "predict", "predict_batch", "retrain", "save_model", "train_initial",
    "ConfusionMatrix", "EvaluationReport", "evaluate", "render_report",
    "__version__",
]
