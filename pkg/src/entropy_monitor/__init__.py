"""Estimate per-domain LLM accuracy from the entropy profile of decoding traces."""

from .classifiers import CorrectnessModel, TrainConfig, train_model
from .corpus import FeatureTable, extract_features, load_feature_caches
from .estimation import evaluate_holdout
from .features import FEATURE_NAMES, summarize
from .sweep import SweepConfig, aggregate, run_sweep
from .synth import SynthSpec, evenly_spaced_spec, generate
from .traces import DecodingTrace, TopKStep, entropy_trajectory, parse_traces, truncated_entropy

__version__ = "0.1.0"

__all__ = [
    "FEATURE_NAMES",
    "CorrectnessModel",
    "DecodingTrace",
    "FeatureTable",
    "SweepConfig",
    "SynthSpec",
    "TopKStep",
    "TrainConfig",
    "aggregate",
    "entropy_trajectory",
    "evaluate_holdout",
    "evenly_spaced_spec",
    "extract_features",
    "generate",
    "load_feature_caches",
    "parse_traces",
    "run_sweep",
    "summarize",
    "train_model",
    "truncated_entropy",
]
