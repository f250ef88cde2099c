"""GAF-encoded candlestick classification with local-search adversarial sampling.

A numpy-only toolkit: encode OHLC windows as Gramian Angular Summation
Fields, label them with eight rule-based candlestick patterns, train a small
CNN, collect perturbed examples the model still classifies correctly, and
compare clean against merged (clean plus adversarial) training.
"""

from .attack import AttackConfig, attack_eval, perturb_diagonals, sample_adversarial, sample_pool
from .candlestick import PatternLabel, RuleParams, detect_trend, match_pattern, rule_check
from .cnn import CnnModel, ConstantModel, TrainConfig, forward, load_model, predict, save_model
from .cnn import train
from .config import Config, ExperimentConfig, MergeConfig, load_config
from .datagen import GeneratorConfig, build_dataset, load_ohlc_csv, scan_and_label
from .datagen import synthesize_window
from .dataset import Dataset, load, save
from .gaf import decode_diagonal, encode, encode_window, normalize, to_polar
from .pipeline import merge_datasets, run_experiment
from .stats import paired_ttest

__version__ = "0.1.0"

__all__ = [
    "AttackConfig",
    "CnnModel",
    "Config",
    "ConstantModel",
    "Dataset",
    "ExperimentConfig",
    "GeneratorConfig",
    "MergeConfig",
    "PatternLabel",
    "RuleParams",
    "TrainConfig",
    "attack_eval",
    "build_dataset",
    "decode_diagonal",
    "detect_trend",
    "encode",
    "encode_window",
    "forward",
    "load",
    "load_config",
    "load_model",
    "load_ohlc_csv",
    "match_pattern",
    "merge_datasets",
    "normalize",
    "paired_ttest",
    "perturb_diagonals",
    "predict",
    "rule_check",
    "run_experiment",
    "sample_adversarial",
    "sample_pool",
    "save",
    "save_model",
    "scan_and_label",
    "synthesize_window",
    "to_polar",
    "train",
]
