"""Variable-length joint source-channel coding with feedback over DMCs."""

from .channel import Dmc, bec, bsc, capacity, induced_output_dist, validate_and_classify
from .source import SourceSpec, assumption_thresholds, describe, iid_uniform, n_of_t, sample_prefix

__all__ = [
    "Dmc",
    "SourceSpec",
    "assumption_thresholds",
    "bec",
    "bsc",
    "capacity",
    "describe",
    "iid_uniform",
    "induced_output_dist",
    "n_of_t",
    "sample_prefix",
    "validate_and_classify",
]

__version__ = "0.1.0"
