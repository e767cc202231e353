"""Mutual information surprise: estimators, test bounds, reaction policy and benchmarks."""
from .engine import MisConfig, MisReport, classify, mis_bounds, mis_statistic
from .estimators import ContingencyTable, Discretizer, mle_entropy, mle_mutual_information

__all__ = ["ContingencyTable", "Discretizer", "MisConfig", "MisReport", "classify",
           "mis_bounds", "mis_statistic", "mle_entropy", "mle_mutual_information"]
__version__ = "0.1.0"
