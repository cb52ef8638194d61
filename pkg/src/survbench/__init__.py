"""Benchmark survival learners on simulated clustered data with missing covariates."""

from .core import Dataset, SeededRng, SurvivalOutcome, column_stats, dataset_split
from .simulate import SimConfig, build_covariance, generate_dataset, interaction_f
from .missingness import AmputationSpec, ampute, ampute_mcar, ampute_self_masking, missing_fraction
from .impute import IterativeImputer, KNNImputer, MedianImputer, make_imputer
from .metrics import harrell_c, kaplan_meier, nelson_aalen, uno_c
from .model_cox import cox_fit, cox_risk
from .model_rsf import RsfConfig, rsf_fit, rsf_risk
from .model_neural import MlpConfig, train as train_mlp
from .bench import BenchConfig, kfold_indices, run_grid, run_scenario, summarize

__version__ = "0.1.0"

__all__ = [
    "Dataset", "SeededRng", "SurvivalOutcome", "column_stats", "dataset_split",
    "SimConfig", "build_covariance", "generate_dataset", "interaction_f",
    "AmputationSpec", "ampute", "ampute_mcar", "ampute_self_masking", "missing_fraction",
    "IterativeImputer", "KNNImputer", "MedianImputer", "make_imputer",
    "harrell_c", "kaplan_meier", "nelson_aalen", "uno_c",
    "cox_fit", "cox_risk", "RsfConfig", "rsf_fit", "rsf_risk", "MlpConfig", "train_mlp",
    "BenchConfig", "kfold_indices", "run_grid", "run_scenario", "summarize",
]
