"""Benchmark harness: datasets, solving accuracy, perturbation study, efficiency, oracles."""

from .dataset import load_dataset
from .efficiency import efficiency_table
from .oracles import tsp_tour_oracle
from .perturb import OPS, PerturbationSpec, perturb_model
from .scoring import BenchReport, InstanceResult, result_from_record, score_solving_accuracy, write_bench_report
from .study import Confusion, StudyPositive, StudyResult, positives_from_models, verifier_study
from .synthetic import synthetic_positives

__all__ = [
    "load_dataset", "efficiency_table", "tsp_tour_oracle", "OPS", "PerturbationSpec", "perturb_model",
    "BenchReport", "InstanceResult", "result_from_record", "score_solving_accuracy", "write_bench_report",
    "Confusion", "StudyPositive", "StudyResult", "positives_from_models", "verifier_study", "synthetic_positives",
]
