"""Subsampled Newton, Newton-Sketch and SVRG for regularized logistic regression."""

from ssnsketch.data import Dataset, SplitDataset, read_libsvm, split, synth_gen, write_libsvm
from ssnsketch.problem import LogisticModel, OracleCounter
from ssnsketch.methods import (
    MethodConfig,
    NewtonSketch,
    RunTrace,
    SsnCg,
    SsnSgi,
    Svrg,
    run_method,
    run_newton_sketch,
    run_reference_newton,
    run_ssn_cg,
    run_ssn_sgi,
    run_svrg,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "SplitDataset",
    "read_libsvm",
    "write_libsvm",
    "split",
    "synth_gen",
    "LogisticModel",
    "OracleCounter",
    "MethodConfig",
    "SsnCg",
    "NewtonSketch",
    "SsnSgi",
    "Svrg",
    "RunTrace",
    "run_method",
    "run_ssn_cg",
    "run_newton_sketch",
    "run_ssn_sgi",
    "run_svrg",
    "run_reference_newton",
]
