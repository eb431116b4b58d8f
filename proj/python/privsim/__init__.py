"""Privacy-preserving collaborative-learning simulator (C++ core)."""

from ._privsim import (
    Matrix,
    Rng,
    accuracy,
    exp_sample,
    laplace_icdf,
    matmul,
    mre,
    run_simulation_json,
    sample_gaussian,
    sample_laplace,
    sample_uniform,
    selection_probabilities,
    sensitivity,
    taylor_coeffs_classification,
    taylor_coeffs_regression,
    utility_sensitivity,
)

__version__ = "0.1.0"

__all__ = [
    "Matrix",
    "Rng",
    "accuracy",
    "exp_sample",
    "laplace_icdf",
    "matmul",
    "mre",
    "run_simulation_json",
    "sample_gaussian",
    "sample_laplace",
    "sample_uniform",
    "selection_probabilities",
    "sensitivity",
    "taylor_coeffs_classification",
    "taylor_coeffs_regression",
    "utility_sensitivity",
    "__version__",
]
