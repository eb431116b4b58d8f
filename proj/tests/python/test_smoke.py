"""Smoke tests for the python module built from the C++ core."""

import json
import math

import privsim


def test_version():
    assert privsim.__version__


def test_matmul():
    a = privsim.Matrix([[1.0, 2.0]])
    b = privsim.Matrix([[3.0], [4.0]])
    out = privsim.matmul(a, b)
    assert out.shape == (1, 1)
    assert out.tolist() == [[11.0]]


def test_laplace_quantiles():
    assert privsim.laplace_icdf(0.5, 1.0) == 0.0
    assert math.isclose(abs(privsim.laplace_icdf(0.25, 1.0)), math.log(2), rel_tol=1e-12)


def test_rng_determinism():
    a, b = privsim.Rng(7), privsim.Rng(7)
    assert [a.uniform01() for _ in range(10)] == [b.uniform01() for _ in range(10)]


def test_taylor_coefficients():
    k0, k1, k2 = privsim.taylor_coeffs_regression(0.0)
    assert (k0, k1, k2) == (0.25, 0.25, 1.0 / 16)
    k0, k1, _ = privsim.taylor_coeffs_classification(1.0)
    assert math.isclose(k0, math.log(2)) and k1 == -0.5


def test_sensitivity_values():
    assert privsim.sensitivity("regression", 80) == 840.0
    assert privsim.sensitivity("classification", 128, 10) == 42240.0


def test_exp_sample():
    rng = privsim.Rng(3)
    picks = privsim.exp_sample([0.9, 0.1, 0.5], 2, 1.0, 1.0, rng)
    assert len(picks) == 2 and picks[0] != picks[1]
    probs = privsim.selection_probabilities([1.0, 0.0], 2.0, 1, 1.0)
    assert math.isclose(probs[0], math.e / (math.e + 1), rel_tol=1e-12)


def test_metrics():
    assert math.isclose(privsim.mre([0.6], [0.5]), 0.2, rel_tol=1e-12)
    assert privsim.accuracy([1, 2, 3, 4], [1, 2, 3, 0]) == 0.75


def test_run_simulation_deterministic():
    config = {
        "seed": 11,
        "dataset": {"synthetic": {"n": 300, "d": 3, "noise_sd": 0.02}},
        "architecture": {"task": "regression", "hidden": [3]},
        "participants": {"n": 3},
        "partition": {"validation_size": 30, "test_size": 30},
        "server": {"m": 2, "k": 1},
        "training": {"iterations": 2, "batch_size": 32, "learning_rate": 0.005},
        "termination": {"rounds": 3},
    }
    first = json.loads(privsim.run_simulation_json(json.dumps(config)))
    second = json.loads(privsim.run_simulation_json(json.dumps(config)))
    assert first["rounds"] == 3
    assert first["digest"] == second["digest"]
    assert first["records"] == second["records"]
