#pragma once

#include <vector>

#include "privsim/matrix.hpp"
#include "privsim/model.hpp"
#include "privsim/rng.hpp"

namespace privsim {

/// Per-sample coefficients of the degree-2 surrogate loss around zero
/// pre-activation: loss(g) ~= k0 + k1*g + k2*g^2 with g the output-layer
/// pre-activation.
struct TaylorCoeffs {
    double k0, k1, k2;
};

/// Squared-error surrogate, y in [0,1]:
/// k0 = y^2 - y + 1/4, k1 = (1 - 2y)/4, k2 = 1/16.
TaylorCoeffs taylor_coeffs_regression(double y);

/// Per-class binary cross-entropy surrogate, y in {0,1}:
/// k0 = log 2, k1 = 1/2 - y, k2 = 1/8.
TaylorCoeffs taylor_coeffs_classification(double y);

/// Batch-aggregated coefficients of the surrogate objective, viewed as a
/// polynomial in the output-layer weights:
///   c0          degree-0 total,
///   c1 (b x o)  degree-1 coefficient per weight entry,
///   c2[j] (b x b, symmetric) per-class quadratic form; the polynomial
///   coefficient of the monomial W_pj*W_qj (p < q) is c2[j](p,q)+c2[j](q,p).
struct PolyLossCoeffs {
    double c0 = 0.0;
    Matrix c1;
    std::vector<Matrix> c2;
    Task task = Task::Regression;
    std::size_t samples = 0;
};

/// H: n x b hidden activations feeding the output layer (all entries in
/// [0,1]); Y: n x o targets (regression o = 1 with y in [0,1];
/// classification o = M one-hot). Throws on an empty batch.
PolyLossCoeffs batch_coeffs(const Matrix& H, const Matrix& Y, Task task);

/// One-hot expansion of class-index labels.
Matrix one_hot(const std::vector<double>& labels, std::size_t classes);

/// Worst-case L1 change of the aggregated coefficients over neighboring
/// batches. Regression: b/2 + b^2/8; classification: M*(b + b^2/4); b is
/// the width feeding the output layer (the deepest hidden layer's width
/// when several are stacked).
struct Sensitivity {
    double value = 0.0;
    Task task = Task::Regression;
};
Sensitivity sensitivity(const Architecture& arch);

/// Adds independent Laplace(delta/eps2) noise to every degree-1 and
/// degree-2 monomial coefficient. Off-diagonal quadratic noise is split
/// evenly across the two mirrored storage entries so the polynomial's
/// monomial coefficient receives exactly one draw and c2 stays symmetric.
/// c0 multiplies no weight monomial and is left unperturbed.
PolyLossCoeffs perturb_coeffs(const PolyLossCoeffs& c, const Sensitivity& delta, double eps2,
                              Rng& rng);

/// Value of the coefficient polynomial at the output-layer weights W
/// (b x o).
double poly_loss_value(const PolyLossCoeffs& c, const Matrix& W);

/// Surrogate loss of a batch evaluated directly sample-by-sample (no
/// aggregation); reference path for the coefficient aggregation.
double direct_loss_value(const Matrix& H, const Matrix& Y, const Matrix& W, Task task);

struct Gradients {
    std::vector<Matrix> dW;  // aligned with ModelParams::layers
};

/// Gradients of the perturbed objective. The output layer differentiates
/// the released polynomial: dWout = c1 + (c2 + c2^T) Wout per class.
/// Earlier layers differentiate the data-dependent part of the loss by the
/// chain rule through the hidden activations (the additive coefficient
/// noise does not depend on them); sub-gradient 0 at ReLU kinks and clip
/// boundaries.
Gradients grad(const PolyLossCoeffs& cbar, const Architecture& arch, const ModelParams& params,
               const Matrix& X, const Matrix& Y);

}  // namespace privsim
