#include "privsim/objective.hpp"

#include <cmath>
#include <stdexcept>

namespace privsim {

TaylorCoeffs taylor_coeffs_regression(double y) {
    return {y * y - y + 0.25, (1.0 - 2.0 * y) / 4.0, 1.0 / 16.0};
}

TaylorCoeffs taylor_coeffs_classification(double y) {
    return {std::log(2.0), 0.5 - y, 1.0 / 8.0};
}

Matrix one_hot(const std::vector<double>& labels, std::size_t classes) {
    Matrix y(labels.size(), classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        auto k = static_cast<std::size_t>(labels[i]);
        if (static_cast<double>(k) != labels[i] || k >= classes)
            throw std::invalid_argument("one_hot: label " + std::to_string(labels[i]) +
                                        " is not a class index below " + std::to_string(classes));
        y(i, k) = 1.0;
    }
    return y;
}

PolyLossCoeffs batch_coeffs(const Matrix& H, const Matrix& Y, Task task) {
    const std::size_t n = H.rows();
    const std::size_t b = H.cols();
    const std::size_t o = Y.cols();
    if (n == 0) throw std::invalid_argument("batch_coeffs: empty batch");
    if (Y.rows() != n) throw std::invalid_argument("batch_coeffs: H/Y row mismatch");
    if (task == Task::Regression && o != 1)
        throw std::invalid_argument("batch_coeffs: regression expects one target column");

    PolyLossCoeffs c;
    c.task = task;
    c.samples = n;
    c.c1 = Matrix(b, o);
    c.c2.assign(o, Matrix(b, b));

    double k2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < o; ++j) {
            TaylorCoeffs k = task == Task::Regression ? taylor_coeffs_regression(Y(i, j))
                                                      : taylor_coeffs_classification(Y(i, j));
            c.c0 += k.k0;
            k2 = k.k2;  // constant across samples and classes
            for (std::size_t p = 0; p < b; ++p) c.c1(p, j) += k.k1 * H(i, p);
        }
        // the quadratic form is label-free and shared across classes
        for (std::size_t p = 0; p < b; ++p) {
            const double hp = H(i, p);
            if (hp == 0.0) continue;
            for (std::size_t q = p; q < b; ++q) c.c2[0](p, q) += hp * H(i, q);
        }
    }
    for (std::size_t p = 0; p < b; ++p)
        for (std::size_t q = p; q < b; ++q) {
            double v = c.c2[0](p, q) * k2;
            c.c2[0](p, q) = v;
            c.c2[0](q, p) = v;
        }
    for (std::size_t j = 1; j < o; ++j) c.c2[j] = c.c2[0];
    return c;
}

Sensitivity sensitivity(const Architecture& arch) {
    const double b = static_cast<double>(arch.last_hidden_width());
    Sensitivity s;
    s.task = arch.task;
    if (arch.task == Task::Regression) {
        s.value = 0.5 * b + b * b / 8.0;
    } else {
        s.value = static_cast<double>(arch.output_dim) * (b + b * b / 4.0);
    }
    return s;
}

PolyLossCoeffs perturb_coeffs(const PolyLossCoeffs& c, const Sensitivity& delta, double eps2,
                              Rng& rng) {
    if (eps2 <= 0.0) throw std::invalid_argument("perturb_coeffs: eps2 must be > 0");
    const double scale = delta.value / eps2;
    PolyLossCoeffs out = c;
    const std::size_t b = c.c1.rows();
    const std::size_t o = c.c1.cols();
    for (std::size_t j = 0; j < o; ++j)
        for (std::size_t p = 0; p < b; ++p) out.c1(p, j) += sample_laplace(rng, scale);
    for (std::size_t j = 0; j < o; ++j) {
        for (std::size_t p = 0; p < b; ++p) {
            for (std::size_t q = p; q < b; ++q) {
                double noise = sample_laplace(rng, scale);
                if (p == q) {
                    out.c2[j](p, p) += noise;
                } else {
                    out.c2[j](p, q) += noise / 2.0;
                    out.c2[j](q, p) += noise / 2.0;
                }
            }
        }
    }
    return out;
}

double poly_loss_value(const PolyLossCoeffs& c, const Matrix& W) {
    if (W.rows() != c.c1.rows() || W.cols() != c.c1.cols())
        throw std::invalid_argument("poly_loss_value: weight shape " + shape_str(W) +
                                    " does not match coefficients " + shape_str(c.c1));
    double v = c.c0;
    const std::size_t b = W.rows(), o = W.cols();
    for (std::size_t j = 0; j < o; ++j) {
        for (std::size_t p = 0; p < b; ++p) {
            v += c.c1(p, j) * W(p, j);
            for (std::size_t q = 0; q < b; ++q) v += c.c2[j](p, q) * W(p, j) * W(q, j);
        }
    }
    return v;
}

double direct_loss_value(const Matrix& H, const Matrix& Y, const Matrix& W, Task task) {
    Matrix G = matmul(H, W);
    double v = 0.0;
    for (std::size_t i = 0; i < G.rows(); ++i)
        for (std::size_t j = 0; j < G.cols(); ++j) {
            TaylorCoeffs k = task == Task::Regression ? taylor_coeffs_regression(Y(i, j))
                                                      : taylor_coeffs_classification(Y(i, j));
            double g = G(i, j);
            v += k.k0 + k.k1 * g + k.k2 * g * g;
        }
    return v;
}

Gradients grad(const PolyLossCoeffs& cbar, const Architecture& arch, const ModelParams& params,
               const Matrix& X, const Matrix& Y) {
    const Matrix& Wout = params.layers.back();
    if (Wout.rows() != cbar.c1.rows() || Wout.cols() != cbar.c1.cols())
        throw std::invalid_argument("grad: output weights " + shape_str(Wout) +
                                    " do not match coefficients " + shape_str(cbar.c1));

    Gradients g;
    g.dW.resize(params.layers.size());

    // Output layer: gradient of the released polynomial.
    Matrix dWout(Wout.rows(), Wout.cols());
    for (std::size_t j = 0; j < Wout.cols(); ++j)
        for (std::size_t p = 0; p < Wout.rows(); ++p) {
            double v = cbar.c1(p, j);
            for (std::size_t q = 0; q < Wout.rows(); ++q)
                v += (cbar.c2[j](p, q) + cbar.c2[j](q, p)) * Wout(q, j);
            dWout(p, j) = v;
        }
    g.dW.back() = std::move(dWout);

    // Hidden layers (regression path): chain rule through the clipped-ReLU
    // stack on the data-dependent loss. Classification has no trained
    // hidden layers.
    if (params.layers.size() > 1) {
        const std::size_t L = params.layers.size() - 1;  // number of hidden layers
        const std::size_t n = X.rows();
        if (Y.rows() != n) throw std::invalid_argument("grad: X/Y row mismatch");

        // forward, keeping pre-activations
        std::vector<Matrix> acts(L + 1);   // acts[0] = X, acts[l] = clipped relu out
        std::vector<Matrix> preact(L);
        acts[0] = X;
        for (std::size_t l = 0; l < L; ++l) {
            preact[l] = matmul(acts[l], params.layers[l]);
            Matrix a = preact[l];
            for (double& v : a.data()) v = std::clamp(v, 0.0, 1.0);
            acts[l + 1] = std::move(a);
        }
        const Matrix& H = acts[L];
        Matrix G = matmul(H, Wout);  // n x o pre-activations of the output layer

        // dL/dH from the per-sample surrogate
        Matrix delta(n, H.cols());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < Wout.cols(); ++j) {
                TaylorCoeffs k = cbar.task == Task::Regression
                                     ? taylor_coeffs_regression(Y(i, j))
                                     : taylor_coeffs_classification(Y(i, j));
                double w = k.k1 + 2.0 * k.k2 * G(i, j);
                for (std::size_t p = 0; p < H.cols(); ++p) delta(i, p) += w * Wout(p, j);
            }

        for (std::size_t l = L; l-- > 0;) {
            // gate: derivative of clip(relu(s)) is 1 on (0,1), 0 elsewhere
            Matrix gated = delta;
            for (std::size_t i = 0; i < gated.rows(); ++i)
                for (std::size_t p = 0; p < gated.cols(); ++p) {
                    double s = preact[l](i, p);
                    if (!(s > 0.0 && s < 1.0)) gated(i, p) = 0.0;
                }
            g.dW[l] = matmul(transpose(acts[l]), gated);
            if (l > 0) delta = matmul(gated, transpose(params.layers[l]));
        }
    }
    return g;
}

}  // namespace privsim
