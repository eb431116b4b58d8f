#include "privsim/dp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace privsim {

double regression_score_term(double z, double y) {
    double zp = std::clamp(z, 0.0, 3.0 * y);
    // the quotient can round a hair past 2; keep the documented range exact
    return std::clamp(1.0 - std::abs(zp - y) / y, -1.0, 1.0);
}

double score_regression(const Architecture& arch, const ModelParams& params,
                        const Dataset& validation) {
    if (validation.n() == 0) throw std::invalid_argument("score_regression: empty validation set");
    Matrix z = forward(arch, params, validation.features);
    double sum = 0.0;
    for (std::size_t i = 0; i < validation.n(); ++i)
        sum += regression_score_term(z(i, 0), validation.labels[i]);
    return sum / static_cast<double>(validation.n());
}

double score_classification(const Architecture& arch, const ModelParams& params,
                            const Dataset& validation, ClfScoreSemantics semantics) {
    if (validation.n() == 0)
        throw std::invalid_argument("score_classification: empty validation set");
    Matrix z = forward(arch, params, validation.features);
    const std::size_t m = z.cols();
    std::size_t correct = 0;
    for (std::size_t i = 0; i < validation.n(); ++i) {
        auto truth = static_cast<std::size_t>(validation.labels[i]);
        if (semantics == ClfScoreSemantics::Argmax) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < m; ++j)
                if (z(i, j) > z(i, best)) best = j;
            if (best == truth) ++correct;
        } else {
            bool ok = true;
            for (std::size_t j = 0; j < m; ++j) {
                bool hot = z(i, j) >= 0.5;
                if (hot != (j == truth)) {
                    ok = false;
                    break;
                }
            }
            if (ok) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(validation.n());
}

double utility_sensitivity(Task task) {
    return task == Task::Regression ? 1.0 : 0.5;
}

std::vector<double> selection_probabilities(const std::vector<double>& scores, double eps1,
                                            std::size_t k, double du) {
    const double coef = eps1 / (2.0 * static_cast<double>(k) * du);
    double max_lw = -std::numeric_limits<double>::infinity();
    std::vector<double> lw(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        lw[i] = coef * scores[i];
        max_lw = std::max(max_lw, lw[i]);
    }
    double total = 0.0;
    for (double& w : lw) {
        w = std::exp(w - max_lw);
        total += w;
    }
    for (double& w : lw) w /= total;
    return lw;
}

std::vector<std::size_t> exp_sample(const std::vector<double>& scores, std::size_t k, double eps1,
                                    double du, Rng& rng) {
    const std::size_t m = scores.size();
    if (k < 1) throw std::invalid_argument("exp_sample: K must be >= 1");
    if (k > m)
        throw std::invalid_argument("exp_sample: K (" + std::to_string(k) +
                                    ") exceeds candidate count (" + std::to_string(m) + ")");
    if (eps1 <= 0.0) throw std::invalid_argument("exp_sample: eps1 must be > 0");
    if (du <= 0.0) throw std::invalid_argument("exp_sample: du must be > 0");

    std::vector<std::size_t> remaining(m);
    for (std::size_t i = 0; i < m; ++i) remaining[i] = i;
    std::vector<std::size_t> chosen;
    chosen.reserve(k);
    for (std::size_t draw = 0; draw < k; ++draw) {
        std::vector<double> sub(remaining.size());
        for (std::size_t i = 0; i < remaining.size(); ++i) sub[i] = scores[remaining[i]];
        std::vector<double> p = selection_probabilities(sub, eps1, k, du);
        double u = rng.uniform01();
        std::size_t pick = remaining.size() - 1;
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            acc += p[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        chosen.push_back(remaining[pick]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    return chosen;
}

LedgerReport ledger_report(const BudgetLedger& ledger, std::size_t epochs) {
    LedgerReport r;
    r.per_epoch = std::max(ledger.eps1, ledger.eps2);
    r.epochs = epochs;
    r.cumulative = static_cast<double>(epochs) * r.per_epoch;
    return r;
}

}  // namespace privsim
