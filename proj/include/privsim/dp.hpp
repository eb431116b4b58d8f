#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "privsim/dataset.hpp"
#include "privsim/model.hpp"
#include "privsim/rng.hpp"

namespace privsim {

/// Per-sample regression score term: 1 - |z' - y| / y with
/// z' = clamp(z, 0, 3y). The clamp keeps every term in [-1, 1].
double regression_score_term(double z, double y);

/// Mean score of a model over the server's validation set; in [-1, 1].
/// Throws on an empty validation set.
double score_regression(const Architecture& arch, const ModelParams& params,
                        const Dataset& validation);

enum class ClfScoreSemantics {
    Argmax,             // predicted class = argmax of per-class scores
    PerClassThreshold,  // every per-class sigmoid thresholded at 0.5 must match
};

/// Correct-prediction rate over the validation set; in [0, 1].
double score_classification(const Architecture& arch, const ModelParams& params,
                            const Dataset& validation,
                            ClfScoreSemantics semantics = ClfScoreSemantics::Argmax);

/// Utility-score sensitivity: 1 for regression, 1/2 for classification.
double utility_sensitivity(Task task);

/// Selection probabilities for one draw over the listed scores:
/// p_m proportional to exp(eps1 * u_m / (2 K du)), computed in log space
/// with max subtraction.
std::vector<double> selection_probabilities(const std::vector<double>& scores, double eps1,
                                            std::size_t k, double du);

/// K sequential draws without replacement, remaining weights renormalized
/// after each draw; each draw is charged eps1/K. Returns distinct indices
/// into `scores` in draw order. Throws unless 1 <= K <= M and eps1 > 0.
std::vector<std::size_t> exp_sample(const std::vector<double>& scores, std::size_t k, double eps1,
                                    double du, Rng& rng);

struct LedgerEvent {
    std::size_t epoch;      // 1-based epoch the consumption falls in
    std::string mechanism;  // "selection" or "objective"
    double eps;
};

/// Per-epoch privacy-consumption log. The reported guarantee is
/// max(eps1, eps2) per epoch; sequential composition across epochs gives
/// epochs * max(eps1, eps2).
struct BudgetLedger {
    double eps1 = 0.0;
    double eps2 = 0.0;
    std::vector<LedgerEvent> events;
};

struct LedgerReport {
    double per_epoch = 0.0;
    double cumulative = 0.0;
    std::size_t epochs = 0;
};

LedgerReport ledger_report(const BudgetLedger& ledger, std::size_t epochs);

}  // namespace privsim
