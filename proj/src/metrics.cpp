#include "privsim/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace privsim {

double mre(const std::vector<double>& predictions, const std::vector<double>& labels,
           double y_floor) {
    if (labels.empty()) throw std::invalid_argument("mre: empty label vector");
    if (predictions.size() != labels.size())
        throw std::invalid_argument("mre: length mismatch " + std::to_string(predictions.size()) +
                                    " vs " + std::to_string(labels.size()));
    if (y_floor <= 0.0) throw std::invalid_argument("mre: y_floor must be > 0");
    double sum = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < y_floor)
            throw std::invalid_argument("mre: label " + std::to_string(labels[i]) +
                                        " below floor " + std::to_string(y_floor));
        sum += std::abs(predictions[i] - labels[i]) / labels[i];
    }
    return sum / static_cast<double>(labels.size());
}

double accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth) {
    if (truth.empty()) throw std::invalid_argument("accuracy: empty label vector");
    if (predicted.size() != truth.size())
        throw std::invalid_argument("accuracy: length mismatch");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        if (predicted[i] == truth[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(truth.size());
}

}  // namespace privsim
