#pragma once

#include <vector>

#include "privsim/dataset.hpp"

namespace privsim {

/// Mean relative error (1/n) sum |z_i - y_i| / y_i. Every y_i must be at
/// least y_floor (> 0); the dataset preparation guarantees the floor.
double mre(const std::vector<double>& predictions, const std::vector<double>& labels,
           double y_floor = kDefaultYFloor);

/// Correct count / n over class labels; throws on empty or length mismatch.
double accuracy(const std::vector<std::size_t>& predicted, const std::vector<std::size_t>& truth);

}  // namespace privsim
