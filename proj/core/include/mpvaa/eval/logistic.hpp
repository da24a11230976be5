#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mpvaa::eval {

// Full-batch gradient descent on the mean logistic loss plus l2/2 * |w|^2 over
// standardized features. Stops when the gradient's max-norm drops below
// `tolerance` or after `max_iterations`.
struct LogisticConfig {
  double l2 = 1e-4;
  double learning_rate = 0.5;
  std::size_t max_iterations = 5000;
  double tolerance = 1e-6;
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> mean;   // feature standardization fitted on the training rows
  std::vector<double> scale;  // 1 / std, 1 for constant features
  std::size_t iterations = 0;

  // P(y = 1 | x).
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const std::vector<std::vector<double>>& rows) const;
};

// ContractError when the rows are ragged, empty, or hold a single class.
LogisticModel train_logistic(const std::vector<std::vector<double>>& rows,
                             std::span<const int> labels, const LogisticConfig& config = {});

}  // namespace mpvaa::eval
