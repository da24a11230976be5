#include "mpvaa/eval/logistic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mpvaa/errors.hpp"

namespace mpvaa::eval {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double LogisticModel::predict(std::span<const double> x) const {
  if (x.size() != weights.size()) {
    throw ShapeError("logistic: expected " + std::to_string(weights.size()) + " features, got " +
                     std::to_string(x.size()));
  }
  double z = bias;
  for (std::size_t j = 0; j < x.size(); ++j) z += weights[j] * (x[j] - mean[j]) * scale[j];
  return sigmoid(z);
}

std::vector<double> LogisticModel::predict(const std::vector<std::vector<double>>& rows) const {
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(predict(r));
  return out;
}

LogisticModel train_logistic(const std::vector<std::vector<double>>& rows,
                             std::span<const int> labels, const LogisticConfig& config) {
  if (rows.empty()) throw ContractError("train_logistic: no training rows");
  if (rows.size() != labels.size()) throw ContractError("train_logistic: rows and labels differ in count");
  const std::size_t d = rows[0].size();
  for (const auto& r : rows) {
    if (r.size() != d) throw ContractError("train_logistic: ragged feature rows");
  }
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw ContractError("train_logistic: labels must be 0 or 1");
    pos += y;
  }
  if (pos == 0 || pos == rows.size()) {
    throw ContractError("train_logistic: degenerate split with a single class");
  }
  const std::size_t n = rows.size();
  const double inv_n = 1.0 / static_cast<double>(n);

  LogisticModel m;
  m.mean.assign(d, 0.0);
  m.scale.assign(d, 1.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < d; ++j) m.mean[j] += r[j] * inv_n;
  }
  for (std::size_t j = 0; j < d; ++j) {
    double var = 0.0;
    for (const auto& r : rows) var += (r[j] - m.mean[j]) * (r[j] - m.mean[j]) * inv_n;
    m.scale[j] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
  }
  std::vector<std::vector<double>> x(n, std::vector<double>(d));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) x[i][j] = (rows[i][j] - m.mean[j]) * m.scale[j];
  }

  m.weights.assign(d, 0.0);
  std::vector<double> gw(d);
  for (m.iterations = 0; m.iterations < config.max_iterations; ++m.iterations) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double z = m.bias;
      for (std::size_t j = 0; j < d; ++j) z += m.weights[j] * x[i][j];
      const double err = (sigmoid(z) - labels[i]) * inv_n;
      gb += err;
      for (std::size_t j = 0; j < d; ++j) gw[j] += err * x[i][j];
    }
    double gmax = std::abs(gb);
    for (std::size_t j = 0; j < d; ++j) {
      gw[j] += config.l2 * m.weights[j];
      gmax = std::max(gmax, std::abs(gw[j]));
    }
    if (gmax < config.tolerance) break;
    m.bias -= config.learning_rate * gb;
    for (std::size_t j = 0; j < d; ++j) m.weights[j] -= config.learning_rate * gw[j];
  }
  return m;
}

}  // namespace mpvaa::eval
