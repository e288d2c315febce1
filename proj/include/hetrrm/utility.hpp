#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

namespace hetrrm {

// Alpha-fair utility of one flow, shifted by epsilon so that U'(0) is finite:
// log(d + eps) for alpha = 1, (d + eps)^(1 - alpha) / (1 - alpha) otherwise.
struct UtilitySpec {
  double alpha = 1.0;
  double epsilon = 1e-3;

  void check() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("utility: alpha must be >= 0");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("utility: epsilon must be > 0");
  }

  bool proportional_fair() const { return alpha == 1.0; }

  double value(double d) const {
    const double x = d + epsilon;
    if (proportional_fair()) return std::log(x);
    return std::pow(x, 1.0 - alpha) / (1.0 - alpha);
  }
  double derivative(double d) const { return std::pow(d + epsilon, -alpha); }
  double second_derivative(double d) const { return -alpha * std::pow(d + epsilon, -alpha - 1.0); }
};

inline double utility_value(const UtilitySpec& u, std::span<const double> d) {
  double total = 0.0;
  for (double v : d) total += u.value(v);
  return total;
}

inline std::vector<double> utility_gradient(const UtilitySpec& u, std::span<const double> d) {
  std::vector<double> g;
  g.reserve(d.size());
  for (double v : d) g.push_back(u.derivative(v));
  return g;
}

}  // namespace hetrrm
