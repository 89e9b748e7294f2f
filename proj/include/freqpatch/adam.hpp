#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "freqpatch/errors.hpp"

namespace freqpatch {

struct AdamOptions {
  double lr = 0.005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moments are kept in double regardless of the
// parameter type.
template <typename T>
class Adam {
 public:
  Adam(std::size_t size, const AdamOptions& options)
      : options_(options), m_(size, 0.0), v_(size, 0.0) {
    if (!(options.lr > 0.0)) throw ContractViolation("Adam: learning rate must be positive");
  }

  void step(std::span<T> params, std::span<const T> grads) {
    if (params.size() != m_.size() || grads.size() != m_.size()) {
      throw ShapeError("Adam: parameter/gradient size mismatch");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, t_);
    const double c2 = 1.0 - std::pow(options_.beta2, t_);
    const double step = options_.lr / c1;
    const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = static_cast<double>(grads[i]);
      m_[i] = options_.beta1 * m_[i] + (1.0 - options_.beta1) * g;
      v_[i] = options_.beta2 * v_[i] + (1.0 - options_.beta2) * g * g;
      const double denom = std::sqrt(v_[i]) * inv_sqrt_c2 + options_.eps;
      params[i] = static_cast<T>(static_cast<double>(params[i]) - step * m_[i] / denom);
    }
  }

  void set_lr(double lr) {
    if (!(lr > 0.0)) throw ContractViolation("Adam: learning rate must be positive");
    options_.lr = lr;
  }
  [[nodiscard]] int steps() const { return t_; }
  [[nodiscard]] const AdamOptions& options() const { return options_; }

 private:
  AdamOptions options_;
  std::vector<double> m_;
  std::vector<double> v_;
  int t_ = 0;
};

}  // namespace freqpatch
