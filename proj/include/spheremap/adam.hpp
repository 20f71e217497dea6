#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "spheremap/errors.hpp"
#include "spheremap/tensor.hpp"

namespace spheremap {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> tensor;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Gradients are cleared after every step.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>> params, AdamOptions opts) : params_(std::move(params)), opts_(opts) {
    for (const auto& p : params_) {
      m_.emplace_back(p.tensor.numel(), 0.0f);
      v_.emplace_back(p.tensor.numel(), 0.0f);
    }
  }

  void step() {
    for (auto& p : params_) {
      if (!p.tensor.has_grad()) throw MissingGradient("parameter '" + p.name + "' has no gradient");
    }
    ++t_;
    const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto w = params_[i].tensor.data();
      auto g = params_[i].tensor.grad();
      auto& m = m_[i];
      auto& v = v_[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        const double gk = g[k];
        const double mk = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * gk;
        const double vk = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * gk * gk;
        m[k] = static_cast<float>(mk);
        v[k] = static_cast<float>(vk);
        const double update = opts_.lr * (mk / c1) / (std::sqrt(vk / c2) + opts_.eps);
        w[k] = static_cast<T>(w[k] - update);
      }
      params_[i].tensor.zero_grad();
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  const std::vector<Parameter<T>>& parameters() const { return params_; }
  long long step_count() const { return t_; }
  const AdamOptions& options() const { return opts_; }
  void set_learning_rate(double lr) { opts_.lr = lr; }

  // Moment buffers, exposed for checkpointing.
  std::vector<std::vector<float>>& first_moments() { return m_; }
  std::vector<std::vector<float>>& second_moments() { return v_; }
  const std::vector<std::vector<float>>& first_moments() const { return m_; }
  const std::vector<std::vector<float>>& second_moments() const { return v_; }
  void set_step_count(long long t) { t_ = t; }

 private:
  std::vector<Parameter<T>> params_;
  AdamOptions opts_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  long long t_ = 0;
};

}  // namespace spheremap
