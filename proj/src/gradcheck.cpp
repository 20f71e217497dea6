#include "spheremap/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "spheremap/ops.hpp"
#include "spheremap/random.hpp"

namespace spheremap {

GradCheckResult finite_difference_check(const GradCheckFn& op, std::vector<Tensor<double>> inputs,
                                        double h, std::uint64_t seed) {
  const Tensor<double> probe = op(inputs);
  Rng rng(seed);
  std::vector<double> weights(probe.numel());
  for (auto& w : weights) w = rng.uniform(-1.0, 1.0);

  auto scalar = [&]() { return weighted_sum(op(inputs), weights); };

  for (auto& t : inputs) t.zero_grad();
  Tensor<double> loss = scalar();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) {
    analytic.emplace_back(t.requires_grad() ? std::vector<double>(t.grad().begin(), t.grad().end())
                                            : std::vector<double>{});
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!inputs[k].requires_grad()) continue;
    auto values = inputs[k].data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      values[i] = orig + h;
      const double fp = scalar().item();
      values[i] = orig - h;
      const double fm = scalar().item();
      values[i] = orig;
      const double numeric = (fp - fm) / (2.0 * h);
      const double a = analytic[k][i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

}  // namespace spheremap
