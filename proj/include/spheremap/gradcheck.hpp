#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "spheremap/tensor.hpp"

namespace spheremap {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

using GradCheckFn = std::function<Tensor<double>(const std::vector<Tensor<double>>&)>;

/// Central differences against reverse mode for every element of every input
/// that requires grad. The op output is reduced to a scalar with fixed random
/// weights drawn from `seed`. Error per element is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult finite_difference_check(const GradCheckFn& op, std::vector<Tensor<double>> inputs,
                                        double h = 1e-4, std::uint64_t seed = 7);

}  // namespace spheremap

namespace spheremap {

/// Per-op outcome of the randomized gradient check suite.
struct OpCheckReport {
  std::string op;
  double max_rel_error = 0.0;
  double threshold = 0.0;
  int cases = 0;
  std::size_t elements = 0;
  bool passed() const { return max_rel_error < threshold; }
};

/// Every differentiable op over `n_seeds` random shapes and configurations,
/// f64, inputs kept away from kinks and ties.
std::vector<OpCheckReport> run_gradcheck_suite(int n_seeds = 20, std::uint64_t base_seed = 1);

}  // namespace spheremap
