#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "spheremap/targetmaps.hpp"

namespace spheremap {

struct CountPair {
  double ground_truth = 0.0;
  double predicted = 0.0;
};

using PairedCounts = std::vector<CountPair>;

struct MetricsReport {
  double mae = 0.0;
  double rmse = 0.0;
  double fp_pct = 0.0;
  double fn_pct = 0.0;
  std::size_t n = 0;
};

double mae(const PairedCounts& pairs);
double rmse(const PairedCounts& pairs);

/// Mean relative count surplus and deficit, in percent.
std::pair<double, double> fp_fn_count_based(const PairedCounts& pairs);

MetricsReport evaluate_counts(const PairedCounts& pairs);

struct LocalizationResult {
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::vector<std::pair<int, int>> matches;  // (prediction index, keypoint index)
};

/// Greedy one-to-one matching by ascending distance, pairs farther than
/// `match_radius` never match.
LocalizationResult fp_fn_localized(const std::vector<Keypoint>& predicted,
                                   const std::vector<Keypoint>& ground_truth, double match_radius,
                                   int width, bool wrap_azimuth = true);

struct Regression {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

/// Least squares fit of predicted on ground truth.
Regression linear_regression(const PairedCounts& pairs);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// Histogram of predicted - ground_truth with bins [k*w, (k+1)*w).
std::vector<HistogramBin> error_histogram(const PairedCounts& pairs, double bin_width = 5.0);

struct MethodResult {
  std::string method;
  PairedCounts pairs;
};

/// Writes metrics.csv, scatter.csv, errors.csv and regression.csv into `dir`.
void export_report(const std::filesystem::path& dir, const std::vector<MethodResult>& results);

}  // namespace spheremap
