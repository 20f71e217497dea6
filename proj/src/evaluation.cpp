#include "spheremap/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "spheremap/errors.hpp"

namespace spheremap {
namespace {

void require_nonempty(const PairedCounts& pairs, const char* what) {
  if (pairs.empty()) throw EmptyInput(std::string(what) + ": no samples");
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out.precision(10);
  return out;
}

}  // namespace

double mae(const PairedCounts& pairs) {
  require_nonempty(pairs, "mae");
  double s = 0.0;
  for (const auto& p : pairs) s += std::abs(p.ground_truth - p.predicted);
  return s / pairs.size();
}

double rmse(const PairedCounts& pairs) {
  require_nonempty(pairs, "rmse");
  double s = 0.0;
  for (const auto& p : pairs) s += (p.ground_truth - p.predicted) * (p.ground_truth - p.predicted);
  return std::sqrt(s / pairs.size());
}

std::pair<double, double> fp_fn_count_based(const PairedCounts& pairs) {
  require_nonempty(pairs, "fp_fn_count_based");
  double fp = 0.0, fn = 0.0;
  for (const auto& p : pairs) {
    if (!(p.ground_truth > 0.0)) throw ZeroGroundTruth("fp/fn percentages need a positive ground truth count");
    fp += std::max(p.predicted - p.ground_truth, 0.0) / p.ground_truth;
    fn += std::max(p.ground_truth - p.predicted, 0.0) / p.ground_truth;
  }
  return {100.0 * fp / pairs.size(), 100.0 * fn / pairs.size()};
}

MetricsReport evaluate_counts(const PairedCounts& pairs) {
  MetricsReport r;
  r.mae = mae(pairs);
  r.rmse = rmse(pairs);
  std::tie(r.fp_pct, r.fn_pct) = fp_fn_count_based(pairs);
  r.n = pairs.size();
  return r;
}

LocalizationResult fp_fn_localized(const std::vector<Keypoint>& predicted,
                                   const std::vector<Keypoint>& ground_truth, double match_radius,
                                   int width, bool wrap_azimuth) {
  if (!(match_radius > 0.0)) throw ConfigError("match radius must be positive");
  struct Candidate {
    double d;
    int p, g;
  };
  std::vector<Candidate> cand;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    for (std::size_t j = 0; j < ground_truth.size(); ++j) {
      const double d = pixel_distance(predicted[i], ground_truth[j], width, wrap_azimuth);
      if (d <= match_radius) cand.push_back({d, static_cast<int>(i), static_cast<int>(j)});
    }
  }
  std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
    if (a.d != b.d) return a.d < b.d;
    if (a.p != b.p) return a.p < b.p;
    return a.g < b.g;
  });
  std::vector<char> used_p(predicted.size(), 0), used_g(ground_truth.size(), 0);
  LocalizationResult res;
  for (const auto& c : cand) {
    if (used_p[c.p] || used_g[c.g]) continue;
    used_p[c.p] = used_g[c.g] = 1;
    res.matches.emplace_back(c.p, c.g);
  }
  res.fp = predicted.size() - res.matches.size();
  res.fn = ground_truth.size() - res.matches.size();
  return res;
}

Regression linear_regression(const PairedCounts& pairs) {
  if (pairs.size() < 2) throw EmptyInput("regression needs at least two samples");
  const double n = static_cast<double>(pairs.size());
  double mx = 0.0, my = 0.0;
  for (const auto& p : pairs) {
    mx += p.ground_truth;
    my += p.predicted;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& p : pairs) {
    const double dx = p.ground_truth - mx, dy = p.predicted - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  Regression r;
  r.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  r.intercept = my - r.slope * mx;
  double ss_res = 0.0;
  for (const auto& p : pairs) {
    const double e = p.predicted - (r.slope * p.ground_truth + r.intercept);
    ss_res += e * e;
  }
  r.r2 = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
  return r;
}

std::vector<HistogramBin> error_histogram(const PairedCounts& pairs, double bin_width) {
  if (!(bin_width > 0.0)) throw ConfigError("histogram bin width must be positive");
  std::map<long long, std::size_t> bins;
  for (const auto& p : pairs) {
    bins[static_cast<long long>(std::floor((p.predicted - p.ground_truth) / bin_width))]++;
  }
  std::vector<HistogramBin> out;
  if (bins.empty()) return out;
  for (long long k = bins.begin()->first; k <= bins.rbegin()->first; ++k) {
    const auto it = bins.find(k);
    out.push_back({k * bin_width, (k + 1) * bin_width, it == bins.end() ? 0 : it->second});
  }
  return out;
}

void export_report(const std::filesystem::path& dir, const std::vector<MethodResult>& results) {
  std::filesystem::create_directories(dir);
  auto metrics = open_csv(dir / "metrics.csv");
  auto scatter = open_csv(dir / "scatter.csv");
  auto errors = open_csv(dir / "errors.csv");
  auto regression = open_csv(dir / "regression.csv");
  metrics << "method,n,mae,rmse,fp,fn\n";
  scatter << "gt,pred,method\n";
  errors << "method,bin_lo,bin_hi,count\n";
  regression << "method,slope,intercept,r2\n";
  for (const auto& m : results) {
    const auto rep = evaluate_counts(m.pairs);
    metrics << m.method << ',' << rep.n << ',' << rep.mae << ',' << rep.rmse << ',' << rep.fp_pct << ','
            << rep.fn_pct << '\n';
    for (const auto& p : m.pairs) scatter << p.ground_truth << ',' << p.predicted << ',' << m.method << '\n';
    for (const auto& b : error_histogram(m.pairs)) {
      errors << m.method << ',' << b.lo << ',' << b.hi << ',' << b.count << '\n';
    }
    if (m.pairs.size() >= 2) {
      const auto reg = linear_regression(m.pairs);
      regression << m.method << ',' << reg.slope << ',' << reg.intercept << ',' << reg.r2 << '\n';
    }
  }
  for (auto* f : {&metrics, &scatter, &errors, &regression}) {
    f->flush();
    if (!*f) throw IoError("write failed in " + dir.string());
  }
}

}  // namespace spheremap
