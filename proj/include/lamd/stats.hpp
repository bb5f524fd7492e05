#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "lamd/error.hpp"
#include "lamd/rng.hpp"

namespace lamd {

/// Lower median: the order statistic at 1-based index ceil(n / 2).
inline double median(std::vector<double> values) {
  if (values.empty()) throw ConfigError("median of empty sample");
  const std::size_t k = (values.size() + 1) / 2 - 1;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

/// Lower empirical quantile: the order statistic at 0-based index
/// floor(q * (n - 1)).
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw ConfigError("quantile of empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile level must lie in [0, 1]");
  const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(values.size() - 1)));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k), values.end());
  return values[k];
}

/// Normalised gap (MRE_val - MRE_train) / MRE_val.
inline double mre_gap(double mre_train, double mre_val) {
  if (!(mre_val > 0.0)) throw NumericError("mre_gap: validation MRE must be positive");
  return (mre_val - mre_train) / mre_val;
}

struct KsResult {
  double d = 0.0;
  double p = 1.0;
};

/// sup_x |F_a(x) - F_b(x)| over the pooled sample points.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("KS test needs two non-empty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic Kolmogorov tail probability Q(lambda) = 2 sum (-1)^(k-1)
/// exp(-2 k^2 lambda^2), clamped to [1e-300, 1]. Below lambda = 1.18 the
/// alternating sum cancels badly, so the equivalent theta-function form
/// 1 - sqrt(2 pi) / lambda sum exp(-(2k-1)^2 pi^2 / (8 lambda^2)) is used.
/// Returns 1 if the series fails to converge.
inline double kolmogorov_q(double lambda) {
  constexpr double kFloor = 1e-300;
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    const double pi = std::numbers::pi;
    const double a = -pi * pi / (8.0 * lambda * lambda);
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(a * (2 * k - 1) * (2 * k - 1));
      sum += term;
      if (term < 1e-16 * sum || term == 0.0) return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, kFloor, 1.0);
    }
    return 1.0;
  }
  const double a2 = -2.0 * lambda * lambda;
  double sum = 0.0, sign = 2.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(a2 * k * k);
    sum += term;
    if (std::abs(term) < 1e-16) return std::clamp(sum, kFloor, 1.0);
    sign = -sign;
  }
  return 1.0;
}

/// Two-sample Kolmogorov-Smirnov test with the small-sample corrected
/// asymptotic p-value, n_e = n m / (n + m).
inline KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  KsResult r;
  r.d = ks_statistic(a, b);
  const double ne = static_cast<double>(a.size()) * static_cast<double>(b.size()) /
                    static_cast<double>(a.size() + b.size());
  const double sq = std::sqrt(ne);
  r.p = kolmogorov_q((sq + 0.12 + 0.11 / sq) * r.d);
  return r;
}

/// Monte-Carlo permutation p-value of the KS statistic with add-one
/// smoothing: (1 + #{d_perm >= d_obs}) / (1 + iterations).
inline double permutation_p(const std::vector<double>& a, const std::vector<double>& b, std::size_t iterations,
                            Rng& rng) {
  if (a.empty() || b.empty()) throw ConfigError("permutation test needs two non-empty samples");
  if (iterations < 100) throw ConfigError("permutation test needs at least 100 iterations");
  const double observed = ks_statistic(a, b);
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::size_t hits = 0;
  std::vector<double> left(a.size()), right(b.size());
  for (std::size_t it = 0; it < iterations; ++it) {
    rng.shuffle(std::span<double>(pooled));
    std::copy_n(pooled.begin(), a.size(), left.begin());
    std::copy(pooled.begin() + static_cast<std::ptrdiff_t>(a.size()), pooled.end(), right.begin());
    // d takes values k / lcm(n, m); the slack absorbs rounding of equal ratios.
    if (ks_statistic(left, right) >= observed - 1e-12) ++hits;
  }
  return static_cast<double>(hits + 1) / static_cast<double>(iterations + 1);
}

// ---------------------------------------------------------------------------
// Frechet distance between Gaussian fits

/// One feature vector per row.
using FeatureMatrix = Eigen::MatrixXd;

namespace detail {

inline Eigen::MatrixXd covariance(const FeatureMatrix& x, const Eigen::VectorXd& mu) {
  const Eigen::MatrixXd centered = x.rowwise() - mu.transpose();
  const double denom = std::max<double>(1.0, static_cast<double>(x.rows()) - 1.0);
  Eigen::MatrixXd cov = (centered.transpose() * centered) / denom;
  if (x.rows() < x.cols() + 1) cov += 1e-6 * Eigen::MatrixXd::Identity(x.cols(), x.cols());
  return cov;
}

// Symmetric PSD square root; negative eigenvalues are clamped to 0.
inline Eigen::MatrixXd sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a^1/2 S_b S_a^1/2)^1/2).
inline double frechet_gaussian_distance(const FeatureMatrix& a, const FeatureMatrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("frechet distance: feature dimensions differ");
  if (a.rows() < 1 || b.rows() < 1) throw ConfigError("frechet distance needs samples on both sides");
  const Eigen::VectorXd mu_a = a.colwise().mean(), mu_b = b.colwise().mean();
  const Eigen::MatrixXd cov_a = detail::covariance(a, mu_a), cov_b = detail::covariance(b, mu_b);
  const Eigen::MatrixXd root_a = detail::sqrt_psd(cov_a);
  const Eigen::MatrixXd cross = detail::sqrt_psd(root_a * cov_b * root_a);
  const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
  return std::max(d, 0.0);
}

// ---------------------------------------------------------------------------
// Histograms

/// Recovery errors of one target set (train, validation, generated, distorted).
struct ErrorSampleSet {
  std::string label;
  std::vector<double> errors;

  void validate() const {
    if (errors.empty()) throw ConfigError("error sample '" + label + "' is empty");
    for (double e : errors) {
      if (!std::isfinite(e) || e < 0.0) throw NumericError("error sample '" + label + "' has an invalid value");
    }
  }
};

struct Histogram {
  std::vector<double> bin_edges;  // bins + 1 sorted edges
  std::vector<std::pair<std::string, std::vector<std::size_t>>> counts;

  std::size_t bins() const { return bin_edges.size() - 1; }
};

/// Shared equal-width bins over the pooled range of all samples; the last bin
/// is closed on the right.
inline Histogram histogram(const std::vector<ErrorSampleSet>& samples, std::size_t bin_count) {
  if (bin_count < 1) throw ConfigError("histogram needs at least one bin");
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& [label, values] : samples)
    for (double v : values) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!std::isfinite(lo)) throw ConfigError("histogram of empty pool");
  if (hi == lo) hi = lo + 1.0;
  Histogram h;
  const double width = (hi - lo) / static_cast<double>(bin_count);
  for (std::size_t k = 0; k <= bin_count; ++k) h.bin_edges.push_back(k == bin_count ? hi : lo + width * static_cast<double>(k));
  for (const auto& [label, values] : samples) {
    std::vector<std::size_t> c(bin_count, 0);
    for (double v : values) {
      auto k = static_cast<std::size_t>((v - lo) / width);
      ++c[std::min(k, bin_count - 1)];
    }
    h.counts.emplace_back(label, std::move(c));
  }
  return h;
}

inline void write_histogram_csv(std::ostream& os, const Histogram& h) {
  os << "bin_lo,bin_hi";
  for (const auto& [label, c] : h.counts) os << ',' << label;
  os << '\n';
  char buf[64];
  for (std::size_t k = 0; k < h.bins(); ++k) {
    std::snprintf(buf, sizeof buf, "%.9e,%.9e", h.bin_edges[k], h.bin_edges[k + 1]);
    os << buf;
    for (const auto& [label, c] : h.counts) os << ',' << c[k];
    os << '\n';
  }
}

// ---------------------------------------------------------------------------
// Audit report

inline constexpr double kOverfitPThreshold = 0.01;
inline constexpr double kOverfitGapThreshold = 0.10;

struct AuditReport {
  std::string model;
  double mre_train = 0.0;
  double mre_val = 0.0;
  std::optional<double> mre_generated;
  std::optional<double> mre_distorted;
  double mre_gap = 0.0;
  double ks_d = 0.0;
  double ks_p = 1.0;
  bool overfit_by_p = false;
  bool overfit_by_gap = false;
  std::size_t failed_targets = 0;  // recoveries that raised and were excluded
};

inline bool overfit_by_p(double p) { return p < kOverfitPThreshold; }
inline bool overfit_by_gap(double gap) { return gap > kOverfitGapThreshold; }

/// Report from the train and validation error samples.
inline AuditReport make_report(std::string model, const std::vector<double>& train_errors,
                               const std::vector<double>& val_errors) {
  AuditReport r;
  r.model = std::move(model);
  r.mre_train = median(train_errors);
  r.mre_val = median(val_errors);
  r.mre_gap = mre_gap(r.mre_train, r.mre_val);
  const KsResult ks = ks_two_sample(train_errors, val_errors);
  r.ks_d = ks.d;
  r.ks_p = ks.p;
  r.overfit_by_p = overfit_by_p(r.ks_p);
  r.overfit_by_gap = overfit_by_gap(r.mre_gap);
  return r;
}

inline void write_audit_csv_header(std::ostream& os) {
  os << "model,ks_p,mre_gap,mre_train,mre_val,mre_generated,mre_small_distort,ks_d,overfit_by_p,overfit_by_gap\n";
}

inline void write_audit_csv_row(std::ostream& os, const AuditReport& r) {
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6e", v);
    return std::string(buf);
  };
  auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string("N/A"); };
  os << r.model << ',' << num(r.ks_p) << ',' << num(r.mre_gap) << ',' << num(r.mre_train) << ',' << num(r.mre_val)
     << ',' << opt(r.mre_generated) << ',' << opt(r.mre_distorted) << ',' << num(r.ks_d) << ','
     << (r.overfit_by_p ? 1 : 0) << ',' << (r.overfit_by_gap ? 1 : 0) << '\n';
}

}  // namespace lamd
