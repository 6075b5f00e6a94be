#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace eegattn::stats {

inline double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double s = 0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

/// Population variance (divides by n).
inline double variance(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double m = mean(x);
  double s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size());
}

/// Sample variance (divides by n-1).
inline double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  return variance(x) * static_cast<double>(x.size()) / static_cast<double>(x.size() - 1);
}

/// Linear-interpolated quantile on a sorted copy, q in [0,1].
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return sorted[lo] + t * (sorted[hi] - sorted[lo]);
}

inline double median(std::span<const double> x) {
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  return quantile_sorted(s, 0.5);
}

/// Standardized third and fourth central moments (non-excess kurtosis);
/// NaN for constant input.
inline double skewness(std::span<const double> x) {
  const double m = mean(x), v = variance(x);
  double s = 0;
  for (double a : x) s += (a - m) * (a - m) * (a - m);
  return s / static_cast<double>(x.size()) / std::pow(v, 1.5);
}

inline double kurtosis(std::span<const double> x) {
  const double m = mean(x), v = variance(x);
  double s = 0;
  for (double a : x) {
    const double d = (a - m) * (a - m);
    s += d * d;
  }
  return s / static_cast<double>(x.size()) / (v * v);
}

inline std::vector<double> diff(std::span<const double> x) {
  std::vector<double> d;
  if (x.size() < 2) return d;
  d.reserve(x.size() - 1);
  for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
  return d;
}

}  // namespace eegattn::stats
