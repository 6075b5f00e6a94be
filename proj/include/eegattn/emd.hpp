#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "error.hpp"

namespace eegattn::emd {

/// Natural cubic spline through strictly increasing knots, evaluated at
/// every integer abscissa 0..n-1.
inline std::vector<double> natural_spline(std::span<const double> kx, std::span<const double> ky, std::size_t n) {
  const std::size_t m = kx.size();
  std::vector<double> out(n);
  if (m == 1) {
    std::fill(out.begin(), out.end(), ky[0]);
    return out;
  }
  std::vector<double> h(m - 1);
  for (std::size_t i = 0; i + 1 < m; ++i) h[i] = kx[i + 1] - kx[i];
  // Second derivatives; natural boundary sets the end ones to zero.
  std::vector<double> c(m, 0.0);
  if (m > 2) {
    const std::size_t k = m - 2;
    std::vector<double> diag(k), upper(k), rhs(k);
    for (std::size_t i = 0; i < k; ++i) {
      diag[i] = 2.0 * (h[i] + h[i + 1]);
      upper[i] = h[i + 1];
      rhs[i] = 6.0 * ((ky[i + 2] - ky[i + 1]) / h[i + 1] - (ky[i + 1] - ky[i]) / h[i]);
    }
    for (std::size_t i = 1; i < k; ++i) {  // Thomas algorithm; sub-diagonal equals h[i]
      const double w = h[i] / diag[i - 1];
      diag[i] -= w * upper[i - 1];
      rhs[i] -= w * rhs[i - 1];
    }
    c[k] = rhs[k - 1] / diag[k - 1];
    for (std::size_t i = k - 1; i-- > 0;) c[i + 1] = (rhs[i] - upper[i] * c[i + 2]) / diag[i];
  }
  std::size_t seg = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double x = static_cast<double>(t);
    while (seg + 2 < m && x > kx[seg + 1]) ++seg;
    const double a = kx[seg + 1] - x, b = x - kx[seg], hh = h[seg];
    out[t] = c[seg] * a * a * a / (6.0 * hh) + c[seg + 1] * b * b * b / (6.0 * hh) +
             (ky[seg] / hh - c[seg] * hh / 6.0) * a + (ky[seg + 1] / hh - c[seg + 1] * hh / 6.0) * b;
  }
  return out;
}

struct Extrema {
  std::vector<std::size_t> maxima, minima;
  std::size_t count() const { return maxima.size() + minima.size(); }
};

inline Extrema find_extrema(std::span<const double> x) {
  Extrema e;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    if (x[i] > x[i - 1] && x[i] >= x[i + 1]) e.maxima.push_back(i);
    else if (x[i] < x[i - 1] && x[i] <= x[i + 1]) e.minima.push_back(i);
  }
  return e;
}

namespace detail {

/// Envelope through interior extrema with end knots placed by linear
/// extrapolation of the two nearest extrema, clipped so the envelope never
/// crosses the signal at the ends.
inline std::vector<double> envelope(std::span<const double> x, const std::vector<std::size_t>& idx, bool upper) {
  const std::size_t n = x.size();
  std::vector<double> kx, ky;
  kx.reserve(idx.size() + 2);
  ky.reserve(idx.size() + 2);
  auto pick = [upper](double a, double b) { return upper ? std::max(a, b) : std::min(a, b); };
  double start = x[0], end = x[n - 1];
  if (idx.size() >= 2) {
    const double x0 = static_cast<double>(idx[0]), x1 = static_cast<double>(idx[1]);
    start = pick(x[idx[0]] + (x[idx[1]] - x[idx[0]]) * (0.0 - x0) / (x1 - x0), x[0]);
    const std::size_t a = idx[idx.size() - 2], b = idx.back();
    const double xa = static_cast<double>(a), xb = static_cast<double>(b);
    end = pick(x[b] + (x[b] - x[a]) * (static_cast<double>(n - 1) - xb) / (xb - xa), x[n - 1]);
  }
  kx.push_back(0.0);
  ky.push_back(start);
  for (auto i : idx) {
    kx.push_back(static_cast<double>(i));
    ky.push_back(x[i]);
  }
  kx.push_back(static_cast<double>(n - 1));
  ky.push_back(end);
  return natural_spline(kx, ky, n);
}

}  // namespace detail

struct SiftingConfig {
  double sd_threshold = 0.2;
  std::size_t max_sifts = 100;
};

struct EmdDecomposition {
  std::vector<std::vector<double>> imfs;
  std::vector<double> residue;
  std::size_t ensemble_size = 1;
  double noise_std = 0.0;  // fraction of the input standard deviation
};

/// Upper bound on the number of IMFs extracted from n samples.
inline std::size_t default_imf_count(std::size_t n) {
  const auto lg = static_cast<std::size_t>(std::floor(std::log2(static_cast<double>(n))));
  return lg > 2 ? lg - 1 : 1;
}

/// Extracts one IMF from `x` by repeated envelope-mean subtraction. Returns
/// false when `x` has too few extrema to define envelopes.
inline bool sift(std::span<const double> x, std::vector<double>& imf, const SiftingConfig& cfg) {
  const std::size_t n = x.size();
  std::vector<double> h(x.begin(), x.end());
  if (find_extrema(h).count() < 3) return false;
  for (std::size_t iter = 0; iter < cfg.max_sifts; ++iter) {
    const auto ext = find_extrema(h);
    if (ext.maxima.empty() || ext.minima.empty()) break;
    const auto up = detail::envelope(h, ext.maxima, true);
    const auto lo = detail::envelope(h, ext.minima, false);
    double num = 0.0, den = 0.0;
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) {
      next[i] = h[i] - 0.5 * (up[i] + lo[i]);
      num += (h[i] - next[i]) * (h[i] - next[i]);
      den += h[i] * h[i];
    }
    if (!std::isfinite(num) || !std::isfinite(den))
      throw Error(ErrorCode::SiftingDiverged, "non-finite envelope during sifting");
    h = std::move(next);
    if (den == 0.0 || num / den <= cfg.sd_threshold) break;
  }
  imf = std::move(h);
  return true;
}

/// Plain empirical mode decomposition. With `fixed_count` the output always has
/// `max_imfs` IMFs (zero-padded once the residue runs out of oscillations), which
/// keeps ensemble members aligned.
inline EmdDecomposition decompose(std::span<const double> x, std::size_t max_imfs, const SiftingConfig& cfg = {},
                                  bool fixed_count = false) {
  if (x.size() < 10) throw Error(ErrorCode::SignalTooShort, "EMD needs at least 10 samples");
  EmdDecomposition out;
  std::vector<double> residue(x.begin(), x.end());
  std::vector<double> imf;
  while (out.imfs.size() < max_imfs) {
    if (!sift(residue, imf, cfg)) break;
    for (std::size_t i = 0; i < residue.size(); ++i) residue[i] -= imf[i];
    out.imfs.push_back(std::move(imf));
    imf.clear();
  }
  if (fixed_count)
    while (out.imfs.size() < max_imfs) out.imfs.emplace_back(x.size(), 0.0);
  out.residue = std::move(residue);
  return out;
}

inline EmdDecomposition emd(std::span<const double> x, const SiftingConfig& cfg = {}) {
  return decompose(x, default_imf_count(x.size()), cfg);
}

/// Ensemble EMD: averages the decompositions of `ensemble_size` copies of the
/// input, each perturbed by white noise of `noise_std` times the input's
/// standard deviation. With ensemble_size 1 and zero noise it reduces to EMD.
inline EmdDecomposition eemd(std::span<const double> x, std::size_t ensemble_size, double noise_std,
                             std::uint64_t seed, const SiftingConfig& cfg = {}) {
  if (x.size() < 10) throw Error(ErrorCode::SignalTooShort, "EEMD needs at least 10 samples");
  if (ensemble_size == 0) throw Error(ErrorCode::InvalidConfig, "ensemble size must be >= 1");
  const std::size_t n = x.size();
  const std::size_t k = default_imf_count(n);
  if (ensemble_size == 1 && noise_std == 0.0) {
    auto d = decompose(x, k, cfg);
    return d;
  }
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, noise_std * sd > 0 ? noise_std * sd : 1.0);
  const double noise_scale = noise_std * sd > 0 ? 1.0 : 0.0;

  EmdDecomposition out;
  out.ensemble_size = ensemble_size;
  out.noise_std = noise_std;
  out.imfs.assign(k, std::vector<double>(n, 0.0));
  out.residue.assign(n, 0.0);
  std::vector<double> trial(n);
  for (std::size_t e = 0; e < ensemble_size; ++e) {
    for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] + noise_scale * noise(rng);
    const auto d = decompose(trial, k, cfg, true);
    for (std::size_t j = 0; j < k; ++j)
      for (std::size_t i = 0; i < n; ++i) out.imfs[j][i] += d.imfs[j][i];
    for (std::size_t i = 0; i < n; ++i) out.residue[i] += d.residue[i];
  }
  const double inv = 1.0 / static_cast<double>(ensemble_size);
  for (auto& imf : out.imfs)
    for (auto& v : imf) v *= inv;
  for (auto& v : out.residue) v *= inv;
  // Trailing all-zero modes carry nothing; drop them.
  while (!out.imfs.empty() &&
         std::all_of(out.imfs.back().begin(), out.imfs.back().end(), [](double v) { return v == 0.0; }))
    out.imfs.pop_back();
  return out;
}

}  // namespace eegattn::emd
