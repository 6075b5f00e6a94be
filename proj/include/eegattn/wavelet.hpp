#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"

namespace eegattn::wavelet {

/// Orthonormal two-channel filter bank described by its reconstruction
/// low-pass taps; the high-pass is the alternating flip.
struct Wavelet {
  std::string name;
  std::vector<double> lowpass;

  std::vector<double> highpass() const {
    const std::size_t L = lowpass.size();
    std::vector<double> h(L);
    for (std::size_t n = 0; n < L; ++n) h[n] = ((n % 2) ? -1.0 : 1.0) * lowpass[L - 1 - n];
    return h;
  }
};

inline Wavelet daubechies4() {
  return {"db4",
          {0.2303778133088965, 0.7148465705529157, 0.6308807679298589, -0.027983769416859854,
           -0.18703481171909309, 0.030841381835560764, 0.0328830116668852, -0.010597401785069032}};
}

inline Wavelet daubechies8() {
  return {"db8",
          {0.05441584224310401, 0.31287159091429995, 0.6756307362972898, 0.5853546836542067, -0.015829105256349306,
           -0.2840155429615469, 0.0004724845739132828, 0.12874742662047847, -0.017369301001807547,
           -0.044088253930794755, 0.013981027917398282, 0.008746094047405777, -0.004870352993451574,
           -0.00039174037337694705, 0.0006754494064505693, -0.00011747678412476953}};
}

inline Wavelet haar() { return {"haar", {0.7071067811865476, 0.7071067811865476}}; }

inline Wavelet by_name(const std::string& name) {
  if (name == "db4") return daubechies4();
  if (name == "db8") return daubechies8();
  if (name == "haar") return haar();
  throw Error(ErrorCode::InvalidConfig, "unknown wavelet " + name);
}

namespace detail {

/// Periodized analysis: one level, even-length input.
inline void analyze(std::span<const double> x, const std::vector<double>& lo, const std::vector<double>& hi,
                    std::vector<double>& approx, std::vector<double>& detail) {
  const std::size_t n = x.size(), half = n / 2, L = lo.size();
  approx.assign(half, 0.0);
  detail.assign(half, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0, d = 0;
    for (std::size_t t = 0; t < L; ++t) {
      const double v = x[(2 * k + t) % n];
      a += lo[t] * v;
      d += hi[t] * v;
    }
    approx[k] = a;
    detail[k] = d;
  }
}

/// Exact adjoint of `analyze`.
inline std::vector<double> synthesize(std::span<const double> approx, std::span<const double> detail,
                                      const std::vector<double>& lo, const std::vector<double>& hi) {
  const std::size_t half = approx.size(), n = 2 * half, L = lo.size();
  std::vector<double> x(n, 0.0);
  for (std::size_t k = 0; k < half; ++k)
    for (std::size_t t = 0; t < L; ++t) x[(2 * k + t) % n] += lo[t] * approx[k] + hi[t] * detail[k];
  return x;
}

inline std::size_t gray(std::size_t k) { return k ^ (k >> 1); }

}  // namespace detail

/// Full wavelet packet tree to `level`, terminal nodes stored in frequency
/// order (node k spans [k, k+1) * fs / 2^(level+1)). The input is zero-padded
/// to a multiple of 2^level; zero padding adds no energy, so node energies sum
/// to the input energy.
class WptDecomposition {
 public:
  WptDecomposition() = default;

  WptDecomposition(std::span<const double> x, std::size_t level, const Wavelet& w)
      : level_(level), wavelet_(w), original_(x.size()) {
    const std::size_t block = std::size_t{1} << level;
    if (x.size() < block)
      throw Error(ErrorCode::SignalTooShort, "wavelet packet level " + std::to_string(level) + " needs >= " +
                                                 std::to_string(block) + " samples");
    padded_ = ((x.size() + block - 1) / block) * block;
    const auto lo = w.lowpass;
    const auto hi = w.highpass();
    std::vector<std::vector<double>> natural{std::vector<double>(x.begin(), x.end())};
    natural.front().resize(padded_, 0.0);
    for (std::size_t l = 0; l < level; ++l) {
      std::vector<std::vector<double>> next;
      next.reserve(natural.size() * 2);
      for (const auto& node : natural) {
        std::vector<double> a, d;
        detail::analyze(node, lo, hi, a, d);
        next.push_back(std::move(a));
        next.push_back(std::move(d));
      }
      natural = std::move(next);
    }
    nodes_.resize(natural.size());
    for (std::size_t k = 0; k < natural.size(); ++k) nodes_[k] = std::move(natural[detail::gray(k)]);
  }

  std::size_t level() const { return level_; }
  std::size_t node_count() const { return nodes_.size(); }
  const std::string& wavelet_name() const { return wavelet_.name; }
  std::size_t original_length() const { return original_; }

  const std::vector<double>& node(std::size_t freq_index) const { return nodes_.at(freq_index); }

  double node_energy(std::size_t freq_index) const {
    double e = 0;
    for (double v : nodes_.at(freq_index)) e += v * v;
    return e;
  }

  /// Energy of the coefficients of frequency-ordered nodes aggregated to a
  /// coarser level (coarse node j covers fine nodes [j*r, (j+1)*r)).
  double coarse_energy(std::size_t coarse_level, std::size_t j) const {
    const std::size_t ratio = std::size_t{1} << (level_ - coarse_level);
    double e = 0;
    for (std::size_t k = j * ratio; k < (j + 1) * ratio; ++k) e += node_energy(k);
    return e;
  }

  /// Time-domain signal carried by the selected frequency-ordered nodes,
  /// truncated to the original length.
  std::vector<double> reconstruct(std::span<const std::size_t> freq_indices) const {
    const std::size_t count = nodes_.size();
    std::vector<std::vector<double>> natural(count, std::vector<double>(nodes_.front().size(), 0.0));
    for (auto k : freq_indices) natural[detail::gray(k)] = nodes_.at(k);
    const auto lo = wavelet_.lowpass;
    const auto hi = wavelet_.highpass();
    while (natural.size() > 1) {
      std::vector<std::vector<double>> up;
      up.reserve(natural.size() / 2);
      for (std::size_t i = 0; i < natural.size(); i += 2)
        up.push_back(detail::synthesize(natural[i], natural[i + 1], lo, hi));
      natural = std::move(up);
    }
    natural.front().resize(original_);
    return natural.front();
  }

 private:
  std::size_t level_ = 0;
  Wavelet wavelet_;
  std::size_t original_ = 0, padded_ = 0;
  std::vector<std::vector<double>> nodes_;
};

inline WptDecomposition wpt_decompose(std::span<const double> x, std::size_t level, const Wavelet& w = daubechies8()) {
  return WptDecomposition(x, level, w);
}

}  // namespace eegattn::wavelet
