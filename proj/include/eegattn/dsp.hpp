#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "error.hpp"
#include "fft.hpp"

namespace eegattn::dsp {

/// Second-order section, a0 normalized to 1. First-order sections keep b2 = a2 = 0.
struct Biquad {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

enum class FilterKind { ButterworthBandpass, ButterworthLowpass, Notch };

inline std::string to_string(FilterKind k) {
  switch (k) {
    case FilterKind::ButterworthBandpass: return "butterworth_bandpass";
    case FilterKind::ButterworthLowpass: return "butterworth_lowpass";
    case FilterKind::Notch: return "notch";
  }
  return "unknown";
}

struct IirFilterSpec {
  FilterKind kind = FilterKind::ButterworthBandpass;
  int order = 0;
  double low_hz = 0, high_hz = 0;
  double notch_hz = 0, quality_q = 0;
  double sample_rate = 250;
  std::vector<Biquad> sections;

  std::complex<double> response(double freq_hz) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate;
    const std::complex<double> z1 = std::polar(1.0, -w);
    const std::complex<double> z2 = z1 * z1;
    std::complex<double> h = 1.0;
    for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
    return h;
  }

  double magnitude(double freq_hz) const { return std::abs(response(freq_hz)); }

  /// All section poles strictly inside the unit circle (Jury conditions).
  bool stable() const {
    return std::all_of(sections.begin(), sections.end(), [](const Biquad& s) {
      return std::abs(s.a2) < 1.0 && std::abs(s.a1) < 1.0 + s.a2;
    });
  }
};

inline void to_json(nlohmann::json& j, const IirFilterSpec& f) {
  nlohmann::json sos = nlohmann::json::array();
  for (const auto& s : f.sections) sos.push_back({s.b0, s.b1, s.b2, 1.0, s.a1, s.a2});
  j = {{"kind", to_string(f.kind)}, {"order", f.order},         {"low_hz", f.low_hz},
       {"high_hz", f.high_hz},      {"notch_hz", f.notch_hz},   {"quality_q", f.quality_q},
       {"sample_rate", f.sample_rate}, {"sos", sos}};
}

inline void from_json(const nlohmann::json& j, IirFilterSpec& f) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "butterworth_bandpass") f.kind = FilterKind::ButterworthBandpass;
  else if (kind == "butterworth_lowpass") f.kind = FilterKind::ButterworthLowpass;
  else if (kind == "notch") f.kind = FilterKind::Notch;
  else throw Error(ErrorCode::ParseError, "unknown filter kind " + kind);
  f.order = j.at("order").get<int>();
  f.low_hz = j.at("low_hz").get<double>();
  f.high_hz = j.at("high_hz").get<double>();
  f.notch_hz = j.at("notch_hz").get<double>();
  f.quality_q = j.at("quality_q").get<double>();
  f.sample_rate = j.at("sample_rate").get<double>();
  f.sections.clear();
  for (const auto& row : j.at("sos")) {
    const double a0 = row.at(3).get<double>();
    f.sections.push_back({row.at(0).get<double>() / a0, row.at(1).get<double>() / a0, row.at(2).get<double>() / a0,
                          row.at(4).get<double>() / a0, row.at(5).get<double>() / a0});
  }
}

namespace detail {

using cplx = std::complex<double>;

/// Left-half-plane poles of the normalized analog Butterworth prototype.
inline std::vector<cplx> butterworth_prototype(int order) {
  std::vector<cplx> poles;
  for (int k = 0; k < order; ++k) {
    const double theta = std::numbers::pi * (2.0 * k + order + 1) / (2.0 * order);
    poles.push_back(std::polar(1.0, theta));
  }
  return poles;
}

inline cplx bilinear(cplx s, double fs2) { return (fs2 + s) / (fs2 - s); }

/// Groups digital poles into conjugate pairs / real pairs and attaches the
/// supplied real zeros in order. Gain is left at 1; callers normalize.
inline std::vector<Biquad> poles_to_sections(std::vector<cplx> poles, std::vector<double> zeros) {
  constexpr double tol = 1e-10;
  std::vector<cplx> pairs;
  std::vector<double> reals;
  for (const auto& p : poles) {
    if (std::abs(p.imag()) <= tol * std::max(1.0, std::abs(p))) reals.push_back(p.real());
    else if (p.imag() > 0) pairs.push_back(p);
  }
  std::sort(reals.begin(), reals.end());
  std::size_t zi = 0;
  auto next_zero = [&](std::vector<double>& out) {
    if (zi < zeros.size()) out.push_back(zeros[zi++]);
  };
  std::vector<Biquad> sections;
  auto make = [&](double a1, double a2, int npoles) {
    std::vector<double> z;
    for (int i = 0; i < npoles; ++i) next_zero(z);
    Biquad s;
    s.a1 = a1;
    s.a2 = a2;
    if (z.size() == 2) {
      s.b0 = 1.0; s.b1 = -(z[0] + z[1]); s.b2 = z[0] * z[1];
    } else if (z.size() == 1) {
      s.b0 = 1.0; s.b1 = -z[0]; s.b2 = 0.0;
    }
    sections.push_back(s);
  };
  for (const auto& p : pairs) make(-2.0 * p.real(), std::norm(p), 2);
  std::size_t i = 0;
  for (; i + 1 < reals.size(); i += 2) make(-(reals[i] + reals[i + 1]), reals[i] * reals[i + 1], 2);
  if (i < reals.size()) make(-reals[i], 0.0, 1);
  return sections;
}

inline void normalize_gain(IirFilterSpec& spec, double ref_hz) {
  const double g = spec.magnitude(ref_hz);
  auto& s = spec.sections.front();
  s.b0 /= g; s.b1 /= g; s.b2 /= g;
}

}  // namespace detail

/// Digital Butterworth bandpass via analog prototype, lowpass-to-bandpass
/// transform and bilinear transform with corner prewarping.
inline IirFilterSpec design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs) {
  if (order < 1) throw Error(ErrorCode::InvalidConfig, "filter order must be >= 1");
  if (!(fs > 0) || !(low_hz > 0) || !(low_hz < high_hz) || !(high_hz < fs / 2))
    throw Error(ErrorCode::InvalidCorners, "bandpass corners must satisfy 0 < low < high < fs/2");
  const double fs2 = 2.0 * fs;
  const double w1 = fs2 * std::tan(std::numbers::pi * low_hz / fs);
  const double w2 = fs2 * std::tan(std::numbers::pi * high_hz / fs);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  std::vector<detail::cplx> digital;
  for (const auto& p : detail::butterworth_prototype(order)) {
    const detail::cplx half = p * bw / 2.0;
    const detail::cplx root = std::sqrt(half * half - w0sq);
    digital.push_back(detail::bilinear(half + root, fs2));
    digital.push_back(detail::bilinear(half - root, fs2));
  }
  // N zeros at s=0 map to z=1; N zeros at infinity map to z=-1.
  std::vector<double> zeros;
  for (int i = 0; i < order; ++i) {
    zeros.push_back(1.0);
    zeros.push_back(-1.0);
  }
  IirFilterSpec spec;
  spec.kind = FilterKind::ButterworthBandpass;
  spec.order = order;
  spec.low_hz = low_hz;
  spec.high_hz = high_hz;
  spec.sample_rate = fs;
  spec.sections = detail::poles_to_sections(std::move(digital), std::move(zeros));
  const double center = fs / std::numbers::pi * std::atan(std::sqrt(w0sq) / fs2);
  detail::normalize_gain(spec, center);
  return spec;
}

inline IirFilterSpec design_butterworth_lowpass(int order, double cutoff_hz, double fs) {
  if (order < 1) throw Error(ErrorCode::InvalidConfig, "filter order must be >= 1");
  if (!(cutoff_hz > 0) || !(cutoff_hz < fs / 2))
    throw Error(ErrorCode::InvalidCorners, "lowpass cutoff must satisfy 0 < fc < fs/2");
  const double fs2 = 2.0 * fs;
  const double wc = fs2 * std::tan(std::numbers::pi * cutoff_hz / fs);
  std::vector<detail::cplx> digital;
  for (const auto& p : detail::butterworth_prototype(order)) digital.push_back(detail::bilinear(p * wc, fs2));
  IirFilterSpec spec;
  spec.kind = FilterKind::ButterworthLowpass;
  spec.order = order;
  spec.high_hz = cutoff_hz;
  spec.sample_rate = fs;
  spec.sections = detail::poles_to_sections(std::move(digital), std::vector<double>(order, -1.0));
  detail::normalize_gain(spec, 0.0);
  return spec;
}

/// Second-order IIR notch with -3 dB bandwidth notch_hz / q.
inline IirFilterSpec design_notch(double notch_hz, double q, double fs) {
  if (!(notch_hz > 0) || !(notch_hz < fs / 2)) throw Error(ErrorCode::InvalidCorners, "notch must lie in (0, fs/2)");
  if (!(q > 0)) throw Error(ErrorCode::InvalidConfig, "notch quality factor must be positive");
  const double w0 = 2.0 * std::numbers::pi * notch_hz / fs;
  const double beta = std::tan(w0 / q / 2.0);
  const double gain = 1.0 / (1.0 + beta);
  IirFilterSpec spec;
  spec.kind = FilterKind::Notch;
  spec.order = 2;
  spec.notch_hz = notch_hz;
  spec.quality_q = q;
  spec.sample_rate = fs;
  spec.sections.push_back({gain, -2.0 * gain * std::cos(w0), gain, -2.0 * gain * std::cos(w0), 2.0 * gain - 1.0});
  return spec;
}

/// Cascade filtering in transposed direct form II. `state` holds two values per
/// section and is updated in place.
inline void sosfilt_inplace(std::span<const Biquad> sections, std::span<double> x, std::span<double> state) {
  for (std::size_t k = 0; k < sections.size(); ++k) {
    const auto& s = sections[k];
    double z1 = state[2 * k], z2 = state[2 * k + 1];
    for (auto& v : x) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    state[2 * k] = z1;
    state[2 * k + 1] = z2;
  }
}

inline std::vector<double> sosfilt(std::span<const Biquad> sections, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  std::vector<double> state(2 * sections.size(), 0.0);
  sosfilt_inplace(sections, y, state);
  return y;
}

/// Forward-backward filtering with Gustafsson's initial states: the forward
/// and backward start states are chosen by least squares so that
/// forward-then-backward and backward-then-forward agree, which suppresses the
/// edge transients that padding-based schemes leave behind.
/// Holds a per-length cache and is therefore not shareable across threads.
class ZeroPhaseFilter {
 public:
  explicit ZeroPhaseFilter(IirFilterSpec spec) : spec_(std::move(spec)) {}

  const IirFilterSpec& spec() const { return spec_; }

  std::vector<double> apply(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n == 0) return {};
    const auto& sec = spec_.sections;
    const std::size_t order = 2 * sec.size();

    std::vector<double> yf(x.begin(), x.end());
    run(yf);
    std::vector<double> yfb(yf.rbegin(), yf.rend());
    run(yfb);
    std::reverse(yfb.begin(), yfb.end());

    std::vector<double> yb(x.rbegin(), x.rend());
    run(yb);
    std::reverse(yb.begin(), yb.end());
    run(yb);  // yb now holds backward-then-forward

    if (n < 2 * order) return yfb;
    const auto& prep = prepared(n);
    Eigen::VectorXd delta(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) delta[static_cast<Eigen::Index>(i)] = yb[i] - yfb[i];
    const Eigen::VectorXd ic = prep.solver.solve(delta);
    const Eigen::VectorXd corr = prep.w * ic;
    for (std::size_t i = 0; i < n; ++i) yfb[i] += corr[static_cast<Eigen::Index>(i)];
    return yfb;
  }

 private:
  struct Prepared {
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> solver;
    Eigen::MatrixXd w;
  };

  void run(std::vector<double>& v) const {
    std::vector<double> state(2 * spec_.sections.size(), 0.0);
    sosfilt_inplace(spec_.sections, v, state);
  }

  const Prepared& prepared(std::size_t n) {
    if (cache_n_ == n && prep_) return *prep_;
    const auto& sec = spec_.sections;
    const std::size_t order = 2 * sec.size();
    const auto N = static_cast<Eigen::Index>(n);
    const auto K = static_cast<Eigen::Index>(order);
    Eigen::MatrixXd obs(N, K), obsr(N, K), s(N, K), sr(N, K);
    for (std::size_t k = 0; k < order; ++k) {
      std::vector<double> zeros(n, 0.0);
      std::vector<double> state(order, 0.0);
      state[k] = 1.0;
      sosfilt_inplace(sec, zeros, state);
      for (std::size_t i = 0; i < n; ++i) {
        obs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = zeros[i];
        obsr(static_cast<Eigen::Index>(n - 1 - i), static_cast<Eigen::Index>(k)) = zeros[i];
      }
      std::vector<double> rev(zeros.rbegin(), zeros.rend());
      run(rev);
      for (std::size_t i = 0; i < n; ++i) {
        s(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rev[i];
        sr(static_cast<Eigen::Index>(n - 1 - i), static_cast<Eigen::Index>(k)) = rev[i];
      }
    }
    Eigen::MatrixXd m(N, 2 * K);
    m << sr - obs, obsr - s;
    auto p = std::make_unique<Prepared>();
    p->solver.compute(m);
    p->w.resize(N, 2 * K);
    p->w << sr, obsr;
    prep_ = std::move(p);
    cache_n_ = n;
    return *prep_;
  }

  IirFilterSpec spec_;
  std::size_t cache_n_ = 0;
  std::unique_ptr<Prepared> prep_;
};

inline std::vector<double> filtfilt(const IirFilterSpec& spec, std::span<const double> x) {
  return ZeroPhaseFilter(spec).apply(x);
}

inline std::vector<double> trim_edges(std::span<const double> x, std::size_t trim) {
  if (x.size() <= 2 * trim) throw Error(ErrorCode::SegmentTooShort, "segment of " + std::to_string(x.size()) +
                                                                        " samples cannot lose " +
                                                                        std::to_string(trim) + " per edge");
  return {x.begin() + static_cast<std::ptrdiff_t>(trim), x.end() - static_cast<std::ptrdiff_t>(trim)};
}

/// Zero-phase filtering followed by removal of `trim` samples at both ends.
inline Segment filtfilt_trim(const Segment& segment, const IirFilterSpec& spec, std::size_t trim) {
  if (segment.size() <= 2 * trim)
    throw Error(ErrorCode::SegmentTooShort, "segment of " + std::to_string(segment.size()) +
                                                " samples cannot lose " + std::to_string(trim) + " per edge");
  Segment out = segment;
  out.samples = trim_edges(filtfilt(spec, segment.samples), trim);
  out.origin.start_index += trim;
  return out;
}

inline std::vector<double> apply_notch(std::span<const double> x, double notch_hz = 50.0, double q = 30.0,
                                       double fs = 250.0) {
  return filtfilt(design_notch(notch_hz, q, fs), x);
}

/// Centered moving average; windows shrink at the edges so the output keeps
/// the input length.
inline std::vector<double> uniform_smooth(std::span<const double> x, std::size_t window = 3) {
  if (window == 0 || window % 2 == 0) throw Error(ErrorCode::InvalidConfig, "smoothing window must be odd and >= 1");
  const std::size_t n = x.size();
  const std::size_t half = window / 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (window == 1) {
      out[i] = x[i];
      continue;
    }
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n, i + half + 1);
    double sum = 0.0;
    for (std::size_t j = lo; j < hi; ++j) sum += x[j];
    out[i] = sum / static_cast<double>(hi - lo);
  }
  return out;
}

struct PsdEstimate {
  std::vector<double> freqs;
  std::vector<double> power;  // µV²/Hz
  std::size_t window_len = 0;
  std::size_t overlap = 0;

  double resolution() const { return freqs.size() > 1 ? freqs[1] - freqs[0] : 0.0; }

  /// Integral of the piecewise-linear density between lo and hi (clamped to
  /// the grid). Additive over adjacent intervals.
  double integrate(double lo, double hi) const {
    if (freqs.size() < 2 || !(hi > lo)) return 0.0;
    lo = std::max(lo, freqs.front());
    hi = std::min(hi, freqs.back());
    if (!(hi > lo)) return 0.0;
    auto value_at = [&](std::size_t k, double f) {
      const double t = (f - freqs[k]) / (freqs[k + 1] - freqs[k]);
      return power[k] + t * (power[k + 1] - power[k]);
    };
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < freqs.size(); ++k) {
      const double a = std::max(lo, freqs[k]);
      const double b = std::min(hi, freqs[k + 1]);
      if (b <= a) continue;
      total += 0.5 * (value_at(k, a) + value_at(k, b)) * (b - a);
    }
    return total;
  }
};

/// Welch averaged periodogram: periodic Hann window, constant detrend per
/// chunk, one-sided density scaling.
inline PsdEstimate welch_psd(std::span<const double> x, double fs, std::size_t window_len = 250,
                             std::size_t overlap = 125) {
  if (window_len < 2 || overlap >= window_len) throw Error(ErrorCode::InvalidConfig, "invalid Welch parameters");
  if (x.size() < window_len)
    throw Error(ErrorCode::TooFewSamples, std::to_string(x.size()) + " samples < Welch window " +
                                               std::to_string(window_len));
  const std::size_t step = window_len - overlap;
  const std::size_t chunks = (x.size() - window_len) / step + 1;
  std::vector<double> window(window_len);
  double wss = 0.0;
  for (std::size_t i = 0; i < window_len; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(window_len));
    wss += window[i] * window[i];
  }
  const std::size_t bins = window_len / 2 + 1;
  PsdEstimate out;
  out.window_len = window_len;
  out.overlap = overlap;
  out.freqs.resize(bins);
  out.power.assign(bins, 0.0);
  for (std::size_t k = 0; k < bins; ++k) out.freqs[k] = static_cast<double>(k) * fs / static_cast<double>(window_len);

  auto& tf = fft::transform(window_len);
  std::vector<double> buf(window_len);
  std::vector<std::complex<double>> spec;
  for (std::size_t c = 0; c < chunks; ++c) {
    const auto chunk = x.subspan(c * step, window_len);
    double mean = 0.0;
    for (double v : chunk) mean += v;
    mean /= static_cast<double>(window_len);
    for (std::size_t i = 0; i < window_len; ++i) buf[i] = (chunk[i] - mean) * window[i];
    tf.forward(buf, spec);
    for (std::size_t k = 0; k < bins; ++k) out.power[k] += std::norm(spec[k]);
  }
  const double scale = 1.0 / (fs * wss * static_cast<double>(chunks));
  for (std::size_t k = 0; k < bins; ++k) {
    const bool edge = k == 0 || (window_len % 2 == 0 && k == bins - 1);
    out.power[k] *= scale * (edge ? 1.0 : 2.0);
  }
  return out;
}

}  // namespace eegattn::dsp
