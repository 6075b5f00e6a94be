#pragma once

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "core.hpp"
#include "error.hpp"
#include "features.hpp"
#include "fft.hpp"

namespace eegattn::synth {

enum class ScoreMode { Surrogate, Planted, Noise };

inline std::string to_string(ScoreMode m) {
  switch (m) {
    case ScoreMode::Surrogate: return "surrogate";
    case ScoreMode::Planted: return "planted";
    case ScoreMode::Noise: return "noise";
  }
  return "?";
}

inline ScoreMode score_mode_from_string(const std::string& s) {
  if (s == "surrogate") return ScoreMode::Surrogate;
  if (s == "planted") return ScoreMode::Planted;
  if (s == "noise") return ScoreMode::Noise;
  throw Error(ErrorCode::InvalidConfig, "unknown score mode " + s);
}

/// Named contrast presets, or a plain positive number. "paper-like" is tuned
/// for high-80s LOSO accuracy.
inline double contrast_preset(const std::string& name) {
  if (name == "paper-like") return 3.0;
  if (name == "easy") return 4.0;
  if (name == "hard") return 1.4;
  if (name == "none") return 1.0;
  double v = 0;
  const auto res = std::from_chars(name.data(), name.data() + name.size(), v);
  if (res.ec == std::errc() && res.ptr == name.data() + name.size() && v > 0) return v;
  throw Error(ErrorCode::InvalidConfig, "unknown contrast preset " + name);
}

struct GeneratorConfig {
  std::size_t subjects = 20;
  std::size_t blocks_per_class = 10;
  std::size_t block_length = 7500;
  double sample_rate = 250.0;
  /// Power contrast: attentive blocks raise low-beta power by sqrt(contrast),
  /// non-attentive blocks raise alpha and theta power by sqrt(contrast), so the
  /// expected B1/(A+T) ratio differs by `contrast` between classes.
  double contrast = 3.0;
  double background_uv = 7.0;    // RMS of the 1/f background over 1-50 Hz
  std::vector<double> band_gain{1.0, 1.0, 1.6, 1.0, 1.0, 1.0};  // D T A B1 B2 G power gains
  double subject_sd = 0.25;      // log-normal spread of per-subject band gains
  double block_sd = 0.10;        // log-normal spread of per-block band gains
  double amplitude_sd = 0.15;    // per-subject overall amplitude spread (log)
  double noise_floor_uv = 1.0;   // white noise RMS
  double line_noise_uv = 2.0;    // 50 Hz amplitude
  double blink_rate_per_min = 6.0;
  double blink_min_uv = 60.0, blink_max_uv = 120.0;
  double blink_min_ms = 200.0, blink_max_ms = 400.0;
  ScoreMode scores = ScoreMode::Surrogate;
  double score_noise = 8.0;
  bool with_aux = true;
  std::uint64_t seed = 42;

  void validate() const {
    if (subjects < 1 || blocks_per_class < 1) throw Error(ErrorCode::InvalidConfig, "need at least one subject and block");
    if (block_length < 1750) throw Error(ErrorCode::InvalidConfig, "block length must be at least one window (1750)");
    if (!(sample_rate > 0)) throw Error(ErrorCode::InvalidConfig, "sample rate must be positive");
    if (!(contrast >= 1.0)) throw Error(ErrorCode::InvalidConfig, "contrast must be >= 1");
    if (band_gain.size() != 6) throw Error(ErrorCode::InvalidConfig, "band_gain needs six entries");
    for (double g : band_gain)
      if (!(g >= 0)) throw Error(ErrorCode::InvalidConfig, "band gains must be non-negative");
    if (!(background_uv >= 0 && noise_floor_uv >= 0 && line_noise_uv >= 0 && blink_rate_per_min >= 0))
      throw Error(ErrorCode::InvalidConfig, "amplitudes and rates must be non-negative");
    if (!(blink_min_uv <= blink_max_uv && blink_min_ms <= blink_max_ms && blink_min_ms > 0))
      throw Error(ErrorCode::InvalidConfig, "blink ranges are inverted");
  }
};

struct BlinkEvent {
  std::size_t apex_index = 0;
  double amplitude_uv = 0;
  double duration_ms = 0;
};

struct BlockTruth {
  std::string subject_id, block_id;
  Label label = Label::Unlabeled;
  std::vector<double> band_power_gain;  // effective per-band power gains
  std::vector<BlinkEvent> blinks;
};

struct GeneratedBlock {
  EegRecord record;
  BlockTruth truth;
};

namespace detail {

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ULL + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline int band_of(double f, const std::vector<features::BandDefinition>& bands) {
  for (std::size_t b = 0; b < bands.size(); ++b)
    if (f >= bands[b].low_hz && f < bands[b].high_hz) return static_cast<int>(b);
  return -1;
}

inline double base_psd(double f) {  // 1/f shape with a gentle roll-in below 0.5 Hz
  if (f <= 0) return 0;
  const double roll = f < 0.5 ? f / 0.5 : 1.0;
  return roll / std::max(f, 0.5);
}

/// Colored Gaussian noise with one-sided density gain(f)^2 * base(f) * scale.
template <class Gain>
std::vector<double> spectral_noise(std::size_t n, double fs, double scale, Gain&& power_gain, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<std::complex<double>> spec(n / 2 + 1);
  const double df = fs / static_cast<double>(n);
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const double f = static_cast<double>(k) * df;
    const double density = scale * base_psd(f) * power_gain(f);
    // var(x) = 2 * sum_k E|X_k|^2 for the unnormalized inverse, so E|X_k|^2 = S(f) df / 2.
    const double a = std::sqrt(density * df / 2.0);
    const double re = gauss(rng), im = gauss(rng);
    spec[k] = {a * re / std::sqrt(2.0), a * im / std::sqrt(2.0)};
  }
  if (n % 2 == 0) spec.back() = {spec.back().real() * std::sqrt(2.0), 0.0};
  std::vector<double> x;
  fft::transform(n).inverse(spec, x);
  return x;
}

inline double blink_shape(double t, double rise, double fall) {
  if (t < 0 || t > rise + fall) return 0;
  if (t <= rise) return 0.5 * (1 - std::cos(std::numbers::pi * t / rise));
  return 0.5 * (1 + std::cos(std::numbers::pi * (t - rise) / fall));
}

inline std::array<double, 6> window_band_powers(std::span<const double> x, double fs,
                                                const std::vector<features::BandDefinition>& bands) {
  std::vector<std::complex<double>> spec;
  fft::transform(x.size()).forward(x, spec);
  std::array<double, 6> p{};
  const double n = static_cast<double>(x.size());
  for (std::size_t k = 1; k < spec.size(); ++k) {
    const int b = band_of(static_cast<double>(k) * fs / n, bands);
    if (b >= 0 && b < 6) p[static_cast<std::size_t>(b)] += 2.0 * std::norm(spec[k]) / (n * n);
  }
  return p;
}

}  // namespace detail

/// Expected B1/(A+T) power ratio of the unmodulated background.
inline double reference_ratio(const GeneratorConfig& cfg) {
  const auto bands = features::default_bands();
  auto integral = [&](const features::BandDefinition& b, double gain) {
    return gain * std::log(b.high_hz / b.low_hz);  // integral of 1/f
  };
  return integral(bands[3], cfg.band_gain[3]) / (integral(bands[1], cfg.band_gain[1]) + integral(bands[2], cfg.band_gain[2]));
}

inline std::vector<std::string> subject_ids(const GeneratorConfig& cfg) {
  std::vector<std::string> ids;
  for (std::size_t s = 0; s < cfg.subjects; ++s) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "S%02zu", s + 1);
    ids.push_back(buf);
  }
  return ids;
}

/// Per-subject multiplicative band gains (median 1).
inline std::vector<double> subject_gains(const GeneratorConfig& cfg, std::size_t subject) {
  std::mt19937_64 rng(detail::mix(cfg.seed, 0x5B1EC7ULL + subject));
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> out(7);
  for (std::size_t b = 0; b < 6; ++b) out[b] = std::exp(cfg.subject_sd * g(rng));
  out[6] = std::exp(cfg.amplitude_sd * g(rng));  // overall amplitude
  return out;
}

/// One labeled block. Block index `b` counts within the subject; the class
/// alternates so both classes are spread over the session.
inline GeneratedBlock generate_block(const GeneratorConfig& cfg, std::size_t subject, std::size_t b, Label label) {
  const auto bands = features::default_bands();
  const auto sg = subject_gains(cfg, subject);
  std::mt19937_64 rng(detail::mix(detail::mix(cfg.seed, subject + 1), b + 1));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  std::vector<double> gain(6);
  const double c = std::sqrt(cfg.contrast);
  for (std::size_t k = 0; k < 6; ++k) {
    gain[k] = cfg.band_gain[k] * sg[k] * std::exp(cfg.block_sd * gauss(rng));
    if (label == Label::Attentive && k == 3) gain[k] *= c;
    if (label == Label::NonAttentive && (k == 1 || k == 2)) gain[k] *= c;
  }
  const std::size_t n = cfg.block_length;
  const double fs = cfg.sample_rate;
  // Scale so an ungained background has background_uv RMS over 1-50 Hz.
  const double scale = cfg.background_uv * cfg.background_uv / std::log(50.0) * sg[6] * sg[6];
  auto power_gain = [&](double f) {
    const int bi = detail::band_of(f, bands);
    return bi >= 0 ? gain[static_cast<std::size_t>(bi)] : 1.0;
  };
  auto x = detail::spectral_noise(n, fs, scale, power_gain, rng);

  const double phase = 2 * std::numbers::pi * unif(rng);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] += cfg.noise_floor_uv * gauss(rng);
    x[i] += cfg.line_noise_uv * std::sin(2 * std::numbers::pi * 50.0 * static_cast<double>(i) / fs + phase);
  }

  GeneratedBlock out;
  out.truth.label = label;
  out.truth.band_power_gain = gain;
  if (cfg.blink_rate_per_min > 0) {
    // Poisson arrivals with a one-second refractory gap.
    std::exponential_distribution<double> gap(cfg.blink_rate_per_min / 60.0);
    double t = gap(rng);
    while (true) {
      const double dur = (cfg.blink_min_ms + (cfg.blink_max_ms - cfg.blink_min_ms) * unif(rng)) / 1000.0;
      const double amp = cfg.blink_min_uv + (cfg.blink_max_uv - cfg.blink_min_uv) * unif(rng);
      const double rise = 0.4 * dur, fall = 0.6 * dur;
      const auto apex = static_cast<std::size_t>(std::llround((t + rise) * fs));
      if ((t + dur) * fs >= static_cast<double>(n)) break;
      for (std::size_t i = static_cast<std::size_t>(t * fs); i < n && static_cast<double>(i) <= (t + dur) * fs; ++i)
        x[i] += amp * detail::blink_shape(static_cast<double>(i) / fs - t, rise, fall);
      out.truth.blinks.push_back({apex, amp, dur * 1000.0});
      t += dur + 1.0 + gap(rng);
    }
  }
  for (auto& v : x) v = std::round(v * 1e4) / 1e4;

  EegRecord& rec = out.record;
  rec.samples = std::move(x);
  rec.sample_rate = fs;
  rec.label = label;
  if (cfg.with_aux) {
    AuxSeries aux;
    aux.rate_hz = 1.0;
    aux.synthetic = true;
    const auto win = static_cast<std::size_t>(fs);
    const std::size_t windows = (n + win - 1) / win;
    for (auto& ch : aux.channels) ch.assign(windows, 0.0);
    const double r0 = reference_ratio(cfg);
    for (std::size_t w = 0; w < windows; ++w) {
      const std::size_t s0 = w * win, len = std::min(win, n - s0);
      std::array<double, 6> p{};
      if (len >= 8) p = detail::window_band_powers(std::span<const double>(rec.samples).subspan(s0, len), fs, bands);
      for (std::size_t k = 0; k < 6; ++k) aux.channels[k][w] = std::round(p[k] * 1e4) / 1e4;
      double att = 50, med = 50;
      switch (cfg.scores) {
        case ScoreMode::Surrogate: {
          const double ratio = p[1] + p[2] > 0 ? p[3] / (p[1] + p[2]) : r0;
          const double z = 20.0 * std::log(std::max(ratio, 1e-9) / r0);
          att = 50 + z + cfg.score_noise * gauss(rng);
          med = 50 - z + cfg.score_noise * gauss(rng);
          break;
        }
        case ScoreMode::Planted:
          att = label == Label::Attentive ? 70 : 30;
          med = 100 - att;
          break;
        case ScoreMode::Noise:
          att = 100 * unif(rng);
          med = 100 * unif(rng);
          break;
      }
      aux.channels[kAuxAttention][w] = std::round(std::clamp(att, 0.0, 100.0));
      aux.channels[kAuxMeditation][w] = std::round(std::clamp(med, 0.0, 100.0));
    }
    rec.aux = std::move(aux);
  }
  return out;
}

/// Whole dataset in subject-major order, classes alternating block by block.
inline std::vector<GeneratedBlock> generate_dataset(const GeneratorConfig& cfg) {
  cfg.validate();
  const auto ids = subject_ids(cfg);
  std::vector<GeneratedBlock> out;
  for (std::size_t s = 0; s < cfg.subjects; ++s) {
    for (std::size_t b = 0; b < 2 * cfg.blocks_per_class; ++b) {
      const Label label = (b % 2 == 0) ? Label::Attentive : Label::NonAttentive;
      auto g = generate_block(cfg, s, b, label);
      char bid[32];
      std::snprintf(bid, sizeof bid, "%s-B%02zu", ids[s].c_str(), b + 1);
      g.record.subject_id = ids[s];
      g.record.block_id = bid;
      g.truth.subject_id = ids[s];
      g.truth.block_id = bid;
      out.push_back(std::move(g));
    }
  }
  return out;
}

inline nlohmann::json to_json(const BlockTruth& t) {
  nlohmann::json blinks = nlohmann::json::array();
  for (const auto& b : t.blinks)
    blinks.push_back({{"apex_index", b.apex_index}, {"amplitude_uv", b.amplitude_uv}, {"duration_ms", b.duration_ms}});
  return {{"subject_id", t.subject_id},
          {"block_id", t.block_id},
          {"label", static_cast<int>(t.label)},
          {"band_power_gain", t.band_power_gain},
          {"blinks", blinks}};
}

inline nlohmann::json to_json(const GeneratorConfig& c) {
  return {{"subjects", c.subjects},
          {"blocks_per_class", c.blocks_per_class},
          {"block_length", c.block_length},
          {"sample_rate", c.sample_rate},
          {"contrast", c.contrast},
          {"background_uv", c.background_uv},
          {"band_gain", c.band_gain},
          {"subject_sd", c.subject_sd},
          {"block_sd", c.block_sd},
          {"amplitude_sd", c.amplitude_sd},
          {"noise_floor_uv", c.noise_floor_uv},
          {"line_noise_uv", c.line_noise_uv},
          {"blink_rate_per_min", c.blink_rate_per_min},
          {"blink_uv", {c.blink_min_uv, c.blink_max_uv}},
          {"blink_ms", {c.blink_min_ms, c.blink_max_ms}},
          {"scores", to_string(c.scores)},
          {"score_noise", c.score_noise},
          {"with_aux", c.with_aux},
          {"seed", c.seed}};
}

// ---------------------------------------------------------------------------
// Streaming sources

struct SampleEvent {
  double timestamp = 0;  // seconds since stream start
  double value = 0;      // µV
  std::optional<AuxSnapshot> aux;
};

class SampleSource {
 public:
  virtual ~SampleSource() = default;
  virtual std::optional<SampleEvent> try_next() = 0;
  virtual double sample_rate() const = 0;

  SampleEvent next() {
    auto e = try_next();
    if (!e) throw Error(ErrorCode::SourceExhausted, "end of stream");
    return *e;
  }
};

/// Emits recorded samples in order. A gap inserted before sample k makes the
/// timestamps jump, which downstream reads as lost contact.
class ReplaySource : public SampleSource {
 public:
  explicit ReplaySource(std::vector<EegRecord> records) : records_(std::move(records)) {
    if (!records_.empty()) fs_ = records_.front().sample_rate;
  }

  void inject_gap(std::size_t before_sample, double seconds) { gaps_.push_back({before_sample, seconds}); }

  std::optional<SampleEvent> try_next() override {
    while (rec_ < records_.size() && pos_ >= records_[rec_].samples.size()) {
      ++rec_;
      pos_ = 0;
    }
    if (rec_ >= records_.size()) return std::nullopt;
    for (const auto& [at, sec] : gaps_)
      if (at == emitted_) offset_ += sec;
    const auto& r = records_[rec_];
    SampleEvent e;
    e.timestamp = static_cast<double>(emitted_) / fs_ + offset_;
    e.value = r.samples[pos_];
    if (r.aux) e.aux = r.aux->at_sample(pos_, r.sample_rate);
    ++pos_;
    ++emitted_;
    return e;
  }

  double sample_rate() const override { return fs_; }
  std::size_t emitted() const { return emitted_; }
  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& r : records_) n += r.samples.size();
    return n;
  }

 private:
  std::vector<EegRecord> records_;
  std::vector<std::pair<std::size_t, double>> gaps_;
  double fs_ = 250.0;
  std::size_t rec_ = 0, pos_ = 0, emitted_ = 0;
  double offset_ = 0;
};

/// Endless synthetic stream: blocks alternate between classes for one subject.
class LiveGenerator : public SampleSource {
 public:
  explicit LiveGenerator(GeneratorConfig cfg, std::size_t subject = 0) : cfg_(std::move(cfg)), subject_(subject) {
    cfg_.validate();
  }

  std::optional<SampleEvent> try_next() override {
    if (pos_ >= current_.record.samples.size()) {
      const Label l = block_ % 2 == 0 ? Label::Attentive : Label::NonAttentive;
      current_ = generate_block(cfg_, subject_, block_, l);
      ++block_;
      pos_ = 0;
    }
    SampleEvent e;
    e.timestamp = static_cast<double>(emitted_) / cfg_.sample_rate;
    e.value = current_.record.samples[pos_];
    if (current_.record.aux) e.aux = current_.record.aux->at_sample(pos_, cfg_.sample_rate);
    ++pos_;
    ++emitted_;
    return e;
  }

  double sample_rate() const override { return cfg_.sample_rate; }
  Label current_label() const { return current_.record.label; }

 private:
  GeneratorConfig cfg_;
  std::size_t subject_;
  GeneratedBlock current_;
  std::size_t block_ = 0, pos_ = 0, emitted_ = 0;
};

/// Wall-clock pacing: sample i is released at start + i / (fs * rate).
class Pacer {
 public:
  Pacer(double sample_rate, double rate) : period_(1.0 / (sample_rate * rate)), start_(std::chrono::steady_clock::now()) {
    if (!(rate > 0)) throw Error(ErrorCode::InvalidConfig, "playback rate must be positive");
  }
  void wait_for(std::size_t index) const {
    std::this_thread::sleep_until(start_ + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                               std::chrono::duration<double>(period_ * static_cast<double>(index))));
  }

 private:
  double period_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace eegattn::synth
