#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "core.hpp"
#include "dsp.hpp"
#include "error.hpp"
#include "stats.hpp"
#include "wavelet.hpp"

namespace eegattn::features {

struct BandDefinition {
  std::string name;
  double low_hz = 0, high_hz = 0;
};

inline std::vector<BandDefinition> default_bands() {
  return {{"D", 0.5, 4}, {"T", 4, 8}, {"A", 8, 12}, {"B1", 12, 20}, {"B2", 20, 30}, {"G", 30, 50}};
}

inline void validate_bands(const std::vector<BandDefinition>& bands) {
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const auto& b = bands[i];
    if (!(b.low_hz >= 0.5 && b.low_hz < b.high_hz && b.high_hz <= 64.0))
      throw Error(ErrorCode::InvalidConfig, "band " + b.name + " must satisfy 0.5 <= low < high <= 64");
    if (i > 0 && b.low_hz < bands[i - 1].high_hz)
      throw Error(ErrorCode::InvalidConfig, "bands must be ascending and non-overlapping");
  }
}

struct FeatureConfig {
  std::vector<BandDefinition> bands = default_bands();
  std::size_t wpt_level = 5;
  std::string wavelet = "db8";
  std::size_t welch_window = 250;
  std::size_t welch_overlap = 125;
  double total_low_hz = 0.5;
  double total_high_hz = 64.0;
  std::size_t sampen_m = 2;
  double sampen_r = 0.2;  // fraction of the standard deviation
  double rolloff = 0.85;
};

/// Power-law behaviour of a feature under amplitude scaling x -> c x:
/// value -> c^k value. kNotHomogeneous marks features without such a law.
inline constexpr int kNotHomogeneous = -1;

struct FeatureSpec {
  std::string name;
  std::string family;
  std::string band;  // empty when the feature is not band-specific
  int scale_exponent = 0;
};

inline constexpr const char* kCatalogVersion = "eegattn-features/1";

struct FeatureManifest {
  std::string version = kCatalogVersion;
  FeatureConfig config;
  bool with_aux = true;
  std::vector<FeatureSpec> entries;

  std::size_t size() const { return entries.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(e.name);
    return out;
  }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (entries[i].name == name) return i;
    return std::nullopt;
  }

  nlohmann::json to_json() const {
    nlohmann::json bands = nlohmann::json::array();
    for (const auto& b : config.bands) bands.push_back({{"name", b.name}, {"low_hz", b.low_hz}, {"high_hz", b.high_hz}});
    nlohmann::json entries_j = nlohmann::json::array();
    for (const auto& e : entries)
      entries_j.push_back({{"name", e.name}, {"family", e.family}, {"band", e.band}, {"scale_exponent", e.scale_exponent}});
    return {{"version", version},
            {"with_aux", with_aux},
            {"config",
             {{"bands", bands},
              {"wpt_level", config.wpt_level},
              {"wavelet", config.wavelet},
              {"welch_window", config.welch_window},
              {"welch_overlap", config.welch_overlap},
              {"total_low_hz", config.total_low_hz},
              {"total_high_hz", config.total_high_hz},
              {"sampen_m", config.sampen_m},
              {"sampen_r", config.sampen_r},
              {"rolloff", config.rolloff}}},
            {"entries", entries_j}};
  }

  /// FNV-1a over the canonical JSON form, as 16 hex digits.
  std::string hash() const {
    const auto text = to_json().dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }

  static FeatureManifest from_json(const nlohmann::json& j) {
    FeatureManifest m;
    m.version = j.at("version").get<std::string>();
    m.with_aux = j.at("with_aux").get<bool>();
    const auto& c = j.at("config");
    m.config.bands.clear();
    for (const auto& b : c.at("bands"))
      m.config.bands.push_back({b.at("name").get<std::string>(), b.at("low_hz").get<double>(), b.at("high_hz").get<double>()});
    m.config.wpt_level = c.at("wpt_level").get<std::size_t>();
    m.config.wavelet = c.at("wavelet").get<std::string>();
    m.config.welch_window = c.at("welch_window").get<std::size_t>();
    m.config.welch_overlap = c.at("welch_overlap").get<std::size_t>();
    m.config.total_low_hz = c.at("total_low_hz").get<double>();
    m.config.total_high_hz = c.at("total_high_hz").get<double>();
    m.config.sampen_m = c.at("sampen_m").get<std::size_t>();
    m.config.sampen_r = c.at("sampen_r").get<double>();
    m.config.rolloff = c.at("rolloff").get<double>();
    for (const auto& e : j.at("entries"))
      m.entries.push_back({e.at("name").get<std::string>(), e.at("family").get<std::string>(),
                           e.at("band").get<std::string>(), e.at("scale_exponent").get<int>()});
    return m;
  }
};

// Per-signal statistics computed on the whole segment and on every band
// reconstruction, with their scaling exponents.
struct SignalStat {
  const char* name;
  int exponent;
};
inline constexpr SignalStat kSignalStats[] = {
    {"mean", 1}, {"md", 1},  {"var", 2},  {"skew", 0}, {"kurt", 0}, {"rms", 1},     {"avg_pow", 2},
    {"ptp", 1},  {"iqr", 1}, {"mad", 1},  {"min", 1},  {"max", 1},  {"zcr", 0},     {"ha", 2},
    {"hm", 0},   {"hc", 0},  {"n1d", 0},  {"n2d", 0},  {"ll", 1},   {"teager", 2}, {"sampen", 0}};

inline constexpr SignalStat kSpectralStats[] = {
    {"spec_centroid", 0}, {"spec_spread", 0},   {"spec_skew", 0},  {"spec_kurt", 0},
    {"spec_entropy", 0},  {"spec_crest", 0},    {"spec_flatness", 0}, {"spec_rolloff", 0},
    {"spec_edge95", 0},   {"spec_peak", 0},     {"spec_slope", 0},    {"spec_total", 2}};

inline const std::vector<std::string>& aux_feature_names() {
  static const std::vector<std::string> names = {"aux_delta", "aux_theta",     "aux_alpha", "aux_low_beta",
                                                 "aux_high_beta", "aux_gamma", "attention", "meditation"};
  return names;
}

inline bool is_aux_feature(const std::string& name) {
  const auto& a = aux_feature_names();
  return std::find(a.begin(), a.end(), name) != a.end();
}

/// The versioned catalog. Order is fixed for a given configuration.
inline FeatureManifest build_manifest(const FeatureConfig& cfg = {}, bool with_aux = true) {
  validate_bands(cfg.bands);
  FeatureManifest m;
  m.config = cfg;
  m.with_aux = with_aux;
  auto add = [&](std::string name, std::string family, std::string band, int k) {
    m.entries.push_back({std::move(name), std::move(family), std::move(band), k});
  };
  for (const auto& s : kSignalStats) add(s.name, std::string(s.name) == "sampen" ? "sampen" : "time", "", s.exponent);
  for (const auto& b : cfg.bands)
    for (const auto& s : kSignalStats)
      add(std::string(s.name) + "_" + b.name, std::string(s.name) == "sampen" ? "band_sampen" : "band_time", b.name,
          s.exponent);
  for (const auto& s : kSpectralStats) add(s.name, "spectral", "", s.exponent);
  for (const auto& b : cfg.bands) {
    add("abp_" + b.name, "band_power", b.name, 2);
    add("RP_" + b.name, "band_power", b.name, 0);
    add("pf_" + b.name, "band_power", b.name, 0);
    add("sent_" + b.name, "band_power", b.name, 0);
  }
  add("en_b_at", "ratio", "", 0);
  add("beta_at", "ratio", "", 0);
  add("at_beta", "ratio", "", 0);
  add("b2_at", "ratio", "", 0);
  add("g_ab", "ratio", "", 0);
  for (const auto& x : cfg.bands)
    for (const auto& y : cfg.bands)
      if (x.name != y.name) add("ratio_" + x.name + "_" + y.name, "ratio", "", 0);
  const std::size_t leaves = std::size_t{1} << cfg.wpt_level;
  for (std::size_t k = 0; k < leaves; ++k) add("wpt_e" + std::to_string(k), "wpt", "", 2);
  for (std::size_t k = 0; k < leaves; ++k) add("wpt_re" + std::to_string(k), "wpt", "", 0);
  for (std::size_t k = 0; k < leaves; ++k) add("wpt_le" + std::to_string(k), "wpt", "", kNotHomogeneous);
  for (std::size_t lvl = cfg.wpt_level >= 2 ? cfg.wpt_level - 2 : 1; lvl < cfg.wpt_level; ++lvl) {
    const std::size_t n = std::size_t{1} << lvl;
    for (std::size_t k = 0; k < n; ++k) add("wpt" + std::to_string(lvl) + "_e" + std::to_string(k), "wpt", "", 2);
    for (std::size_t k = 0; k < n; ++k) add("wpt" + std::to_string(lvl) + "_re" + std::to_string(k), "wpt", "", 0);
  }
  add("wpt_ent", "wpt", "", 0);
  for (const auto& b : cfg.bands) {
    add("wen_" + b.name, "wpt", b.name, 2);
    add("wle_" + b.name, "wpt", b.name, kNotHomogeneous);
  }
  if (with_aux)
    for (const auto& n : aux_feature_names()) add(n, "aux", "", kNotHomogeneous);
  return m;
}

struct Hjorth {
  double activity = 0, mobility = 0, complexity = 0;
};

/// Activity, mobility and complexity; all zero for a constant signal.
inline Hjorth hjorth(std::span<const double> x) {
  if (x.size() < 3) throw Error(ErrorCode::SignalTooShort, "Hjorth parameters need at least 3 samples");
  const double v0 = stats::variance(x);
  if (v0 == 0.0) return {};
  const auto d1 = stats::diff(x);
  const auto d2 = stats::diff(d1);
  const double v1 = stats::variance(d1), v2 = stats::variance(d2);
  const double mobility = std::sqrt(v1 / v0);
  const double complexity = std::sqrt(v2 / v1) / mobility;
  return {v0, mobility, complexity};
}

/// Sample entropy with template length m and tolerance r (absolute units),
/// Chebyshev distance, self-matches excluded.
inline double sample_entropy(std::span<const double> x, std::size_t m, double r) {
  const std::size_t n = x.size();
  if (n <= m + 1) return std::numeric_limits<double>::quiet_NaN();
  const std::size_t templates = n - m;
  std::uint64_t b = 0, a = 0;
  for (std::size_t i = 0; i + 1 < templates; ++i) {
    for (std::size_t j = i + 1; j < templates; ++j) {
      std::size_t k = 0;
      while (k < m && std::abs(x[i + k] - x[j + k]) <= r) ++k;
      if (k < m) continue;
      ++b;
      if (std::abs(x[i + m] - x[j + m]) <= r) ++a;
    }
  }
  return -std::log(static_cast<double>(a) / static_cast<double>(b));
}

struct BandPower {
  std::string name;
  double absolute = 0;
  double relative = 0;
};

/// Absolute power integrates the density over the band; relative power divides
/// by the integral over [total_low, total_high]. Zero total power gives zero
/// relative powers.
inline std::vector<BandPower> band_powers(const dsp::PsdEstimate& psd, const std::vector<BandDefinition>& bands,
                                          double total_low = 0.5, double total_high = 64.0) {
  const double total = psd.integrate(total_low, total_high);
  std::vector<BandPower> out;
  for (const auto& b : bands) {
    const double abs_p = psd.integrate(b.low_hz, b.high_hz);
    out.push_back({b.name, abs_p, total > 0 ? abs_p / total : 0.0});
  }
  return out;
}

inline double clean(double v) { return std::isfinite(v) ? v : 0.0; }

struct FeatureVector {
  std::vector<std::string> names;
  std::vector<double> values;
  SegmentOrigin origin;
  Label label = Label::Unlabeled;
};

namespace detail {

inline double nan() { return std::numeric_limits<double>::quiet_NaN(); }

class Sink {
 public:
  explicit Sink(const std::vector<std::string>& wanted) : values_(wanted.size(), nan()) {
    for (std::size_t i = 0; i < wanted.size(); ++i) index_.emplace(wanted[i], i);
  }
  bool wants(const std::string& name) const { return index_.count(name) != 0; }
  void put(const std::string& name, double v) {
    auto it = index_.find(name);
    if (it != index_.end()) values_[it->second] = v;
  }
  std::vector<double> take() { return std::move(values_); }

 private:
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<double> values_;
};

inline void signal_stats(std::span<const double> x, const std::string& suffix, bool with_sampen, const FeatureConfig& cfg,
                         Sink& sink) {
  const double n = static_cast<double>(x.size());
  const double m = stats::mean(x);
  const double var = stats::variance(x);
  const double sd = std::sqrt(var);
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  double sq = 0, mad = 0;
  for (double v : x) {
    sq += v * v;
    mad += std::abs(v - m);
  }
  std::size_t crossings = 0;
  for (std::size_t i = 1; i < x.size(); ++i)
    if ((x[i - 1] - m) * (x[i] - m) < 0) ++crossings;
  double d1 = 0, d2 = 0, teager = 0;
  for (std::size_t i = 1; i < x.size(); ++i) d1 += std::abs(x[i] - x[i - 1]);
  for (std::size_t i = 2; i < x.size(); ++i) d2 += std::abs(x[i] - x[i - 2]);
  for (std::size_t i = 1; i + 1 < x.size(); ++i) teager += x[i] * x[i] - x[i - 1] * x[i + 1];
  const Hjorth h = x.size() >= 3 ? hjorth(x) : Hjorth{};

  sink.put("mean" + suffix, m);
  sink.put("md" + suffix, stats::quantile_sorted(sorted, 0.5));
  sink.put("var" + suffix, var);
  sink.put("skew" + suffix, stats::skewness(x));
  sink.put("kurt" + suffix, stats::kurtosis(x));
  sink.put("rms" + suffix, std::sqrt(sq / n));
  sink.put("avg_pow" + suffix, sq / n);
  sink.put("ptp" + suffix, sorted.back() - sorted.front());
  sink.put("iqr" + suffix, stats::quantile_sorted(sorted, 0.75) - stats::quantile_sorted(sorted, 0.25));
  sink.put("mad" + suffix, mad / n);
  sink.put("min" + suffix, sorted.front());
  sink.put("max" + suffix, sorted.back());
  sink.put("zcr" + suffix, static_cast<double>(crossings) / (n - 1));
  sink.put("ha" + suffix, h.activity);
  sink.put("hm" + suffix, h.mobility);
  sink.put("hc" + suffix, h.complexity);
  sink.put("n1d" + suffix, d1 / (n - 1) / sd);
  sink.put("n2d" + suffix, d2 / (n - 2) / sd);
  sink.put("ll" + suffix, d1 / (n - 1));
  sink.put("teager" + suffix, teager / (n - 2));
  if (with_sampen) sink.put("sampen" + suffix, sample_entropy(x, cfg.sampen_m, cfg.sampen_r * sd));
}

inline bool any_wanted(const Sink& sink, std::span<const std::string> names) {
  return std::any_of(names.begin(), names.end(), [&](const std::string& n) { return sink.wants(n); });
}

}  // namespace detail

/// Computes the requested subset of the catalog for one segment. Families
/// whose features are not requested are skipped entirely.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureManifest manifest) : FeatureExtractor(manifest, manifest.names()) {}

  FeatureExtractor(FeatureManifest manifest, std::vector<std::string> wanted)
      : manifest_(std::move(manifest)), wanted_(std::move(wanted)), wavelet_(wavelet::by_name(manifest_.config.wavelet)) {
    for (const auto& w : wanted_) {
      const auto idx = manifest_.index_of(w);
      if (!idx) throw Error(ErrorCode::FeatureMismatch, "feature " + w + " is not in the manifest");
      const auto& fam = manifest_.entries[*idx].family;
      families_.push_back(fam);
    }
    auto has = [&](const char* f) { return std::find(families_.begin(), families_.end(), f) != families_.end(); };
    need_time_ = has("time") || has("sampen");
    need_band_time_ = has("band_time") || has("band_sampen");
    need_psd_ = has("spectral") || has("band_power") || has("ratio");
    need_wpt_ = need_band_time_ || has("wpt");
    need_aux_ = has("aux");
    need_sampen_ = has("sampen");
    need_band_sampen_ = has("band_sampen");
  }

  const FeatureManifest& manifest() const { return manifest_; }
  const std::vector<std::string>& names() const { return wanted_; }

  FeatureVector extract(const Segment& segment) const {
    const auto& cfg = manifest_.config;
    const std::span<const double> x = segment.samples;
    detail::Sink sink(wanted_);

    if (need_aux_) {
      if (!segment.aux)
        throw Error(ErrorCode::ManifestMismatch, "segment from " + segment.origin.block_id +
                                                     " lacks the auxiliary channels the manifest requires");
      const auto& names = aux_feature_names();
      for (std::size_t c = 0; c < kAuxChannelCount; ++c) sink.put(names[c], (*segment.aux)[c]);
    }
    if (need_time_) detail::signal_stats(x, "", need_sampen_, cfg, sink);

    if (need_wpt_) {
      const auto w = wavelet::wpt_decompose(x, cfg.wpt_level, wavelet_);
      const std::size_t leaves = w.node_count();
      const double node_width = segment.sample_rate / 2.0 / static_cast<double>(leaves);
      double total = 0;
      std::vector<double> e(leaves);
      for (std::size_t k = 0; k < leaves; ++k) total += (e[k] = w.node_energy(k));
      double ent = 0;
      for (std::size_t k = 0; k < leaves; ++k) {
        const auto ks = std::to_string(k);
        sink.put("wpt_e" + ks, e[k]);
        sink.put("wpt_re" + ks, e[k] / total);
        double le = 0;
        for (double c : w.node(k))
          if (c != 0.0) le += std::log(c * c);
        sink.put("wpt_le" + ks, le);
        const double p = e[k] / total;
        if (p > 0) ent -= p * std::log(p);
      }
      sink.put("wpt_ent", total > 0 ? ent / std::log(static_cast<double>(leaves)) : detail::nan());
      for (std::size_t lvl = cfg.wpt_level >= 2 ? cfg.wpt_level - 2 : 1; lvl < cfg.wpt_level; ++lvl) {
        for (std::size_t k = 0; k < (std::size_t{1} << lvl); ++k) {
          const double ce = w.coarse_energy(lvl, k);
          sink.put("wpt" + std::to_string(lvl) + "_e" + std::to_string(k), ce);
          sink.put("wpt" + std::to_string(lvl) + "_re" + std::to_string(k), ce / total);
        }
      }
      for (const auto& b : cfg.bands) {
        std::vector<std::size_t> nodes;
        for (std::size_t k = 0; k < leaves; ++k) {
          const double center = (static_cast<double>(k) + 0.5) * node_width;
          if (center >= b.low_hz && center < b.high_hz) nodes.push_back(k);
        }
        double be = 0, ble = 0;
        for (auto k : nodes) {
          be += e[k];
          for (double c : w.node(k))
            if (c != 0.0) ble += std::log(c * c);
        }
        sink.put("wen_" + b.name, be);
        sink.put("wle_" + b.name, nodes.empty() ? detail::nan() : ble);
        if (need_band_time_) {
          const auto band_signal = w.reconstruct(nodes);
          detail::signal_stats(band_signal, "_" + b.name, need_band_sampen_, cfg, sink);
        }
      }
    }

    if (need_psd_) {
      const std::size_t win = std::min(cfg.welch_window, x.size());
      const std::size_t ovl = std::min(cfg.welch_overlap, win / 2);
      const auto psd = dsp::welch_psd(x, segment.sample_rate, win, ovl);
      spectral(psd, sink);
    }

    FeatureVector out;
    out.names = wanted_;
    out.values = sink.take();
    for (auto& v : out.values) v = clean(v);
    out.origin = segment.origin;
    out.label = segment.label;
    return out;
  }

 private:
  void spectral(const dsp::PsdEstimate& psd, detail::Sink& sink) const {
    const auto& cfg = manifest_.config;
    std::vector<double> f, p;
    for (std::size_t k = 0; k < psd.freqs.size(); ++k)
      if (psd.freqs[k] >= cfg.total_low_hz && psd.freqs[k] <= cfg.total_high_hz) {
        f.push_back(psd.freqs[k]);
        p.push_back(psd.power[k]);
      }
    double sum = 0;
    for (double v : p) sum += v;
    const double nan = detail::nan();
    if (sum > 0 && !p.empty()) {
      double c = 0;
      for (std::size_t k = 0; k < p.size(); ++k) c += f[k] * p[k] / sum;
      double m2 = 0, m3 = 0, m4 = 0, ent = 0, logsum = 0, maxp = 0;
      std::size_t peak = 0;
      bool any_zero = false;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double w = p[k] / sum, d = f[k] - c;
        m2 += w * d * d;
        m3 += w * d * d * d;
        m4 += w * d * d * d * d;
        if (w > 0) ent -= w * std::log(w);
        if (p[k] > 0) logsum += std::log(p[k]);
        else any_zero = true;
        if (p[k] > maxp) {
          maxp = p[k];
          peak = k;
        }
      }
      const double spread = std::sqrt(m2);
      const double meanp = sum / static_cast<double>(p.size());
      auto edge = [&](double frac) {
        double acc = 0;
        for (std::size_t k = 0; k < p.size(); ++k) {
          acc += p[k];
          if (acc >= frac * sum) return f[k];
        }
        return f.back();
      };
      double sx = 0, sy = 0, sxx = 0, sxy = 0, cnt = 0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        if (!(p[k] > 0) || !(f[k] > 0)) continue;
        const double lx = std::log10(f[k]), ly = std::log10(p[k]);
        sx += lx; sy += ly; sxx += lx * lx; sxy += lx * ly; cnt += 1;
      }
      sink.put("spec_centroid", c);
      sink.put("spec_spread", spread);
      sink.put("spec_skew", m3 / (spread * spread * spread));
      sink.put("spec_kurt", m4 / (m2 * m2));
      sink.put("spec_entropy", p.size() > 1 ? ent / std::log(static_cast<double>(p.size())) : nan);
      sink.put("spec_crest", maxp / meanp);
      sink.put("spec_flatness", any_zero ? 0.0 : std::exp(logsum / static_cast<double>(p.size())) / meanp);
      sink.put("spec_rolloff", edge(cfg.rolloff));
      sink.put("spec_edge95", edge(0.95));
      sink.put("spec_peak", f[peak]);
      sink.put("spec_slope", cnt > 1 ? (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx) : nan);
    }
    sink.put("spec_total", psd.integrate(cfg.total_low_hz, cfg.total_high_hz));

    const auto bp = band_powers(psd, cfg.bands, cfg.total_low_hz, cfg.total_high_hz);
    std::unordered_map<std::string, double> absp;
    for (const auto& b : bp) {
      absp[b.name] = b.absolute;
      sink.put("abp_" + b.name, b.absolute);
      sink.put("RP_" + b.name, b.relative);
    }
    for (const auto& b : cfg.bands) {
      double bsum = 0, bmax = 0, bpeak = nan, bent = 0;
      std::size_t bins = 0;
      for (std::size_t k = 0; k < psd.freqs.size(); ++k)
        if (psd.freqs[k] >= b.low_hz && psd.freqs[k] <= b.high_hz) {
          bsum += psd.power[k];
          ++bins;
        }
      for (std::size_t k = 0; k < psd.freqs.size(); ++k)
        if (psd.freqs[k] >= b.low_hz && psd.freqs[k] <= b.high_hz && bsum > 0) {
          const double w = psd.power[k] / bsum;
          if (w > 0) bent -= w * std::log(w);
          if (psd.power[k] > bmax) {
            bmax = psd.power[k];
            bpeak = psd.freqs[k];
          }
        }
      sink.put("pf_" + b.name, bsum > 0 ? bpeak : nan);
      sink.put("sent_" + b.name, bsum > 0 && bins > 1 ? bent / std::log(static_cast<double>(bins)) : nan);
    }
    auto get = [&](const char* n) {
      auto it = absp.find(n);
      return it == absp.end() ? nan : it->second;
    };
    sink.put("en_b_at", get("B1") / (get("A") + get("T")));
    sink.put("beta_at", (get("B1") + get("B2")) / (get("A") + get("T")));
    sink.put("at_beta", (get("A") + get("T")) / (get("B1") + get("B2")));
    sink.put("b2_at", get("B2") / (get("A") + get("T")));
    sink.put("g_ab", get("G") / (get("A") + get("B1")));
    for (const auto& x : cfg.bands)
      for (const auto& y : cfg.bands)
        if (x.name != y.name) sink.put("ratio_" + x.name + "_" + y.name, absp[x.name] / absp[y.name]);
  }

  FeatureManifest manifest_;
  std::vector<std::string> wanted_;
  std::vector<std::string> families_;
  wavelet::Wavelet wavelet_;
  bool need_time_ = false, need_band_time_ = false, need_psd_ = false, need_wpt_ = false, need_aux_ = false;
  bool need_sampen_ = false, need_band_sampen_ = false;
};

inline FeatureVector extract_features(const Segment& segment, const FeatureManifest& manifest) {
  return FeatureExtractor(manifest).extract(segment);
}

/// Rows of feature vectors with their grouping metadata.
struct FeatureTable {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // rows x features
  std::vector<std::string> subjects;
  std::vector<int> labels;  // 0 attentive, 1 non-attentive

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return i;
    return std::nullopt;
  }

  /// Copy restricted to the named columns, in the given order.
  FeatureTable select_columns(const std::vector<std::string>& wanted) const {
    FeatureTable out;
    out.names = wanted;
    out.subjects = subjects;
    out.labels = labels;
    out.values.resize(values.rows(), static_cast<Eigen::Index>(wanted.size()));
    for (std::size_t j = 0; j < wanted.size(); ++j) {
      const auto c = column(wanted[j]);
      if (!c) throw Error(ErrorCode::FeatureMismatch, "feature table has no column " + wanted[j]);
      out.values.col(static_cast<Eigen::Index>(j)) = values.col(static_cast<Eigen::Index>(*c));
    }
    return out;
  }

  std::vector<std::string> subject_ids() const {
    std::vector<std::string> s;
    for (const auto& x : subjects)
      if (std::find(s.begin(), s.end(), x) == s.end()) s.push_back(x);
    return s;
  }
};

inline FeatureTable make_table(const std::vector<FeatureVector>& rows) {
  FeatureTable t;
  if (rows.empty()) return t;
  t.names = rows.front().names;
  t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(t.names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < t.names.size(); ++j)
      t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].values[j];
    t.subjects.push_back(rows[i].origin.subject_id);
    t.labels.push_back(static_cast<int>(rows[i].label));
  }
  return t;
}

}  // namespace eegattn::features
