#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "dsp.hpp"
#include "emd.hpp"
#include "error.hpp"

namespace eegattn::artifacts {

enum class Decision { Keep, Drop };

/// Drop iff any |sample| exceeds the threshold; the boundary value is kept.
inline Decision reject_high_amplitude(std::span<const double> samples, double threshold_uv = 150.0) {
  for (double v : samples)
    if (!(std::abs(v) <= threshold_uv)) return Decision::Drop;
  return Decision::Keep;
}

struct PeakConfig {
  double height = 60.0;       // µV
  std::size_t distance = 50;  // samples between retained peaks
};

/// Local maxima x[i-1] < x[i] >= x[i+1] with x[i] >= height. When two peaks
/// are closer than `distance`, the taller one wins (earlier on ties).
inline std::vector<std::size_t> find_peaks(std::span<const double> x, const PeakConfig& cfg = {}) {
  std::vector<std::size_t> cand;
  for (std::size_t i = 1; i + 1 < x.size(); ++i)
    if (x[i - 1] < x[i] && x[i] >= x[i + 1] && x[i] >= cfg.height) cand.push_back(i);
  if (cfg.distance <= 1 || cand.size() < 2) return cand;

  std::vector<std::size_t> order(cand.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[cand[a]] > x[cand[b]]; });
  std::vector<bool> keep(cand.size(), true);
  for (auto o : order) {
    if (!keep[o]) continue;
    for (std::size_t j = o; j-- > 0 && cand[o] - cand[j] < cfg.distance;) keep[j] = false;
    for (std::size_t j = o + 1; j < cand.size() && cand[j] - cand[o] < cfg.distance; ++j) keep[j] = false;
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < cand.size(); ++i)
    if (keep[i]) out.push_back(cand[i]);
  return out;
}

struct PeakRegion {
  std::size_t peak_index = 0;
  std::size_t start = 0, end = 0;  // [start, end)
  std::size_t size() const { return end - start; }
};

inline constexpr std::size_t kRegionBefore = 40;
inline constexpr std::size_t kRegionAfter = 80;
inline constexpr std::size_t kRegionLength = kRegionBefore + kRegionAfter;

/// 120-sample window around a peak: 40 before and 80 after, or pinned to the
/// segment edge when the peak sits in the first 40 / last 80 samples.
inline PeakRegion peak_region(std::size_t peak_index, std::size_t segment_len) {
  if (segment_len < kRegionLength)
    throw Error(ErrorCode::SegmentTooShort, "peak region needs a segment of at least 120 samples");
  if (peak_index >= segment_len) throw Error(ErrorCode::InvalidConfig, "peak index outside segment");
  if (peak_index < kRegionBefore) return {peak_index, 0, kRegionLength};
  if (peak_index >= segment_len - kRegionAfter) return {peak_index, segment_len - kRegionLength, segment_len};
  return {peak_index, peak_index - kRegionBefore, peak_index + kRegionAfter};
}

struct Interval {
  std::size_t start = 0, end = 0;
  bool operator==(const Interval&) const = default;
};

/// Union of overlapping regions; touching regions stay separate.
inline std::vector<Interval> merge_regions(std::vector<PeakRegion> regions) {
  std::sort(regions.begin(), regions.end(), [](const auto& a, const auto& b) { return a.start < b.start; });
  std::vector<Interval> out;
  for (const auto& r : regions) {
    if (!out.empty() && r.start < out.back().end) out.back().end = std::max(out.back().end, r.end);
    else out.push_back({r.start, r.end});
  }
  return out;
}

struct BlinkConfig {
  PeakConfig peaks;
  std::size_t ensemble_size = 50;
  double noise_std = 0.2;
  double lowpass_hz = 5.0;
  double correlation_threshold = 0.5;
  std::size_t smooth_window = 3;
  std::size_t edge_taper = 15;  // raised-cosine fade of the removed part at each interval end
  std::size_t context = 125;   // extra samples decomposed on each side of an interval
  std::uint64_t seed = 0x5eedULL;
  emd::SiftingConfig sifting;
};

struct BlinkRemoval {
  Segment segment;
  std::vector<std::size_t> peaks;
  std::vector<PeakRegion> regions;
  std::vector<Interval> intervals;
  std::size_t removed_components = 0;
};

inline double pearson(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa <= 0 || sbb <= 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

/// Decomposes an interval, widened by `cfg.context` samples on each side, with
/// EEMD and subtracts every component (IMF or residue) whose correlation with
/// the low-passed trace exceeds the threshold. Only samples inside [start, end)
/// change. Returns the number of components removed.
inline std::size_t clean_interval(std::span<double> x, Interval iv, double sample_rate, const BlinkConfig& cfg,
                                  std::uint64_t seed) {
  const std::size_t lo = iv.start >= cfg.context ? iv.start - cfg.context : 0;
  const std::size_t hi = std::min(x.size(), iv.end + cfg.context);
  const auto span = x.subspan(lo, hi - lo);
  const auto lowpass = dsp::filtfilt(dsp::design_butterworth_lowpass(2, cfg.lowpass_hz, sample_rate), span);
  const auto d = emd::eemd(span, cfg.ensemble_size, cfg.noise_std, seed, cfg.sifting);
  std::vector<double> removed(span.size(), 0.0);
  std::size_t count = 0;
  auto consider = [&](const std::vector<double>& c) {
    if (pearson(c, lowpass) > cfg.correlation_threshold) {
      for (std::size_t i = 0; i < c.size(); ++i) removed[i] += c[i];
      ++count;
    }
  };
  for (const auto& imf : d.imfs) consider(imf);
  consider(d.residue);
  const std::size_t n = iv.end - iv.start;
  const std::size_t taper = std::min(cfg.edge_taper, n / 2);
  for (std::size_t i = 0; i < n; ++i) {
    double w = 1.0;
    const std::size_t edge = std::min(i, n - 1 - i);
    if (edge < taper)
      w = 0.5 - 0.5 * std::cos(std::numbers::pi * (static_cast<double>(edge) + 0.5) / static_cast<double>(taper));
    x[iv.start + i] -= w * removed[iv.start - lo + i];
  }
  return count;
}

/// Blink suppression: peaks -> 120-sample regions -> merged intervals -> EEMD
/// cleanup of each interval -> uniform smoothing of the whole segment.
inline BlinkRemoval remove_blinks(const Segment& segment, const BlinkConfig& cfg = {}) {
  BlinkRemoval out;
  out.segment = segment;
  auto& x = out.segment.samples;
  out.peaks = find_peaks(x, cfg.peaks);
  if (!out.peaks.empty()) {
    for (auto p : out.peaks) out.regions.push_back(peak_region(p, x.size()));
    out.intervals = merge_regions(out.regions);
    for (const auto& iv : out.intervals) {
      const std::uint64_t seed = cfg.seed ^ (static_cast<std::uint64_t>(iv.start) * 0x9E3779B97F4A7C15ULL);
      out.removed_components += clean_interval(x, iv, segment.sample_rate, cfg, seed);
    }
  }
  x = dsp::uniform_smooth(x, cfg.smooth_window);
  return out;
}

/// One line of the artifact sidecar.
struct ArtifactRecord {
  SegmentOrigin origin;
  bool kept = true;
  std::string reason;
  std::size_t peak_count = 0;
  std::vector<Interval> regions;
};

inline nlohmann::json to_json(const ArtifactRecord& r) {
  nlohmann::json regions = nlohmann::json::array();
  for (const auto& iv : r.regions) regions.push_back({iv.start, iv.end});
  return {{"subject_id", r.origin.subject_id},
          {"block_id", r.origin.block_id},
          {"start_index", r.origin.start_index},
          {"kept", r.kept},
          {"reason", r.reason},
          {"peak_count", r.peak_count},
          {"regions", regions}};
}

}  // namespace eegattn::artifacts
