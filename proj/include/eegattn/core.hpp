#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"

namespace eegattn {

enum class Label : int { Attentive = 0, NonAttentive = 1, Unlabeled = -1 };

constexpr bool is_labeled(Label l) { return l == Label::Attentive || l == Label::NonAttentive; }

/// Auxiliary channels reported by the headband: six band values followed by
/// the attention and meditation scores.
inline constexpr std::size_t kAuxChannelCount = 8;
inline constexpr std::array<std::string_view, kAuxChannelCount> kAuxChannelNames = {
    "delta", "theta", "alpha", "low_beta", "high_beta", "gamma", "attention", "meditation"};
inline constexpr std::size_t kAuxAttention = 6;
inline constexpr std::size_t kAuxMeditation = 7;

using AuxSnapshot = std::array<double, kAuxChannelCount>;

/// Per-window auxiliary values at `rate_hz` windows per second.
struct AuxSeries {
  double rate_hz = 1.0;
  std::array<std::vector<double>, kAuxChannelCount> channels;
  bool synthetic = false;

  std::size_t windows() const { return channels[0].size(); }

  /// Value of every channel for the window containing `sample_index`.
  AuxSnapshot at_sample(std::size_t sample_index, double sample_rate) const {
    AuxSnapshot out{};
    if (windows() == 0) return out;
    auto w = static_cast<std::size_t>(std::floor(static_cast<double>(sample_index) * rate_hz / sample_rate));
    w = std::min(w, windows() - 1);
    for (std::size_t c = 0; c < kAuxChannelCount; ++c) out[c] = channels[c][w];
    return out;
  }
};

struct EegRecord {
  std::vector<double> samples;  // µV
  double sample_rate = 250.0;
  std::string subject_id;
  std::string block_id;
  Label label = Label::Unlabeled;
  std::optional<AuxSeries> aux;

  void validate() const {
    if (!(sample_rate > 0.0)) throw Error(ErrorCode::InvalidConfig, "sample_rate must be positive");
    if (samples.empty()) throw Error(ErrorCode::InvalidConfig, "record " + block_id + " has no samples");
    if (aux) {
      const auto n = aux->windows();
      for (const auto& ch : aux->channels)
        if (ch.size() != n) throw Error(ErrorCode::InvalidConfig, "aux channels differ in length");
      const double covered = static_cast<double>(n) * sample_rate / aux->rate_hz;
      if (covered + sample_rate / aux->rate_hz < static_cast<double>(samples.size()))
        throw Error(ErrorCode::InvalidConfig, "aux channels do not cover record " + block_id);
    }
  }
};

struct SegmentOrigin {
  std::string subject_id;
  std::string block_id;
  std::size_t start_index = 0;
};

struct Segment {
  std::vector<double> samples;
  double sample_rate = 250.0;
  SegmentOrigin origin;
  Label label = Label::Unlabeled;
  std::optional<AuxSnapshot> aux;

  std::size_t size() const { return samples.size(); }
};

struct SegmentationConfig {
  std::size_t length = 1750;
  double overlap = 0.7;
  std::size_t trim = 250;

  /// Integer hop between consecutive window starts, floor(L(1-r)). The small
  /// epsilon absorbs representation error (1750 * 0.3 must give 525).
  std::size_t step() const {
    return static_cast<std::size_t>(std::floor(static_cast<double>(length) * (1.0 - overlap) + 1e-9));
  }

  void validate() const {
    if (!(overlap >= 0.0 && overlap < 1.0)) throw Error(ErrorCode::InvalidConfig, "overlap must lie in [0,1)");
    if (length <= 2 * trim) throw Error(ErrorCode::InvalidConfig, "window length must exceed twice the trim");
    if (!(overlap * static_cast<double>(length) > static_cast<double>(2 * trim)))
      throw Error(ErrorCode::InvalidConfig, "overlap * length must exceed twice the trim");
    if (step() < 1) throw Error(ErrorCode::InvalidConfig, "window step must be at least one sample");
  }
};

/// Mean of the per-sample auxiliary values over [start, start + length).
inline AuxSnapshot aux_window_mean(const AuxSeries& aux, double sample_rate, std::size_t start, std::size_t length) {
  AuxSnapshot acc{};
  for (std::size_t i = start; i < start + length; ++i) {
    const auto v = aux.at_sample(i, sample_rate);
    for (std::size_t c = 0; c < kAuxChannelCount; ++c) acc[c] += v[c];
  }
  for (auto& v : acc) v /= static_cast<double>(length);
  return acc;
}

/// Number of windows a block of `total` samples yields.
inline std::size_t segment_count(std::size_t total, const SegmentationConfig& cfg) {
  if (total < cfg.length) return 0;
  return (total - cfg.length) / cfg.step() + 1;
}

/// Cuts one block into overlapping windows. Windows never cross the block end.
inline std::vector<Segment> segment_block(const EegRecord& record, const SegmentationConfig& cfg) {
  cfg.validate();
  const std::size_t total = record.samples.size();
  if (total < cfg.length)
    throw Error(ErrorCode::BlockTooShort, "block " + record.block_id + " has " + std::to_string(total) +
                                              " samples, window needs " + std::to_string(cfg.length));
  const std::size_t n = segment_count(total, cfg);
  const std::size_t step = cfg.step();
  std::vector<Segment> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Segment s;
    const std::size_t start = i * step;
    s.samples.assign(record.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     record.samples.begin() + static_cast<std::ptrdiff_t>(start + cfg.length));
    s.sample_rate = record.sample_rate;
    s.origin = {record.subject_id, record.block_id, start};
    s.label = record.label;
    if (record.aux) s.aux = aux_window_mean(*record.aux, record.sample_rate, start, cfg.length);
    out.push_back(std::move(s));
  }
  return out;
}

struct BalancedDataset {
  std::map<std::string, std::vector<Segment>> by_subject;
  std::map<std::string, std::size_t> retained_per_class;
  std::vector<std::string> warnings;

  std::size_t size() const {
    std::size_t n = 0;
    for (const auto& [_, v] : by_subject) n += v.size();
    return n;
  }

  std::vector<Segment> flatten() const {
    std::vector<Segment> out;
    out.reserve(size());
    for (const auto& [_, v] : by_subject) out.insert(out.end(), v.begin(), v.end());
    return out;
  }
};

/// Per subject, keeps the most recent n_u = min(|class 0|, |class 1|)
/// segments of each label. Input order is taken as temporal order and is
/// preserved in the output. Subjects missing a class are dropped with a warning.
inline BalancedDataset balance_by_subject(std::span<const Segment> segments) {
  std::map<std::string, std::vector<std::size_t>> idx_by_subject;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (!is_labeled(segments[i].label))
      throw Error(ErrorCode::InvalidConfig, "cannot balance unlabeled segment from " + segments[i].origin.block_id);
    idx_by_subject[segments[i].origin.subject_id].push_back(i);
  }

  BalancedDataset out;
  for (const auto& [subject, idx] : idx_by_subject) {
    std::vector<std::size_t> zeros, ones;
    for (auto i : idx) (segments[i].label == Label::Attentive ? zeros : ones).push_back(i);
    if (zeros.empty() || ones.empty()) {
      out.warnings.push_back("EmptyClass: subject " + subject + " has " + std::to_string(zeros.size()) +
                             " attentive and " + std::to_string(ones.size()) +
                             " non-attentive segments; dropped");
      continue;
    }
    const std::size_t keep = std::min(zeros.size(), ones.size());
    std::vector<std::size_t> kept(zeros.end() - static_cast<std::ptrdiff_t>(keep), zeros.end());
    kept.insert(kept.end(), ones.end() - static_cast<std::ptrdiff_t>(keep), ones.end());
    std::sort(kept.begin(), kept.end());
    auto& group = out.by_subject[subject];
    group.reserve(kept.size());
    for (auto i : kept) group.push_back(segments[i]);
    out.retained_per_class[subject] = keep;
  }
  return out;
}

}  // namespace eegattn
