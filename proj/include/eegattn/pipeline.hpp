#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "artifacts.hpp"
#include "core.hpp"
#include "dsp.hpp"
#include "error.hpp"
#include "features.hpp"

namespace eegattn::pipeline {

struct PipelineConfig {
  SegmentationConfig segmentation;
  int bandpass_order = 3;
  double bandpass_low_hz = 0.5, bandpass_high_hz = 64.0;
  double notch_hz = 50.0, notch_q = 30.0;
  double reject_uv = 150.0;
  bool blink_removal = true;
  artifacts::BlinkConfig blink;

  void validate() const { segmentation.validate(); }
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {{"L", c.segmentation.length},
          {"r", c.segmentation.overlap},
          {"trim", c.segmentation.trim},
          {"step", c.segmentation.step()},
          {"bandpass", {{"order", c.bandpass_order}, {"low_hz", c.bandpass_low_hz}, {"high_hz", c.bandpass_high_hz}}},
          {"notch", {{"hz", c.notch_hz}, {"q", c.notch_q}}},
          {"reject_uv", c.reject_uv},
          {"blink_removal", c.blink_removal},
          {"blink",
           {{"height_uv", c.blink.peaks.height},
            {"distance", c.blink.peaks.distance},
            {"ensemble_size", c.blink.ensemble_size},
            {"noise_std", c.blink.noise_std},
            {"lowpass_hz", c.blink.lowpass_hz},
            {"correlation_threshold", c.blink.correlation_threshold},
            {"smooth_window", c.blink.smooth_window},
            {"edge_taper", c.blink.edge_taper},
            {"context", c.blink.context},
            {"seed", c.blink.seed}}}};
}

struct ProcessedSegment {
  Segment segment;  // trimmed and cleaned; meaningful only when kept
  bool kept = false;
  std::string reason;
  artifacts::ArtifactRecord record;
};

/// Per-window preprocessing shared by the offline and online paths:
/// notch, bandpass (both zero-phase), edge trim, amplitude rejection, blink
/// removal. Holds filter caches, so one instance per thread.
class Preprocessor {
 public:
  explicit Preprocessor(PipelineConfig cfg, double sample_rate = 250.0)
      : cfg_(std::move(cfg)),
        fs_(sample_rate),
        notch_(dsp::design_notch(cfg_.notch_hz, cfg_.notch_q, sample_rate)),
        bandpass_(dsp::design_butterworth_bandpass(cfg_.bandpass_order, cfg_.bandpass_low_hz, cfg_.bandpass_high_hz,
                                                   sample_rate)) {
    cfg_.validate();
  }

  const PipelineConfig& config() const { return cfg_; }
  double sample_rate() const { return fs_; }

  /// Notch + bandpass + trim only.
  Segment filter(const Segment& raw) {
    const std::size_t trim = cfg_.segmentation.trim;
    if (raw.samples.size() <= 2 * trim)
      throw Error(ErrorCode::SegmentTooShort, "segment of " + std::to_string(raw.samples.size()) +
                                                  " samples cannot lose " + std::to_string(trim) + " per edge");
    Segment out = raw;
    out.samples = dsp::trim_edges(bandpass_.apply(notch_.apply(raw.samples)), trim);
    out.origin.start_index += trim;
    return out;
  }

  ProcessedSegment process(const Segment& raw) {
    ProcessedSegment p;
    p.record.origin = raw.origin;
    for (double v : raw.samples)
      if (!std::isfinite(v)) {
        p.reason = "non_finite_input";
        p.record.kept = false;
        p.record.reason = p.reason;
        return p;
      }
    Segment f = filter(raw);
    if (artifacts::reject_high_amplitude(f.samples, cfg_.reject_uv) == artifacts::Decision::Drop) {
      p.reason = "amplitude_over_threshold";
      p.record.kept = false;
      p.record.reason = p.reason;
      return p;
    }
    if (cfg_.blink_removal) {
      try {
        auto br = artifacts::remove_blinks(f, cfg_.blink);
        p.record.peak_count = br.peaks.size();
        p.record.regions = br.intervals;
        f = std::move(br.segment);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SiftingDiverged) throw;
        p.reason = "sifting_diverged";
        p.record.kept = false;
        p.record.reason = p.reason;
        return p;
      }
    }
    p.segment = std::move(f);
    p.kept = true;
    p.record.kept = true;
    return p;
  }

 private:
  PipelineConfig cfg_;
  double fs_;
  dsp::ZeroPhaseFilter notch_;
  dsp::ZeroPhaseFilter bandpass_;
};

struct PreprocessOutput {
  std::vector<Segment> kept;
  std::vector<artifacts::ArtifactRecord> records;
  std::size_t total = 0, rejected = 0;
  std::vector<std::string> warnings;
};

/// Segments every block, preprocesses each window and keeps the survivors.
/// Blocks shorter than one window are skipped with a warning.
inline PreprocessOutput preprocess_records(const std::vector<EegRecord>& records, const PipelineConfig& cfg) {
  PreprocessOutput out;
  std::optional<Preprocessor> pre;
  for (const auto& r : records) {
    if (!pre || pre->sample_rate() != r.sample_rate) pre.emplace(cfg, r.sample_rate);
    std::vector<Segment> segs;
    try {
      segs = segment_block(r, cfg.segmentation);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::BlockTooShort) throw;
      out.warnings.push_back(std::string("BlockTooShort: ") + e.what());
      continue;
    }
    for (const auto& s : segs) {
      ++out.total;
      auto p = pre->process(s);
      out.records.push_back(p.record);
      if (p.kept) out.kept.push_back(std::move(p.segment));
      else ++out.rejected;
    }
  }
  return out;
}

inline features::FeatureTable extract_table(const std::vector<Segment>& segments, const features::FeatureManifest& manifest,
                                            const std::vector<std::string>& names) {
  features::FeatureExtractor ex(manifest, names);
  std::vector<features::FeatureVector> rows;
  rows.reserve(segments.size());
  for (const auto& s : segments) rows.push_back(ex.extract(s));
  auto t = features::make_table(rows);
  if (rows.empty()) t.names = names;
  return t;
}

}  // namespace eegattn::pipeline
