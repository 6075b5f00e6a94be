#pragma once

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "core.hpp"
#include "error.hpp"
#include "features.hpp"
#include "pipeline.hpp"
#include "svm.hpp"
#include "synth.hpp"

namespace eegattn::realtime {

/// Sliding window over a sample stream. A window of `length` samples is
/// emitted as soon as it is complete; successive windows start `step`
/// samples apart.
class RingBuffer {
 public:
  RingBuffer(std::size_t length = 1750, std::size_t step = 525, std::size_t capacity = 0)
      : length_(length), step_(step), cap_(std::max(capacity, length)), data_(cap_), aux_(cap_) {
    if (length == 0 || step == 0 || step > length)
      throw Error(ErrorCode::InvalidConfig, "ring buffer needs 0 < step <= length");
  }

  struct Window {
    std::vector<double> samples;
    std::optional<AuxSnapshot> aux;
    std::size_t start = 0;  // absolute sample index of the first sample
  };

  /// Appends one sample; returns the window it completes, if any.
  std::optional<Window> push(double v, const std::optional<AuxSnapshot>& aux = std::nullopt) {
    data_[total_ % cap_] = v;
    aux_[total_ % cap_] = aux;
    if (aux) ++aux_count_;
    ++total_;
    if (total_ - next_start_ < length_) return std::nullopt;
    Window w;
    w.start = next_start_;
    w.samples.resize(length_);
    bool all_aux = true;
    AuxSnapshot acc{};
    for (std::size_t i = 0; i < length_; ++i) {
      const std::size_t k = (next_start_ + i) % cap_;
      w.samples[i] = data_[k];
      if (aux_[k]) {
        for (std::size_t c = 0; c < kAuxChannelCount; ++c) acc[c] += (*aux_[k])[c];
      } else {
        all_aux = false;
      }
    }
    if (all_aux) {
      for (auto& a : acc) a /= static_cast<double>(length_);
      w.aux = acc;
    }
    next_start_ += step_;
    ++emitted_;
    return w;
  }

  /// Drops buffered samples; the next window starts at the next sample.
  void reset() { next_start_ = total_; }

  std::size_t total() const { return total_; }
  std::size_t emitted() const { return emitted_; }
  std::size_t length() const { return length_; }
  std::size_t step() const { return step_; }
  std::size_t capacity() const { return cap_; }
  std::size_t next_start() const { return next_start_; }

 private:
  std::size_t length_, step_, cap_;
  std::vector<double> data_;
  std::vector<std::optional<AuxSnapshot>> aux_;
  std::size_t total_ = 0, next_start_ = 0, emitted_ = 0, aux_count_ = 0;
};

enum class Phase { Baseline, Feedback };

inline std::string to_string(Phase p) { return p == Phase::Baseline ? "baseline" : "feedback"; }
inline Phase phase_from_string(const std::string& s) {
  if (s == "baseline") return Phase::Baseline;
  if (s == "feedback") return Phase::Feedback;
  throw Error(ErrorCode::InvalidConfig, "unknown phase " + s);
}

struct AlertPolicy {
  std::size_t consecutive_required = 5;
  std::optional<std::size_t> cooldown;  // segments; defaults to consecutive_required
  double min_duration_s = 8.0;

  std::size_t effective_cooldown() const { return cooldown.value_or(consecutive_required); }
  void validate() const {
    if (consecutive_required < 1) throw Error(ErrorCode::InvalidConfig, "consecutive_required must be >= 1");
    if (!(min_duration_s >= 0)) throw Error(ErrorCode::InvalidConfig, "min_duration_s must be >= 0");
  }
};

enum class AlertDecision { NoAlert, Alert };

/// Consecutive non-attention counter. NonAttentive increments, Attentive
/// resets, warnings pause. An alert fires when the counter reaches the
/// threshold, unless fewer than `cooldown` segments have passed since the
/// previous alert.
class AlertState {
 public:
  explicit AlertState(AlertPolicy p = {}) : policy_(p) { policy_.validate(); }

  AlertDecision update(Label prediction) {
    ++since_alert_;
    if (prediction == Label::NonAttentive) ++counter_;
    else counter_ = 0;
    if (counter_ == policy_.consecutive_required && (!alerted_ || since_alert_ > policy_.effective_cooldown())) {
      alerted_ = true;
      since_alert_ = 0;
      return AlertDecision::Alert;
    }
    return AlertDecision::NoAlert;
  }

  void set_policy(const AlertPolicy& p) {
    p.validate();
    policy_ = p;
  }
  const AlertPolicy& policy() const { return policy_; }
  std::size_t counter() const { return counter_; }
  void reset() {
    counter_ = 0;
    alerted_ = false;
    since_alert_ = 0;
  }

 private:
  AlertPolicy policy_;
  std::size_t counter_ = 0;
  std::size_t since_alert_ = 0;
  bool alerted_ = false;
};

inline AlertDecision update_alert_state(AlertState& state, Label prediction) { return state.update(prediction); }

enum class EventKind { Prediction, Warning };

struct EngineEvent {
  EventKind kind = EventKind::Prediction;
  std::size_t seg_idx = 0;
  double t = 0;  // stream time at the window's last sample, seconds
  Label prediction = Label::Unlabeled;
  double margin = 0;
  bool alert = false;
  bool warning = false;
  std::string warning_reason;
  std::vector<double> display;  // decimated raw window
  std::optional<double> attention, meditation;
  double latency_ms = 0;
  std::size_t window_start = 0;
  Phase phase = Phase::Feedback;
};

inline nlohmann::json to_json(const EngineEvent& e) {
  nlohmann::json aux = nlohmann::json::object();
  if (e.attention) aux["attention"] = *e.attention;
  if (e.meditation) aux["meditation"] = *e.meditation;
  nlohmann::json j = {{"type", "event"},
                      {"t", e.t},
                      {"seg_idx", e.seg_idx},
                      {"pred", is_labeled(e.prediction) ? nlohmann::json(static_cast<int>(e.prediction)) : nlohmann::json(nullptr)},
                      {"margin", e.margin},
                      {"alert", e.alert},
                      {"warning", e.warning},
                      {"display", e.display},
                      {"aux", aux},
                      {"phase", to_string(e.phase)},
                      {"latency_ms", e.latency_ms}};
  if (e.warning) j["warning_reason"] = e.warning_reason;
  return j;
}

/// Everything the engine needs to classify: model, manifest, feature list.
struct ModelBundle {
  svm::SvmModel model;
  features::FeatureManifest manifest;
  pipeline::PipelineConfig pipeline;
};

inline nlohmann::json to_json(const ModelBundle& b) {
  auto j = svm::to_json(b.model);
  j["manifest"] = b.manifest.to_json();
  j["pipeline"] = pipeline::to_json(b.pipeline);
  return j;
}

inline ModelBundle bundle_from_json(const nlohmann::json& j) {
  ModelBundle b;
  b.model = svm::model_from_json(j);
  if (!j.contains("manifest")) throw Error(ErrorCode::ManifestMismatch, "model file carries no feature manifest");
  b.manifest = features::FeatureManifest::from_json(j.at("manifest"));
  if (!b.model.manifest_hash.empty() && b.model.manifest_hash != b.manifest.hash())
    throw Error(ErrorCode::ManifestMismatch, "model manifest hash does not match its embedded manifest");
  if (j.contains("pipeline")) {
    const auto& p = j["pipeline"];
    b.pipeline.segmentation.length = p.value("L", std::size_t{1750});
    b.pipeline.segmentation.overlap = p.value("r", 0.7);
    b.pipeline.segmentation.trim = p.value("trim", std::size_t{250});
    b.pipeline.reject_uv = p.value("reject_uv", 150.0);
    b.pipeline.blink_removal = p.value("blink_removal", true);
    if (p.contains("bandpass")) {
      b.pipeline.bandpass_order = p["bandpass"].value("order", 3);
      b.pipeline.bandpass_low_hz = p["bandpass"].value("low_hz", 0.5);
      b.pipeline.bandpass_high_hz = p["bandpass"].value("high_hz", 64.0);
    }
    if (p.contains("notch")) {
      b.pipeline.notch_hz = p["notch"].value("hz", 50.0);
      b.pipeline.notch_q = p["notch"].value("q", 30.0);
    }
    if (p.contains("blink")) {
      const auto& k = p["blink"];
      auto& bl = b.pipeline.blink;
      bl.peaks.height = k.value("height_uv", bl.peaks.height);
      bl.peaks.distance = k.value("distance", bl.peaks.distance);
      bl.ensemble_size = k.value("ensemble_size", bl.ensemble_size);
      bl.noise_std = k.value("noise_std", bl.noise_std);
      bl.lowpass_hz = k.value("lowpass_hz", bl.lowpass_hz);
      bl.correlation_threshold = k.value("correlation_threshold", bl.correlation_threshold);
      bl.smooth_window = k.value("smooth_window", bl.smooth_window);
      bl.edge_taper = k.value("edge_taper", bl.edge_taper);
      bl.context = k.value("context", bl.context);
      bl.seed = k.value("seed", bl.seed);
    }
  }
  return b;
}

/// Classifies one raw window exactly as the engine does.
inline std::optional<svm::Prediction> classify_window(pipeline::Preprocessor& pre, const features::FeatureExtractor& ex,
                                                      const svm::SvmModel& model, const Segment& raw,
                                                      std::string* reason = nullptr) {
  auto p = pre.process(raw);
  if (!p.kept) {
    if (reason) *reason = p.reason;
    return std::nullopt;
  }
  const auto fv = ex.extract(p.segment);
  return svm::predict(model, fv.values);
}

struct EngineConfig {
  AlertPolicy policy;
  double contact_gap_s = 0.5;       // timestamp jump that counts as lost contact
  double watchdog_s = 1.0;          // silence that counts as lost contact
  std::size_t display_decimation = 4;
  Phase phase = Phase::Feedback;
};

struct LogEntry {
  std::size_t seg_idx = 0;
  double t = 0;
  Label prediction = Label::Unlabeled;  // Unlabeled for warnings
  double margin = 0;
  bool alert = false;
  bool warning = false;
  Phase phase = Phase::Feedback;
};

inline nlohmann::json to_json(const LogEntry& e) {
  return {{"seg_idx", e.seg_idx},
          {"t", e.t},
          {"pred", is_labeled(e.prediction) ? nlohmann::json(static_cast<int>(e.prediction)) : nlohmann::json(nullptr)},
          {"margin", e.margin},
          {"alert", e.alert},
          {"warning", e.warning},
          {"phase", to_string(e.phase)}};
}

inline LogEntry log_entry_from_json(const nlohmann::json& j) {
  LogEntry e;
  e.seg_idx = j.at("seg_idx").get<std::size_t>();
  e.t = j.at("t").get<double>();
  const auto& p = j.at("pred");
  e.prediction = p.is_null() ? Label::Unlabeled : (p.get<int>() == 1 ? Label::NonAttentive : Label::Attentive);
  e.margin = j.value("margin", 0.0);
  e.alert = j.value("alert", false);
  e.warning = j.value("warning", false);
  e.phase = phase_from_string(j.value("phase", std::string("feedback")));
  return e;
}

enum class DurationConvention { Span, StepsOnly };

struct Run {
  std::size_t first_seg = 0;
  std::size_t length = 0;
  double duration_s = 0;
  Phase phase = Phase::Feedback;
};

struct SessionSummary {
  std::size_t segments = 0, predictions = 0, warnings = 0, alerts = 0;
  double total_time_s = 0;
  double attentive_fraction = 0;
  std::vector<Run> runs;
  std::size_t counted_runs = 0;
  double mean_nonattention_s = 0;  // over runs >= min duration; 0 when none
  DurationConvention convention = DurationConvention::Span;
  bool operator==(const SessionSummary&) const = default;
};

inline bool operator==(const Run& a, const Run& b) {
  return a.first_seg == b.first_seg && a.length == b.length && a.duration_s == b.duration_s && a.phase == b.phase;
}

struct WindowGeometry {
  std::size_t length = 1750, step = 525;
  double sample_rate = 250.0;
};

inline double run_duration(std::size_t k, DurationConvention c, const WindowGeometry& g) {
  if (k == 0) return 0;
  const double step_s = static_cast<double>(g.step) / g.sample_rate;
  if (c == DurationConvention::StepsOnly) return static_cast<double>(k) * step_s;
  return static_cast<double>(g.length) / g.sample_rate + static_cast<double>(k - 1) * step_s;
}

/// Pure function of the log. Warnings neither extend nor break a run.
inline SessionSummary session_summary(const std::vector<LogEntry>& log, const AlertPolicy& policy,
                                      DurationConvention convention = DurationConvention::Span,
                                      const WindowGeometry& g = {}, std::optional<Phase> only_phase = std::nullopt) {
  if (log.empty()) throw Error(ErrorCode::EmptySession, "session log is empty");
  SessionSummary s;
  s.convention = convention;
  std::size_t attentive = 0;
  std::optional<Run> cur;
  auto close = [&] {
    if (cur) {
      cur->duration_s = run_duration(cur->length, convention, g);
      s.runs.push_back(*cur);
      cur.reset();
    }
  };
  for (const auto& e : log) {
    if (only_phase && e.phase != *only_phase) continue;
    ++s.segments;
    if (e.alert) ++s.alerts;
    if (e.warning || !is_labeled(e.prediction)) {
      ++s.warnings;
      continue;
    }
    ++s.predictions;
    if (e.prediction == Label::Attentive) {
      ++attentive;
      close();
    } else {
      if (!cur) cur = Run{e.seg_idx, 0, 0, e.phase};
      ++cur->length;
    }
  }
  close();
  if (s.segments == 0) throw Error(ErrorCode::EmptySession, "no log entries in the requested phase");
  s.total_time_s = run_duration(s.segments, DurationConvention::Span, g);
  s.attentive_fraction = s.predictions ? static_cast<double>(attentive) / static_cast<double>(s.predictions) : 0.0;
  double sum = 0;
  for (const auto& r : s.runs)
    if (r.duration_s >= policy.min_duration_s) {
      sum += r.duration_s;
      ++s.counted_runs;
    }
  s.mean_nonattention_s = s.counted_runs ? sum / static_cast<double>(s.counted_runs) : 0.0;
  return s;
}

inline nlohmann::json to_json(const SessionSummary& s) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : s.runs)
    runs.push_back({{"first_seg", r.first_seg}, {"length", r.length}, {"duration_s", r.duration_s}, {"phase", to_string(r.phase)}});
  return {{"type", "summary"},
          {"segments", s.segments},
          {"predictions", s.predictions},
          {"warnings", s.warnings},
          {"alerts", s.alerts},
          {"total_time_s", s.total_time_s},
          {"attentive_fraction", s.attentive_fraction},
          {"runs", runs},
          {"counted_runs", s.counted_runs},
          {"mean_nonattention_s", s.mean_nonattention_s},
          {"convention", s.convention == DurationConvention::Span ? "span" : "steps_only"}};
}

/// Online classifier. Single writer: push() and the control setters must be
/// called from one thread.
class Engine {
 public:
  Engine() = default;
  Engine(ModelBundle bundle, EngineConfig cfg = {}, double sample_rate = 250.0) : cfg_(cfg), alert_(cfg.policy) {
    load(std::move(bundle), sample_rate);
  }

  void load(ModelBundle bundle, double sample_rate = 250.0) {
    bundle_ = std::move(bundle);
    fs_ = sample_rate;
    pre_.emplace(bundle_->pipeline, sample_rate);
    extractor_.emplace(bundle_->manifest, bundle_->model.feature_names);
    ring_.emplace(bundle_->pipeline.segmentation.length, bundle_->pipeline.segmentation.step(),
                  2 * bundle_->pipeline.segmentation.length);
  }

  bool has_model() const { return bundle_.has_value(); }

  /// Feeds timestamped samples; returns the events they complete.
  std::vector<EngineEvent> push(std::span<const synth::SampleEvent> samples) {
    if (!bundle_) throw Error(ErrorCode::ModelMissing, "engine has no trained model loaded");
    std::vector<EngineEvent> out;
    for (const auto& s : samples) {
      const bool gap = last_t_ && s.timestamp - *last_t_ > cfg_.contact_gap_s + 1.0 / fs_;
      last_t_ = s.timestamp;
      last_wall_ = std::chrono::steady_clock::now();
      watchdog_fired_ = false;
      if (gap || !std::isfinite(s.value)) {
        contact_lost(out, s.timestamp, gap ? "contact_loss_gap" : "contact_loss_invalid_sample");
        if (!std::isfinite(s.value)) continue;
      }
      auto w = ring_->push(s.value, s.aux);
      if (w) out.push_back(process_window(*w, s.timestamp));
    }
    return out;
  }

  /// Untimestamped convenience: samples are assumed contiguous at the rate.
  std::vector<EngineEvent> push_samples(std::span<const double> samples) {
    std::vector<synth::SampleEvent> ev(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      ev[i].value = samples[i];
      ev[i].timestamp = static_cast<double>(clock_samples_++) / fs_ + clock_offset_;
    }
    return push(ev);
  }

  /// Watchdog: call periodically; emits a warning when no sample has arrived
  /// for longer than the configured silence.
  std::optional<EngineEvent> tick(std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now()) {
    if (!last_wall_ || watchdog_fired_) return std::nullopt;
    if (std::chrono::duration<double>(now - *last_wall_).count() <= cfg_.watchdog_s) return std::nullopt;
    watchdog_fired_ = true;
    std::vector<EngineEvent> out;
    contact_lost(out, last_t_.value_or(0.0), "contact_loss_timeout");
    return out.front();
  }

  void set_policy(const AlertPolicy& p) {
    cfg_.policy = p;
    alert_.set_policy(p);
  }
  void set_phase(Phase p) { cfg_.phase = p; }
  Phase phase() const { return cfg_.phase; }
  const AlertPolicy& policy() const { return cfg_.policy; }
  const std::vector<LogEntry>& log() const { return log_; }
  std::size_t alert_counter() const { return alert_.counter(); }
  const ModelBundle* bundle() const { return bundle_ ? &*bundle_ : nullptr; }

  WindowGeometry geometry() const {
    if (!bundle_) return {};
    return {bundle_->pipeline.segmentation.length, bundle_->pipeline.segmentation.step(), fs_};
  }

  SessionSummary summary(DurationConvention c = DurationConvention::Span) const {
    return session_summary(log_, cfg_.policy, c, geometry());
  }

  /// Clears the log and counters for a new session; the model stays loaded.
  void reset_session() {
    log_.clear();
    alert_.reset();
    seg_idx_ = 0;
    if (ring_) ring_->reset();
  }

 private:
  void contact_lost(std::vector<EngineEvent>& out, double t, const std::string& reason) {
    ring_->reset();
    EngineEvent e;
    e.kind = EventKind::Warning;
    e.seg_idx = seg_idx_++;
    e.t = t;
    e.warning = true;
    e.warning_reason = reason;
    e.phase = cfg_.phase;
    log_.push_back({e.seg_idx, e.t, Label::Unlabeled, 0, false, true, cfg_.phase});
    out.push_back(std::move(e));
  }

  EngineEvent process_window(const RingBuffer::Window& w, double t) {
    const auto t0 = std::chrono::steady_clock::now();
    EngineEvent e;
    e.seg_idx = seg_idx_++;
    e.t = t;
    e.window_start = w.start;
    e.phase = cfg_.phase;
    for (std::size_t i = 0; i < w.samples.size(); i += cfg_.display_decimation) e.display.push_back(w.samples[i]);
    if (w.aux) {
      e.attention = (*w.aux)[kAuxAttention];
      e.meditation = (*w.aux)[kAuxMeditation];
    }
    Segment raw;
    raw.samples = w.samples;
    raw.sample_rate = fs_;
    raw.origin = {"live", "stream", w.start};
    raw.aux = w.aux;
    std::string reason;
    std::optional<svm::Prediction> pred;
    try {
      pred = classify_window(*pre_, *extractor_, bundle_->model, raw, &reason);
    } catch (const Error& err) {
      if (err.code() != ErrorCode::ManifestMismatch) throw;
      reason = "missing_aux_channels";
    }
    if (!pred) {
      e.kind = EventKind::Warning;
      e.warning = true;
      e.warning_reason = reason;
    } else {
      e.prediction = pred->label;
      e.margin = pred->margin;
      const bool fired = alert_.update(pred->label) == AlertDecision::Alert;
      e.alert = fired && cfg_.phase == Phase::Feedback;
    }
    e.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    log_.push_back({e.seg_idx, e.t, e.prediction, e.margin, e.alert, e.warning, e.phase});
    return e;
  }

  EngineConfig cfg_;
  AlertState alert_;
  std::optional<ModelBundle> bundle_;
  std::optional<pipeline::Preprocessor> pre_;
  std::optional<features::FeatureExtractor> extractor_;
  std::optional<RingBuffer> ring_;
  std::vector<LogEntry> log_;
  double fs_ = 250.0;
  std::size_t seg_idx_ = 0;
  std::size_t clock_samples_ = 0;
  double clock_offset_ = 0;
  std::optional<double> last_t_;
  std::optional<std::chrono::steady_clock::time_point> last_wall_;
  bool watchdog_fired_ = false;
};

// ---------------------------------------------------------------------------
// Pilot statistics

struct PilotResult {
  std::size_t n = 0;
  std::vector<double> baseline, feedback;
  double mean_difference = 0;  // baseline - feedback
  double sd_difference = 0;
  double t = 0;
  double df = 0;
  double p = 1;
};

/// Paired t-test on d = baseline - feedback with a two-sided p-value.
inline PilotResult paired_t_test(std::span<const double> baseline, std::span<const double> feedback) {
  if (baseline.size() != feedback.size())
    throw Error(ErrorCode::UnpairedLengths, "paired arrays differ in length (" + std::to_string(baseline.size()) +
                                                " vs " + std::to_string(feedback.size()) + ")");
  const std::size_t n = baseline.size();
  if (n < 2) throw Error(ErrorCode::InvalidConfig, "paired t-test needs at least two pairs");
  PilotResult r;
  r.n = n;
  r.baseline.assign(baseline.begin(), baseline.end());
  r.feedback.assign(feedback.begin(), feedback.end());
  double mean = 0;
  for (std::size_t i = 0; i < n; ++i) mean += baseline[i] - feedback[i];
  mean /= static_cast<double>(n);
  double ss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = baseline[i] - feedback[i] - mean;
    ss += d * d;
  }
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (!(sd > 0)) throw Error(ErrorCode::ZeroVariance, "paired differences have zero variance; t is undefined");
  r.mean_difference = mean;
  r.sd_difference = sd;
  r.df = static_cast<double>(n - 1);
  r.t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

inline nlohmann::json to_json(const PilotResult& r) {
  return {{"n", r.n},
          {"baseline_means", r.baseline},
          {"feedback_means", r.feedback},
          {"mean_difference", r.mean_difference},
          {"sd_difference", r.sd_difference},
          {"t", r.t},
          {"df", r.df},
          {"p", r.p}};
}

}  // namespace eegattn::realtime
