#include <catch_amalgamated.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"

#include <chrono>

using namespace eegattn;
using realtime::AlertDecision;
using realtime::DurationConvention;

namespace {

std::vector<realtime::LogEntry> log_of(const std::vector<int>& preds, realtime::Phase phase = realtime::Phase::Feedback) {
  std::vector<realtime::LogEntry> log;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    realtime::LogEntry e;
    e.seg_idx = i;
    e.t = static_cast<double>(i) * 2.1;
    e.phase = phase;
    if (preds[i] < 0) e.warning = true;
    else e.prediction = static_cast<Label>(preds[i]);
    log.push_back(e);
  }
  return log;
}

}  // namespace

TEST_CASE("ring buffer emits on the window and every step after, losing nothing") {
  realtime::RingBuffer rb(1750, 525, 3500);
  std::vector<realtime::RingBuffer::Window> wins;
  for (std::size_t i = 0; i < 1749; ++i)
    if (auto w = rb.push(static_cast<double>(i))) wins.push_back(*w);
  CHECK(wins.empty());
  for (std::size_t i = 1749; i < 1750 + 525; ++i)
    if (auto w = rb.push(static_cast<double>(i))) wins.push_back(*w);
  CHECK(wins.size() == 2);
  for (std::size_t i = 2275; i < 20000; ++i)
    if (auto w = rb.push(static_cast<double>(i))) wins.push_back(*w);
  REQUIRE(wins.size() == 1 + (20000 - 1750) / 525);
  for (std::size_t k = 0; k < wins.size(); ++k) {
    CHECK(wins[k].start == k * 525);
    for (std::size_t i = 0; i < 1750; ++i) REQUIRE(wins[k].samples[i] == static_cast<double>(wins[k].start + i));
  }
  CHECK_THROWS_AS(realtime::RingBuffer(100, 200), Error);
}

TEST_CASE("ring buffer averages aux snapshots over complete windows only") {
  realtime::RingBuffer rb(10, 5);
  AuxSnapshot a{};
  a[kAuxAttention] = 40;
  for (int i = 0; i < 9; ++i) rb.push(0.0, a);
  const auto w = rb.push(0.0, std::nullopt);
  REQUIRE(w);
  CHECK_FALSE(w->aux.has_value());
  for (int i = 0; i < 4; ++i) rb.push(0.0, a);
  a[kAuxAttention] = 60;
  const auto w2 = rb.push(0.0, a);
  CHECK_FALSE(w2->aux.has_value());  // sample 9 had none
}

TEST_CASE("alerts fire exactly where a run reaches the threshold, all sequences up to length 12") {
  for (std::size_t need = 1; need <= 6; ++need)
    for (std::size_t len = 1; len <= 12; ++len)
      for (std::uint32_t bits = 0; bits < (1u << len); ++bits) {
        std::vector<int> preds(len);
        for (std::size_t i = 0; i < len; ++i) preds[i] = (bits >> i) & 1u;
        const auto want = oracle::expected_alerts(preds, need);
        realtime::AlertState st(realtime::AlertPolicy{need, std::nullopt, 8.0});
        for (std::size_t i = 0; i < len; ++i) {
          const bool got = realtime::update_alert_state(st, static_cast<Label>(preds[i])) == AlertDecision::Alert;
          REQUIRE(got == want[i]);
        }
      }
}

TEST_CASE("alert scenarios") {
  auto run = [](const std::string& seq, std::size_t need, std::optional<std::size_t> cooldown = std::nullopt) {
    realtime::AlertState st(realtime::AlertPolicy{need, cooldown, 8.0});
    std::vector<std::size_t> fired;
    for (std::size_t i = 0; i < seq.size(); ++i)
      if (st.update(seq[i] == 'N' ? Label::NonAttentive : Label::Attentive) == AlertDecision::Alert) fired.push_back(i);
    return fired;
  };
  CHECK(run("NNNNN", 5) == std::vector<std::size_t>{4});
  CHECK(run("NNNANNNN", 5).empty());
  CHECK(run("NNNNNNNN", 4) == std::vector<std::size_t>{3});
  // a longer cooldown swallows a quick second run
  CHECK(run("NNNNANNNN", 4) == std::vector<std::size_t>{3, 8});
  CHECK(run("NNNNANNNN", 4, 10) == std::vector<std::size_t>{3});
  CHECK_THROWS_AS(realtime::AlertState(realtime::AlertPolicy{0, std::nullopt, 8.0}), Error);
}

TEST_CASE("session summary: runs, conventions and filtering") {
  realtime::AlertPolicy policy;
  const auto all_att = realtime::session_summary(log_of({0, 0, 0, 0}), policy);
  CHECK(all_att.attentive_fraction == 1.0);
  CHECK(all_att.runs.empty());
  CHECK(all_att.mean_nonattention_s == 0.0);

  const auto four = log_of({0, 1, 1, 1, 1, 0});
  const auto span = realtime::session_summary(four, policy, DurationConvention::Span);
  REQUIRE(span.runs.size() == 1);
  CHECK(span.runs[0].length == 4);
  CHECK(span.runs[0].first_seg == 1);
  CHECK(span.runs[0].duration_s == Catch::Approx(13.3));
  CHECK(span.attentive_fraction == Catch::Approx(2.0 / 6.0));
  const auto steps = realtime::session_summary(four, policy, DurationConvention::StepsOnly);
  CHECK(steps.runs[0].duration_s == Catch::Approx(8.4));
  CHECK(steps.counted_runs == 1);
  CHECK(steps.mean_nonattention_s == Catch::Approx(8.4));

  // 1 s steps: runs of 6 and 9 segments last 6 s and 9 s
  const realtime::WindowGeometry g{250, 250, 250.0};
  std::vector<int> p;
  for (int i = 0; i < 6; ++i) p.push_back(1);
  p.push_back(0);
  for (int i = 0; i < 9; ++i) p.push_back(1);
  const auto s = realtime::session_summary(log_of(p), policy, DurationConvention::StepsOnly, g);
  REQUIRE(s.runs.size() == 2);
  CHECK(s.runs[0].duration_s == 6.0);
  CHECK(s.runs[1].duration_s == 9.0);
  CHECK(s.counted_runs == 1);
  CHECK(s.mean_nonattention_s == 9.0);

  // warnings pause a run without breaking it
  const auto w = realtime::session_summary(log_of({1, 1, -1, 1, 1}), policy, DurationConvention::StepsOnly);
  REQUIRE(w.runs.size() == 1);
  CHECK(w.runs[0].length == 4);
  CHECK(w.warnings == 1);

  CHECK_THROWS_AS(realtime::session_summary({}, policy), Error);
  try {
    realtime::session_summary(log_of({1}, realtime::Phase::Feedback), policy, DurationConvention::Span, {},
                              realtime::Phase::Baseline);
    FAIL("expected EmptySession");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySession);
  }
}

TEST_CASE("summary is a pure function of the log, including after a JSON round trip") {
  const auto log = log_of({0, 1, 1, -1, 1, 0, 1, 1, 1, 1, 1, 1, 0});
  std::vector<realtime::LogEntry> back;
  for (const auto& e : log) back.push_back(realtime::log_entry_from_json(nlohmann::json::parse(realtime::to_json(e).dump())));
  const auto a = realtime::session_summary(log, {}), b = realtime::session_summary(back, {});
  CHECK(realtime::to_json(a) == realtime::to_json(b));
  CHECK(a.runs == b.runs);
}

TEST_CASE("paired t-test agrees with the GSL reference") {
  const std::vector<double> base{10, 12, 14}, fb{8, 9, 10};
  const auto r = realtime::paired_t_test(base, fb);
  const auto ref = oracle::paired_t(base, fb);
  CHECK(r.t == Catch::Approx(ref.t).margin(1e-6));
  CHECK(r.p == Catch::Approx(ref.p).margin(1e-6));
  CHECK(r.df == 2);

  const std::vector<double> b5{14.2, 12.9, 16.5, 11.3, 13.8}, f5{9.1, 8.8, 10.2, 8.9, 9.6};
  const auto r5 = realtime::paired_t_test(b5, f5);
  const auto ref5 = oracle::paired_t(b5, f5);
  CHECK(r5.df == 4);
  CHECK(r5.t == Catch::Approx(ref5.t).margin(1e-6));
  CHECK(r5.p == Catch::Approx(ref5.p).margin(1e-6));

  // zero mean difference with nonzero spread
  const auto zero = realtime::paired_t_test(std::vector<double>{1, 2, 3}, std::vector<double>{2, 2, 2});
  CHECK(zero.t == 0.0);
  CHECK(zero.p == Catch::Approx(1.0));

  auto code_of = [](auto&& f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidConfig;
  };
  CHECK(code_of([&] { realtime::paired_t_test(base, base); }) == ErrorCode::ZeroVariance);
  CHECK(code_of([&] { realtime::paired_t_test(base, std::vector<double>{1, 2}); }) == ErrorCode::UnpairedLengths);
}

TEST_CASE("engine without a model refuses samples") {
  realtime::Engine e;
  try {
    e.push_samples(std::vector<double>(10, 0.0));
    FAIL("expected ModelMissing");
  } catch (const Error& err) {
    CHECK(err.code() == ErrorCode::ModelMissing);
  }
}

TEST_CASE("engine emits one event per window and step") {
  realtime::Engine e(fixture::alpha_bundle());
  CHECK(e.push_samples(fixture::tone(1749, 10.0)).empty());
  const auto first = e.push_samples(fixture::tone(1, 10.0, 20.0, 1749));
  REQUIRE(first.size() == 1);
  CHECK(first[0].prediction == Label::NonAttentive);
  CHECK(first[0].display.size() == 1750 / 4 + 1);
  CHECK(first[0].window_start == 0);
  const auto second = e.push_samples(fixture::tone(525, 10.0, 20.0, 1750));
  REQUIRE(second.size() == 1);
  CHECK(second[0].window_start == 525);
  CHECK(second[0].t - first[0].t == Catch::Approx(2.1));
}

TEST_CASE("sustained non-attention raises an alert on the fifth segment") {
  realtime::Engine e(fixture::alpha_bundle());
  const auto ev = e.push_samples(fixture::tone(1750 + 6 * 525, 10.0));
  REQUIRE(ev.size() == 7);
  for (std::size_t i = 0; i < ev.size(); ++i) CHECK(ev[i].alert == (i == 4));
  realtime::Engine beta(fixture::alpha_bundle());
  for (const auto& x : beta.push_samples(fixture::tone(1750 + 6 * 525, 20.0))) {
    CHECK(x.prediction == Label::Attentive);
    CHECK_FALSE(x.alert);
  }
}

TEST_CASE("a 200 uV spike yields a warning and leaves the alert counter alone") {
  realtime::Engine e(fixture::alpha_bundle());
  auto x = fixture::tone(1750 + 8 * 525, 10.0);
  for (std::size_t i = 2000; i < 2025; ++i) x[i] = 200.0;
  std::size_t warnings = 0, predictions = 0, counter = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (const auto& ev : e.push_samples(std::span<const double>(&x[i], 1))) {
      if (ev.warning) {
        ++warnings;
        CHECK(ev.warning_reason == "amplitude_over_threshold");
        CHECK(ev.prediction == Label::Unlabeled);
        CHECK_FALSE(ev.alert);
        CHECK(e.alert_counter() == counter);
      } else {
        ++predictions;
        CHECK(e.alert_counter() == counter + 1);
      }
      counter = e.alert_counter();
    }
  }
  CHECK(warnings >= 1);
  CHECK(predictions >= 1);
  CHECK(warnings + predictions == 9);
}

TEST_CASE("warnings pause the counter: five predictions across a warning still alert") {
  realtime::Engine e(fixture::alpha_bundle());
  auto x = fixture::tone(1750 + 9 * 525, 10.0);
  for (std::size_t i = 2000; i < 2025; ++i) x[i] = 200.0;
  const auto ev = e.push_samples(x);
  std::size_t preds_before_alert = 0;
  bool alerted = false;
  for (const auto& v : ev) {
    if (!v.warning && !alerted) ++preds_before_alert;
    if (v.alert) alerted = true;
  }
  CHECK(alerted);
  CHECK(preds_before_alert == 5);
}

TEST_CASE("policy changes apply to the next segment") {
  realtime::Engine e(fixture::alpha_bundle());
  auto ev = e.push_samples(fixture::tone(1750 + 525, 10.0));
  REQUIRE(ev.size() == 2);
  e.set_policy({3, std::nullopt, 8.0});
  ev = e.push_samples(fixture::tone(525, 10.0, 20.0, 2275));
  REQUIRE(ev.size() == 1);
  CHECK(ev[0].alert);
}

TEST_CASE("baseline phase counts runs but never raises alerts") {
  realtime::EngineConfig cfg;
  cfg.phase = realtime::Phase::Baseline;
  realtime::Engine e(fixture::alpha_bundle(), cfg);
  for (const auto& v : e.push_samples(fixture::tone(1750 + 8 * 525, 10.0))) CHECK_FALSE(v.alert);
  const auto s = e.summary(DurationConvention::StepsOnly);
  CHECK(s.runs.size() == 1);
  CHECK(s.runs[0].length == 9);
  CHECK(s.runs[0].phase == realtime::Phase::Baseline);
}

TEST_CASE("a 3 s contact gap raises a warning within one step") {
  const auto data = synth::generate_dataset(fixture::small_dataset());
  synth::ReplaySource src({data[0].record});
  src.inject_gap(3000, 3.0);
  realtime::Engine e(fixture::alpha_bundle(1e9));
  std::vector<realtime::EngineEvent> events;
  std::size_t fed = 0;
  while (auto s = src.try_next()) {
    for (auto& v : e.push(std::span<const synth::SampleEvent>(&*s, 1))) {
      if (v.warning_reason == "contact_loss_gap") CHECK(fed == 3000);
      events.push_back(v);
    }
    ++fed;
  }
  const auto it = std::find_if(events.begin(), events.end(), [](const auto& v) { return v.warning_reason == "contact_loss_gap"; });
  REQUIRE(it != events.end());
  // the ring restarts at the gap: the next window starts at sample 3000
  REQUIRE(it + 1 != events.end());
  CHECK((it + 1)->window_start == 3000);
  CHECK((it + 1)->t - it->t >= 1749 / 250.0 - 1e-9);
}

TEST_CASE("watchdog reports silence once") {
  realtime::EngineConfig cfg;
  cfg.watchdog_s = 0.05;
  realtime::Engine e(fixture::alpha_bundle(), cfg);
  CHECK_FALSE(e.tick().has_value());
  e.push_samples(fixture::tone(10, 10.0));
  const auto later = std::chrono::steady_clock::now() + std::chrono::milliseconds(200);
  const auto w = e.tick(later);
  REQUIRE(w);
  CHECK(w->warning_reason == "contact_loss_timeout");
  CHECK_FALSE(e.tick(later).has_value());
}

TEST_CASE("online predictions equal the offline pipeline on identical windows") {
  const auto data = synth::generate_dataset(fixture::small_dataset(8));
  const auto records = fixture::records_of(data);
  const auto bundle = fixture::trained_bundle(records);

  pipeline::Preprocessor pre(bundle.pipeline);
  const features::FeatureExtractor ex(bundle.manifest, bundle.model.feature_names);
  for (std::size_t r : {0u, 1u}) {
    std::vector<std::pair<Label, double>> offline;
    for (const auto& seg : segment_block(records[r], bundle.pipeline.segmentation)) {
      const auto p = realtime::classify_window(pre, ex, bundle.model, seg);
      offline.emplace_back(p ? p->label : Label::Unlabeled, p ? p->margin : 0.0);
    }
    realtime::Engine e(bundle);
    const auto ev = e.push_samples(records[r].samples);
    REQUIRE(ev.size() == offline.size());
    for (std::size_t i = 0; i < ev.size(); ++i) {
      CHECK(ev[i].prediction == offline[i].first);
      CHECK(ev[i].margin == offline[i].second);
      CHECK(ev[i].latency_ms < 2100.0);
    }
  }
}

TEST_CASE("bundle JSON round trip keeps the pipeline and decisions") {
  auto b = fixture::alpha_bundle();
  b.pipeline.blink.context = 99;
  b.pipeline.reject_uv = 120;
  const auto back = realtime::bundle_from_json(nlohmann::json::parse(realtime::to_json(b).dump()));
  CHECK(back.pipeline.blink.context == 99);
  CHECK(back.pipeline.reject_uv == 120);
  CHECK(back.manifest.hash() == b.manifest.hash());
  auto j = realtime::to_json(b);
  j.erase("manifest");
  CHECK_THROWS_AS(realtime::bundle_from_json(j), Error);
}

TEST_CASE("replay at rate 1.0 produces an event every 2.1 s") {
  const auto data = synth::generate_dataset(fixture::small_dataset());
  synth::ReplaySource src({data[0].record});
  realtime::Engine e(fixture::alpha_bundle());
  const synth::Pacer pacer(250.0, 1.0);
  std::vector<double> at;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; at.size() < 3; ++i) {
    pacer.wait_for(i);
    const auto s = src.next();
    if (!e.push(std::span<const synth::SampleEvent>(&s, 1)).empty())
      at.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  CHECK(at[0] == Catch::Approx(7.0).margin(0.2));
  for (std::size_t k = 1; k < at.size(); ++k) CHECK(at[k] - at[k - 1] == Catch::Approx(2.1).margin(0.2));
}
