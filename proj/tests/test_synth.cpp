#include <catch_amalgamated.hpp>

#include "eegattn/features.hpp"
#include "eegattn/synth.hpp"

#include <chrono>

using namespace eegattn;

namespace {

synth::GeneratorConfig small(std::uint64_t seed = 3) {
  synth::GeneratorConfig c;
  c.subjects = 2;
  c.blocks_per_class = 2;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("a fixed seed reproduces the dataset exactly") {
  const auto a = synth::generate_dataset(small());
  const auto b = synth::generate_dataset(small());
  REQUIRE(a.size() == 8);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].record.samples == b[i].record.samples);
    CHECK(a[i].record.aux->channels == b[i].record.aux->channels);
    CHECK(synth::to_json(a[i].truth) == synth::to_json(b[i].truth));
  }
  const auto c = synth::generate_dataset(small(4));
  CHECK(c[0].record.samples != a[0].record.samples);
}

TEST_CASE("dataset layout: subject-major, alternating classes, labelled ids") {
  const auto d = synth::generate_dataset(small());
  CHECK(d[0].record.subject_id == "S01");
  CHECK(d[0].record.block_id == "S01-B01");
  CHECK(d[4].record.subject_id == "S02");
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d[i].record.label == (i % 2 == 0 ? Label::Attentive : Label::NonAttentive));
    CHECK(d[i].record.samples.size() == 7500);
    CHECK(d[i].record.aux->synthetic);
    CHECK(d[i].record.aux->channels[0].size() == 30);
  }
}

TEST_CASE("generator config validation") {
  auto c = small();
  c.block_length = 1000;
  CHECK_THROWS_AS(synth::generate_dataset(c), Error);
  c = small();
  c.contrast = 0.5;
  CHECK_THROWS_AS(synth::generate_dataset(c), Error);
  c = small();
  c.blink_rate_per_min = -1;
  CHECK_THROWS_AS(synth::generate_dataset(c), Error);
  c = small();
  c.band_gain.pop_back();
  CHECK_THROWS_AS(synth::generate_dataset(c), Error);
  CHECK(synth::contrast_preset("paper-like") == 3.0);
  CHECK(synth::contrast_preset("2.5") == 2.5);
  CHECK_THROWS_AS(synth::contrast_preset("extreme"), Error);
  CHECK_THROWS_AS(synth::contrast_preset("-2"), Error);
}

TEST_CASE("blink truth: none at rate zero, smooth transients in range otherwise") {
  auto c = small();
  c.blink_rate_per_min = 0;
  for (const auto& g : synth::generate_dataset(c)) CHECK(g.truth.blinks.empty());

  c.blink_rate_per_min = 6;
  std::size_t total = 0;
  for (const auto& g : synth::generate_dataset(c)) {
    for (const auto& b : g.truth.blinks) {
      CHECK(b.amplitude_uv >= 60.0);
      CHECK(b.amplitude_uv <= 120.0);
      CHECK(b.duration_ms >= 200.0);
      CHECK(b.duration_ms <= 400.0);
      CHECK(b.apex_index < 7500);
      // the apex stands well above the 7 uV background
      CHECK(g.record.samples[b.apex_index] > 25.0);
    }
    total += g.truth.blinks.size();
  }
  // 8 blocks x 0.5 min x 6/min, thinned by the one-second refractory gap
  CHECK(total >= 10);
  CHECK(total <= 40);
}

TEST_CASE("class contrast sets the expected B1/(A+T) ratio between classes") {
  synth::GeneratorConfig c;
  c.subjects = 10;
  c.blocks_per_class = 4;
  c.blink_rate_per_min = 0;
  c.noise_floor_uv = 0;
  c.line_noise_uv = 0;
  c.with_aux = false;
  c.seed = 17;
  const auto bands = features::default_bands();
  const features::FeatureExtractor ex(features::build_manifest({}, false), {"en_b_at"});
  auto ratio_of = [&](const dsp::PsdEstimate& psd) {
    const auto bp = features::band_powers(psd, bands);
    return bp[3].absolute / (bp[1].absolute + bp[2].absolute);
  };
  double previous_segment_ratio = 1.0;
  for (double contrast : {1.0, 2.0, 3.0, 4.0}) {
    c.contrast = contrast;
    // geometric means over blocks; per-subject and per-block gains are log-symmetric
    double block_att = 0, block_non = 0, seg_att = 0, seg_non = 0;
    std::size_t n_seg = 0;
    for (const auto& g : synth::generate_dataset(c)) {
      const bool att = g.record.label == Label::Attentive;
      // long-window estimate: 0.1 Hz bins, negligible leakage between bands
      (att ? block_att : block_non) += std::log(ratio_of(dsp::welch_psd(g.record.samples, 250.0, 2500, 1250)));
      for (std::size_t s = 0; s + 1250 <= g.record.samples.size(); s += 1250) {
        Segment seg;
        seg.samples.assign(g.record.samples.begin() + static_cast<std::ptrdiff_t>(s),
                           g.record.samples.begin() + static_cast<std::ptrdiff_t>(s + 1250));
        (att ? seg_att : seg_non) += std::log(ex.extract(seg).values[0]);
        n_seg += att;
      }
    }
    const double blocks = static_cast<double>(c.subjects * c.blocks_per_class);
    const double block_ratio = std::exp((block_att - block_non) / blocks);
    const double seg_ratio = std::exp((seg_att - seg_non) / static_cast<double>(n_seg));
    INFO("contrast " << contrast << " block ratio " << block_ratio << " segment feature ratio " << seg_ratio);
    CHECK(block_ratio == Catch::Approx(contrast).epsilon(0.10));
    // the 1 s Hann windows of the per-segment feature leak between the narrow
    // bands and compress the ratio toward 1, but keep its order
    CHECK(seg_ratio <= block_ratio * 1.02);
    if (contrast > 1.0) CHECK(seg_ratio > previous_segment_ratio * 1.2);
    previous_segment_ratio = seg_ratio;
  }
}

TEST_CASE("score modes: planted scores encode the label, noise scores do not") {
  auto c = small();
  c.scores = synth::ScoreMode::Planted;
  for (const auto& g : synth::generate_dataset(c)) {
    const double want = g.record.label == Label::Attentive ? 70 : 30;
    for (double v : g.record.aux->channels[kAuxAttention]) CHECK(v == want);
    for (double v : g.record.aux->channels[kAuxMeditation]) CHECK(v == 100 - want);
  }
  c.scores = synth::ScoreMode::Noise;
  double att_a = 0, att_n = 0;
  for (const auto& g : synth::generate_dataset(c))
    for (double v : g.record.aux->channels[kAuxAttention]) {
      CHECK(v >= 0);
      CHECK(v <= 100);
      (g.record.label == Label::Attentive ? att_a : att_n) += v;
    }
  CHECK(std::abs(att_a - att_n) / (att_a + att_n) < 0.1);
  CHECK(synth::score_mode_from_string("planted") == synth::ScoreMode::Planted);
  CHECK_THROWS_AS(synth::score_mode_from_string("oracle"), Error);
}

TEST_CASE("surrogate attention tracks the band ratio") {
  synth::GeneratorConfig c;
  c.subjects = 4;
  c.blocks_per_class = 3;
  double att = 0, non = 0;
  for (const auto& g : synth::generate_dataset(c))
    for (double v : g.record.aux->channels[kAuxAttention]) (g.record.label == Label::Attentive ? att : non) += v;
  CHECK(att > non);
}

TEST_CASE("replay emits every sample in order and then reports exhaustion") {
  const auto d = synth::generate_dataset(small());
  std::vector<EegRecord> recs{d[0].record, d[1].record};
  synth::ReplaySource src(recs);
  CHECK(src.total() == 15000);
  std::size_t n = 0;
  while (auto e = src.try_next()) {
    const auto& r = recs[n / 7500];
    REQUIRE(e->value == r.samples[n % 7500]);
    REQUIRE(e->timestamp == Catch::Approx(static_cast<double>(n) / 250.0));
    REQUIRE(e->aux.has_value());
    ++n;
  }
  CHECK(n == 15000);
  try {
    src.next();
    FAIL("expected SourceExhausted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SourceExhausted);
  }
}

TEST_CASE("gap injection shifts later timestamps") {
  const auto d = synth::generate_dataset(small());
  synth::ReplaySource src({d[0].record});
  src.inject_gap(100, 3.0);
  double prev = -1;
  for (std::size_t i = 0; i < 200; ++i) {
    const auto e = src.next();
    if (i == 100) CHECK(e.timestamp - prev == Catch::Approx(3.0 + 1.0 / 250.0));
    else if (i > 0) CHECK(e.timestamp - prev == Catch::Approx(1.0 / 250.0));
    prev = e.timestamp;
  }
}

TEST_CASE("live generator alternates classes and never runs dry") {
  auto c = small();
  synth::LiveGenerator live(c, 1);
  const auto d = synth::generate_dataset(c);
  for (std::size_t i = 0; i < 7500; ++i) REQUIRE(live.next().value == d[4].record.samples[i]);
  CHECK(live.current_label() == Label::Attentive);
  live.next();
  CHECK(live.current_label() == Label::NonAttentive);
}

TEST_CASE("pacer at rate 2 plays N samples in N / (2 fs) seconds") {
  const std::size_t n = 500;
  const synth::Pacer pacer(250.0, 2.0);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i <= n; ++i) pacer.wait_for(i);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(secs == Catch::Approx(1.0).epsilon(0.05));
  CHECK_THROWS_AS(synth::Pacer(250.0, 0.0), Error);
}
