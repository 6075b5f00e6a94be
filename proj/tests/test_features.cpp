#include <catch_amalgamated.hpp>

#include "eegattn/features.hpp"
#include "oracles.hpp"

#include <random>
#include <set>

using namespace eegattn;
using features::FeatureManifest;

namespace {

Segment noise_segment(std::uint64_t seed, std::size_t n = 1250, double sd = 10.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, sd);
  Segment s;
  s.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    s.samples[i] = g(rng) + 15.0 * std::sin(2 * std::numbers::pi * 10.0 * static_cast<double>(i) / 250.0);
  s.origin = {"S01", "S01-B01", 0};
  return s;
}

double energy(const std::vector<double>& x) {
  double e = 0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace

TEST_CASE("catalog is versioned, unique and covers the named families") {
  const auto m = features::build_manifest();
  CHECK(m.size() == 383);
  CHECK(features::build_manifest({}, false).size() == 375);
  const auto names = m.names();
  CHECK(std::set<std::string>(names.begin(), names.end()).size() == names.size());
  for (const char* n : {"mean_D", "md_A", "var_T", "skew_B1", "kurt_G", "rms_B2", "avg_pow_A", "ptp_D", "zcr_T", "ha_A",
                        "hm_A", "hc_D", "n1d_B1", "n2d_B2", "sampen_A", "wen_A", "wle_T", "spec_centroid",
                        "spec_spread", "spec_entropy", "spec_crest", "spec_flatness", "spec_rolloff", "en_b_at", "RP_A",
                        "attention", "meditation", "aux_delta"})
    CHECK(m.index_of(n).has_value());
  const auto back = FeatureManifest::from_json(m.to_json());
  CHECK(back.names() == names);
  CHECK(back.hash() == m.hash());
  auto other = features::FeatureConfig{};
  other.wpt_level = 4;
  CHECK(features::build_manifest(other).hash() != m.hash());
}

TEST_CASE("wavelet packet level 1 splits energy exactly") {
  const auto s = noise_segment(1);
  const auto w = wavelet::wpt_decompose(s.samples, 1);
  REQUIRE(w.node_count() == 2);
  CHECK(w.node_energy(0) + w.node_energy(1) == Catch::Approx(energy(s.samples)).epsilon(0.01));
}

TEST_CASE("wavelet packet energy is conserved on random inputs") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(64, 1500)(rng);
    const auto s = noise_segment(rng(), n);
    for (const auto& wv : {wavelet::daubechies4(), wavelet::daubechies8(), wavelet::haar()})
      for (std::size_t level = 1; level <= 5; ++level) {
        const auto w = wavelet::wpt_decompose(s.samples, level, wv);
        double e = 0;
        for (std::size_t k = 0; k < w.node_count(); ++k) e += w.node_energy(k);
        REQUIRE(e == Catch::Approx(energy(s.samples)).epsilon(0.01));
      }
  }
}

TEST_CASE("wavelet packet reconstruction from every node returns the input") {
  const auto s = noise_segment(4, 1250);
  const auto w = wavelet::wpt_decompose(s.samples, 5);
  std::vector<std::size_t> all(w.node_count());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  const auto r = w.reconstruct(all);
  REQUIRE(r.size() == s.samples.size());
  for (std::size_t i = 0; i < r.size(); ++i) REQUIRE(r[i] == Catch::Approx(s.samples[i]).margin(1e-9));
}

TEST_CASE("a 10 Hz tone lands in the 7.8-11.7 Hz packet") {
  const auto x = oracle::sine(1250, 10.0, 250.0, 5.0);
  const auto w = wavelet::wpt_decompose(x, 5);
  REQUIRE(w.node_count() == 32);
  double total = 0;
  for (std::size_t k = 0; k < 32; ++k) total += w.node_energy(k);
  // node k spans [k, k+1) * 125/32 Hz
  CHECK(w.node_energy(2) / total >= 0.9);
  // the shorter db4 bank leaks more
  const auto w4 = wavelet::wpt_decompose(x, 5, wavelet::daubechies4());
  CHECK(w4.node_energy(2) < w.node_energy(2));
}

TEST_CASE("zero signal gives zero packets and a short signal is rejected") {
  const auto w = wavelet::wpt_decompose(std::vector<double>(256, 0.0), 5);
  for (std::size_t k = 0; k < w.node_count(); ++k) CHECK(w.node_energy(k) == 0.0);
  CHECK_THROWS_AS(wavelet::wpt_decompose(std::vector<double>(31, 1.0), 5), Error);
}

TEST_CASE("band powers localize a pure tone") {
  const auto x = oracle::sine(1250, 10.0, 250.0, 10.0);
  const auto bp = features::band_powers(dsp::welch_psd(x, 250.0), features::default_bands());
  double others = 0;
  for (const auto& b : bp)
    if (b.name == "A") CHECK(b.relative >= 0.9);
    else others += b.relative;
  CHECK(others <= 0.1);
}

TEST_CASE("relative powers sum to one when bands tile the total range") {
  const auto s = noise_segment(9);
  const auto psd = dsp::welch_psd(s.samples, 250.0);
  std::vector<features::BandDefinition> tiling{{"a", 0.5, 4}, {"b", 4, 13}, {"c", 13, 30}, {"d", 30, 64}};
  double sum = 0;
  for (const auto& b : features::band_powers(psd, tiling)) sum += b.relative;
  CHECK(sum == Catch::Approx(1.0).epsilon(0.01));
  double part = 0;
  for (const auto& b : features::band_powers(psd, features::default_bands())) part += b.relative;
  CHECK(part <= 1.0 + 1e-12);
  for (const auto& b : features::band_powers(dsp::welch_psd(std::vector<double>(500, 0.0), 250.0), tiling)) {
    CHECK(b.absolute == 0.0);
    CHECK(b.relative == 0.0);
  }
}

TEST_CASE("Hjorth parameters") {
  const auto h0 = features::hjorth(std::vector<double>(100, 3.0));
  CHECK(h0.activity == 0.0);
  CHECK(h0.mobility == 0.0);
  CHECK(h0.complexity == 0.0);
  CHECK_THROWS_AS(features::hjorth(std::vector<double>{1, 2}), Error);

  for (double f : {2.0, 5.0, 10.0, 20.0}) {
    const auto h = features::hjorth(oracle::sine(2500, f, 250.0));
    CHECK(h.mobility == Catch::Approx(2 * std::numbers::pi * f / 250.0).epsilon(0.05));
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 1.0 / std::sqrt(2.0));
  int noisier = 0;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> n(1250);
    for (auto& v : n) v = g(rng);
    noisier += features::hjorth(n).complexity > features::hjorth(oracle::sine(1250, 10.0, 250.0)).complexity;
  }
  CHECK(noisier == 20);
}

TEST_CASE("en_b_at is P(B1) / (P(A) + P(T))") {
  std::vector<double> x(2500, 0.0);
  const auto b1 = oracle::sine(2500, 16.0, 250.0, std::sqrt(8.0));
  const auto a = oracle::sine(2500, 10.0, 250.0, std::sqrt(2.0), 0.4);
  const auto t = oracle::sine(2500, 6.0, 250.0, std::sqrt(2.0), 1.1);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = b1[i] + a[i] + t[i];
  Segment s;
  s.samples = x;
  const features::FeatureExtractor ex(features::build_manifest({}, false), {"en_b_at", "abp_B1", "abp_A", "abp_T"});
  const auto v = ex.extract(s);
  CHECK(v.values[1] == Catch::Approx(4.0).epsilon(0.02));
  CHECK(v.values[2] == Catch::Approx(1.0).epsilon(0.02));
  CHECK(v.values[3] == Catch::Approx(1.0).epsilon(0.02));
  CHECK(v.values[0] == Catch::Approx(2.0).epsilon(0.02));
}

TEST_CASE("zero and constant segments give finite features, zero for the zero segment") {
  const auto m = features::build_manifest({}, false);
  Segment z;
  z.samples.assign(1250, 0.0);
  for (double v : features::extract_features(z, m).values) CHECK(v == 0.0);
  Segment c;
  c.samples.assign(1250, 42.0);
  for (double v : features::extract_features(c, m).values) CHECK(std::isfinite(v));
}

TEST_CASE("extraction is deterministic and subsets agree with the full catalog") {
  const auto m = features::build_manifest({}, false);
  const auto s = noise_segment(21);
  const auto a = features::extract_features(s, m);
  const auto b = features::extract_features(s, m);
  CHECK(a.values == b.values);
  const std::vector<std::string> subset{"hc_D", "en_b_at", "wpt_e3", "sampen", "spec_flatness", "RP_A"};
  const auto sub = features::FeatureExtractor(m, subset).extract(s);
  for (std::size_t j = 0; j < subset.size(); ++j) CHECK(sub.values[j] == a.values[*m.index_of(subset[j])]);
  CHECK_THROWS_AS(features::FeatureExtractor(m, {"no_such_feature"}), Error);
}

TEST_CASE("aux manifests require aux channels") {
  const auto m = features::build_manifest();
  auto s = noise_segment(3);
  try {
    features::extract_features(s, m);
    FAIL("expected ManifestMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ManifestMismatch);
  }
  AuxSnapshot aux{};
  for (std::size_t c = 0; c < kAuxChannelCount; ++c) aux[c] = 10.0 * static_cast<double>(c);
  s.aux = aux;
  const auto v = features::extract_features(s, m);
  CHECK(v.values[*m.index_of("attention")] == 60.0);
  CHECK(v.values[*m.index_of("meditation")] == 70.0);
}

TEST_CASE("homogeneous features follow their scaling law") {
  const auto m = features::build_manifest({}, false);
  for (std::uint64_t seed : {31u, 32u, 33u}) {
    const auto s = noise_segment(seed);
    const auto base = features::extract_features(s, m);
    // power-of-two factors scale floating point values exactly, so threshold
    // comparisons (sample entropy tolerance, crossings) cannot flip
    for (double c : {0.25, 2.0, 8.0}) {
      Segment scaled = s;
      for (auto& v : scaled.samples) v *= c;
      const auto out = features::extract_features(scaled, m);
      for (std::size_t j = 0; j < m.size(); ++j) {
        const int k = m.entries[j].scale_exponent;
        if (k == features::kNotHomogeneous) continue;
        const double want = base.values[j] * std::pow(c, k);
        INFO(m.entries[j].name << " c=" << c);
        REQUIRE(out.values[j] == Catch::Approx(want).epsilon(1e-9).margin(1e-12 * std::pow(c, k)));
      }
    }
  }
}

TEST_CASE("named invariants: activity c^2, mobility, complexity, relative power, flatness, n2d unchanged") {
  const auto m = features::build_manifest({}, false);
  const auto s = noise_segment(44);
  Segment scaled = s;
  for (auto& v : scaled.samples) v *= 3.3;
  const auto a = features::extract_features(s, m), b = features::extract_features(scaled, m);
  auto at = [&](const features::FeatureVector& v, const char* n) { return v.values[*m.index_of(n)]; };
  CHECK(at(b, "ha") == Catch::Approx(3.3 * 3.3 * at(a, "ha")).epsilon(1e-9));
  for (const char* n : {"hm", "hc", "RP_A", "RP_T", "spec_flatness", "n2d", "hc_D", "en_b_at"})
    CHECK(at(b, n) == Catch::Approx(at(a, n)).epsilon(1e-9));
}
