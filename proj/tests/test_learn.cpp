#include <catch_amalgamated.hpp>

#include "eegattn/evaluation.hpp"

#include <random>
#include <set>

using namespace eegattn;

namespace {

// Separable two-feature table: class means at +-shift, identical across subjects.
features::FeatureTable separable(int subjects, int per_subject, double shift, std::uint64_t seed,
                                 bool with_scores = false, double score_noise = -1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(1.0, 100.0);
  features::FeatureTable t;
  t.names = {"f0", "f1"};
  if (with_scores) t.names.insert(t.names.end(), {"attention", "meditation"});
  t.values.resize(subjects * per_subject, static_cast<Eigen::Index>(t.names.size()));
  for (int s = 0; s < subjects; ++s)
    for (int i = 0; i < per_subject; ++i) {
      const int r = s * per_subject + i, l = i % 2;
      t.values(r, 0) = g(rng) + (l ? shift : -shift);
      t.values(r, 1) = g(rng) + (l ? shift : -shift);
      if (with_scores) {
        if (score_noise < 0) {  // scores encode the label exactly
          t.values(r, 2) = l ? 30 : 70;
          t.values(r, 3) = l ? 70 : 30;
        } else {
          t.values(r, 2) = u(rng);
          t.values(r, 3) = u(rng);
        }
      }
      t.subjects.push_back("S" + std::to_string(s));
      t.labels.push_back(l);
    }
  return t;
}

}  // namespace

TEST_CASE("metrics from a confusion table") {
  const learn::Confusion c{45, 5, 5, 45};
  const auto m = learn::metrics(c);
  CHECK(m.accuracy == Catch::Approx(0.90));
  CHECK(m.precision == Catch::Approx(0.90));
  CHECK(m.recall == Catch::Approx(0.90));
  CHECK(m.f1 == Catch::Approx(0.90));
  const auto skewed = learn::metrics({10, 30, 5, 55});
  CHECK(skewed.accuracy == Catch::Approx(0.65));
  CHECK(skewed.precision == Catch::Approx(0.25));
  CHECK(skewed.recall == Catch::Approx(10.0 / 15.0));
  CHECK(skewed.f1 == Catch::Approx(2 * 0.25 * (10.0 / 15.0) / (0.25 + 10.0 / 15.0)));
  const auto empty = learn::metrics({});
  CHECK(empty.accuracy == 0.0);
  CHECK(empty.f1 == 0.0);

  learn::Confusion acc;
  acc.add(1, 1);
  acc.add(1, 0);
  acc.add(0, 1);
  acc.add(0, 0);
  CHECK(acc.tp == 1);
  CHECK(acc.fn == 1);
  CHECK(acc.fp == 1);
  CHECK(acc.tn == 1);
}

TEST_CASE("attention/meditation ratio baseline") {
  CHECK(learn::ratio_baseline(60, 40) == Label::Attentive);
  CHECK(learn::ratio_baseline(50, 50) == Label::NonAttentive);
  CHECK(learn::ratio_baseline(0, 50) == Label::NonAttentive);
  CHECK(learn::ratio_baseline(10, 0) == Label::Attentive);
}

TEST_CASE("LOSO partition covers every row exactly once, grouped by subject") {
  const std::vector<std::string> subjects{"B", "A", "B", "C", "A", "C", "B"};
  const auto parts = learn::loso_partition(subjects);
  REQUIRE(parts.size() == 3);
  CHECK(parts[0].first == "B");
  CHECK(parts[1].first == "A");
  std::multiset<std::size_t> seen;
  for (const auto& [s, idx] : parts)
    for (auto i : idx) {
      CHECK(subjects[i] == s);
      seen.insert(i);
    }
  CHECK(seen.size() == subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) CHECK(seen.count(i) == 1);
}

TEST_CASE("two subjects with identical separable data give near-perfect folds") {
  const auto t = separable(2, 80, 3.0, 1);
  learn::LosoConfig cfg;
  const auto rep = learn::grid_search_loso(t, cfg);
  REQUIRE(rep.folds.size() == 2);
  for (const auto& f : rep.folds) {
    CHECK(f.n_test == 80);
    CHECK(f.metrics.accuracy >= 0.95);
    CHECK(f.confusion.total() == 80);
    CHECK(f.predictions.size() == 80);
    const auto m = learn::metrics(f.confusion);
    CHECK(m.accuracy == Catch::Approx(static_cast<double>(f.confusion.tp + f.confusion.tn) / 80.0));
  }
  CHECK(rep.modal_count >= 1);
  CHECK(std::find(cfg.c2_grid.begin(), cfg.c2_grid.end(), rep.modal.c2) != cfg.c2_grid.end());
  CHECK(rep.mean.accuracy >= 0.95);
  CHECK(rep.best_mean_accuracy >= rep.mean.accuracy - 1e-12);
  const auto j = learn::to_json(rep);
  CHECK(j.dump().find("folds") != std::string::npos);
  CHECK(learn::format_loso_table(rep).find("S1") != std::string::npos);
}

TEST_CASE("LOSO rejects one-subject tables and degenerate training folds") {
  auto t = separable(1, 20, 1.0, 2);
  CHECK_THROWS_AS(learn::grid_search_loso(t), Error);
  auto u = separable(2, 20, 1.0, 3);
  for (std::size_t i = 0; i < 20; ++i) u.labels[i] = 0;  // S0 only attentive
  for (std::size_t i = 20; i < 40; ++i) u.labels[i] = 1;
  try {
    learn::grid_search_loso(u);
    FAIL("expected DegenerateFold");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateFold);
  }
}

TEST_CASE("fold tie-breaking prefers the smaller C2 then the smaller gamma") {
  // perfectly separable with a wide margin: every pair scores 100%
  const auto t = separable(3, 40, 6.0, 4);
  learn::LosoConfig cfg;
  cfg.c2_grid = {10, 1, 0.1};
  cfg.gamma_grid = {0.5, 0.1};
  const auto rep = learn::grid_search_loso(t, cfg);
  for (const auto& f : rep.folds) {
    CHECK(f.best_accuracy == 1.0);
    CHECK(f.best == learn::HyperPair{0.1, 0.1});
  }
  CHECK(rep.modal == learn::HyperPair{0.1, 0.1});
  CHECK(rep.modal_count == 3);
}

TEST_CASE("prediction is unchanged by positive rescaling of a raw feature") {
  const auto t = separable(3, 40, 1.0, 5);
  auto s = t;
  s.values.col(0) *= 250.0;
  const auto a = learn::loso_fixed(t, {1.0, 0.5});
  const auto b = learn::loso_fixed(s, {1.0, 0.5});
  for (std::size_t f = 0; f < a.folds.size(); ++f) CHECK(a.folds[f].predictions == b.folds[f].predictions);
}

TEST_CASE("final model trains on every row with the chosen pair") {
  const auto t = separable(2, 40, 3.0, 6);
  const auto m = learn::train_final(t, {1.0, 0.5});
  CHECK(m.C == 1.0);
  CHECK(m.feature_names == t.names);
  int correct = 0;
  for (std::size_t i = 0; i < t.rows(); ++i) {
    const std::vector<double> x{t.values(static_cast<Eigen::Index>(i), 0), t.values(static_cast<Eigen::Index>(i), 1)};
    correct += static_cast<int>(svm::predict(m, x).label) == t.labels[i];
  }
  CHECK(correct >= 76);
}

TEST_CASE("ablation without scores marks the score rows Unavailable") {
  const auto t = separable(3, 40, 2.0, 7);
  const auto rows = learn::ablation_suite(t, {"f0", "f1"});
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].name == "computed_features_only");
  CHECK(rows[0].available);
  CHECK(rows[0].fold_accuracy.size() == 3);
  CHECK_FALSE(rows[1].available);
  CHECK_FALSE(rows[2].available);
  CHECK(rows[3].available);
  const auto with_aux = learn::ablation_suite(t, {"f0", "attention"});
  CHECK_FALSE(with_aux[3].available);
  CHECK(learn::format_ablation_table(rows).find("Unavailable") != std::string::npos);
  const auto j = learn::to_json(rows, {});
  CHECK(j["rows"][1]["mean_accuracy"].is_null());
}

TEST_CASE("ablation with label-encoding scores reaches 100% on the score rows") {
  const auto t = separable(4, 40, 0.3, 8, true);
  const auto rows = learn::ablation_suite(t, {"f0", "f1", "attention", "meditation"});
  CHECK(rows[1].mean_accuracy == 1.0);
  CHECK(rows[2].mean_accuracy >= 0.99);
  CHECK(rows[3].mean_accuracy >= 0.95);
}

TEST_CASE("ablation with noise scores: ratio near chance, full set near computed-only") {
  const auto t = separable(6, 100, 1.0, 9, true, 1.0);
  const auto rows = learn::ablation_suite(t, {"f0", "f1", "attention", "meditation"});
  CHECK(std::abs(rows[1].mean_accuracy - 0.5) <= 0.1);
  CHECK(std::abs(rows[2].mean_accuracy - 0.5) <= 0.1);
  CHECK(std::abs(rows[3].mean_accuracy - rows[0].mean_accuracy) <= 0.05);
}
