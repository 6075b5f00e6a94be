#pragma once

#include "eegattn/evaluation.hpp"
#include "eegattn/pipeline.hpp"
#include "eegattn/realtime.hpp"
#include "eegattn/synth.hpp"

#include <numbers>
#include <vector>

namespace fixture {

using namespace eegattn;

/// One-feature linear model with f = abp_A - threshold: alpha-heavy windows
/// come out NonAttentive, everything else Attentive.
inline realtime::ModelBundle alpha_bundle(double threshold = 50.0) {
  realtime::ModelBundle b;
  b.manifest = features::build_manifest({}, false);
  auto& m = b.model;
  m.kernel = svm::Kernel::linear();
  m.feature_names = {"abp_A"};
  m.support_vectors = Eigen::MatrixXd::Ones(1, 1);
  m.dual_coef = Eigen::VectorXd::Ones(1);
  m.bias = -threshold;
  m.standardizer.mean = Eigen::RowVectorXd::Zero(1);
  m.standardizer.scale = Eigen::RowVectorXd::Ones(1);
  m.manifest_hash = b.manifest.hash();
  return b;
}

/// `n` samples of a sinusoid continuing from absolute sample `from`.
inline std::vector<double> tone(std::size_t n, double hz, double amp = 20.0, std::size_t from = 0, double fs = 250.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2 * std::numbers::pi * hz * static_cast<double>(from + i) / fs);
  return x;
}

inline synth::GeneratorConfig small_dataset(std::uint64_t seed = 5, std::size_t subjects = 2, std::size_t blocks = 2) {
  synth::GeneratorConfig c;
  c.subjects = subjects;
  c.blocks_per_class = blocks;
  c.seed = seed;
  c.with_aux = false;
  return c;
}

inline const std::vector<std::string>& small_feature_set() {
  static const std::vector<std::string> names{"en_b_at", "RP_A", "RP_T", "RP_B1", "hm", "spec_centroid"};
  return names;
}

/// Model trained through the offline pipeline on a small synthetic dataset.
inline realtime::ModelBundle trained_bundle(const std::vector<EegRecord>& records) {
  realtime::ModelBundle b;
  b.manifest = features::build_manifest({}, false);
  const auto pre = pipeline::preprocess_records(records, b.pipeline);
  const auto table = pipeline::extract_table(pre.kept, b.manifest, small_feature_set());
  b.model = learn::train_final(table, {1.0, 0.1});
  b.model.manifest_hash = b.manifest.hash();
  return b;
}

inline std::vector<EegRecord> records_of(const std::vector<synth::GeneratedBlock>& blocks) {
  std::vector<EegRecord> out;
  for (const auto& g : blocks) out.push_back(g.record);
  return out;
}

}  // namespace fixture
