#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "error.hpp"
#include "features.hpp"
#include "svm.hpp"

namespace eegattn::selection {

struct SelectionConfig {
  double pearson_threshold = 0.8;
  std::size_t target_count = 50;
  std::vector<double> c1_grid{0.01, 0.1, 1, 10, 100};
  std::vector<double> c2_grid{0.01, 0.1, 1, 10, 100};
  std::vector<double> gamma_grid{0.001, 0.01, 0.1, 0.5, 1, 10};
  std::size_t cv_folds = 5;
  std::size_t rfe_step = 1;
  double consensus_cutoff = 0.5;  // fraction of subjects
  bool exclude_aux = false;

  void validate(std::size_t feature_count) const {
    if (!(pearson_threshold > 0 && pearson_threshold <= 1))
      throw Error(ErrorCode::InvalidConfig, "pearson threshold must lie in (0,1]");
    if (target_count < 1 || target_count > feature_count)
      throw Error(ErrorCode::InvalidConfig, "target count must lie in [1, " + std::to_string(feature_count) + "]");
    if (rfe_step < 1) throw Error(ErrorCode::InvalidConfig, "RFE step must be >= 1");
    if (c1_grid.empty() || c2_grid.empty() || gamma_grid.empty())
      throw Error(ErrorCode::InvalidConfig, "selection grids must be non-empty");
  }
};

namespace detail {

// Centered, unit-norm copy of each column; constant columns become zero.
inline Eigen::MatrixXd normalized_columns(const Eigen::MatrixXd& X, std::vector<bool>& constant) {
  Eigen::MatrixXd N = X.rowwise() - X.colwise().mean();
  constant.assign(static_cast<std::size_t>(X.cols()), false);
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const double norm = N.col(j).norm();
    const double scale = X.col(j).cwiseAbs().maxCoeff();
    if (!(norm > 1e-12 * std::max(scale, 1.0) * std::sqrt(static_cast<double>(X.rows())))) {
      constant[static_cast<std::size_t>(j)] = true;
      N.col(j).setZero();
    } else {
      N.col(j) /= norm;
    }
  }
  return N;
}

}  // namespace detail

inline double pearson_column(const Eigen::MatrixXd& X, Eigen::Index a, Eigen::Index b) {
  const Eigen::VectorXd u = X.col(a).array() - X.col(a).mean();
  const Eigen::VectorXd v = X.col(b).array() - X.col(b).mean();
  const double den = u.norm() * v.norm();
  return den > 0 ? u.dot(v) / den : 0.0;
}

/// Greedy redundancy filter in column order: a column is dropped when its
/// |r| with an already kept column exceeds p, or when the pair is exactly
/// collinear. Constant columns correlate with nothing, but a constant column
/// equal to a kept constant column is a duplicate and is dropped.
inline std::vector<std::size_t> pearson_filter(const Eigen::MatrixXd& X, double p) {
  if (!X.allFinite()) throw Error(ErrorCode::InvalidConfig, "pearson filter needs a finite matrix");
  std::vector<bool> constant;
  const Eigen::MatrixXd N = detail::normalized_columns(X, constant);
  std::vector<std::size_t> kept;
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    bool drop = false;
    for (auto i : kept) {
      const auto ii = static_cast<Eigen::Index>(i);
      if (constant[i] || constant[static_cast<std::size_t>(j)]) {
        if (constant[i] && constant[static_cast<std::size_t>(j)] && X(0, ii) == X(0, j)) drop = true;
      } else {
        const double r = std::abs(N.col(ii).dot(N.col(j)));
        if (r > p || r >= 1.0 - 1e-12) drop = true;
      }
      if (drop) break;
    }
    if (!drop) kept.push_back(static_cast<std::size_t>(j));
  }
  return kept;
}

struct RfeResult {
  std::vector<std::size_t> selected;  // column indices, ascending
  std::vector<std::size_t> ranking;   // 1 for survivors; larger means eliminated earlier
  std::size_t nonconverged_fits = 0;
};

/// Recursive feature elimination with a linear SVM on standardized columns.
/// Each round removes the `step` columns with the smallest |w| (the later
/// column on ties) until `d` remain.
inline RfeResult rfe_linear_svm(const Eigen::MatrixXd& Z, std::span<const int> labels, std::size_t d, double C,
                                std::size_t step = 1, const svm::SmoConfig& smo = {}) {
  const auto p = static_cast<std::size_t>(Z.cols());
  if (d < 1 || d > p) throw Error(ErrorCode::InvalidConfig, "RFE target must lie in [1, feature count]");
  const Eigen::VectorXd y = svm::to_signs(labels);
  if ((y.array() > 0).all() || (y.array() < 0).all())
    throw Error(ErrorCode::DegenerateData, "RFE needs both classes present");
  RfeResult out;
  out.ranking.assign(p, 1);
  std::vector<std::size_t> active(p);
  for (std::size_t j = 0; j < p; ++j) active[j] = j;
  Eigen::MatrixXd K = Z * Z.transpose();
  Eigen::VectorXd alpha;
  std::vector<std::vector<std::size_t>> eliminated_by_round;
  while (active.size() > d) {
    const auto sol = svm::solve_dual(K, y, C, smo, alpha.size() ? &alpha : nullptr);
    if (!sol.converged) ++out.nonconverged_fits;
    alpha = sol.alpha;
    const Eigen::VectorXd ya = y.cwiseProduct(alpha);
    std::vector<std::pair<double, std::size_t>> w;
    w.reserve(active.size());
    for (std::size_t k = 0; k < active.size(); ++k)
      w.emplace_back(std::abs(Z.col(static_cast<Eigen::Index>(active[k])).dot(ya)), k);
    std::stable_sort(w.begin(), w.end(), [](const auto& a, const auto& b) {
      return a.first < b.first || (a.first == b.first && a.second > b.second);
    });
    const std::size_t remove = std::min(step, active.size() - d);
    std::vector<std::size_t> gone;
    for (std::size_t r = 0; r < remove; ++r) gone.push_back(w[r].second);
    std::sort(gone.rbegin(), gone.rend());
    std::vector<std::size_t> removed_cols;
    for (auto k : gone) {
      const auto col = static_cast<Eigen::Index>(active[k]);
      K.noalias() -= Z.col(col) * Z.col(col).transpose();
      removed_cols.push_back(active[k]);
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(k));
    }
    eliminated_by_round.push_back(removed_cols);
  }
  for (std::size_t r = 0; r < eliminated_by_round.size(); ++r)
    for (auto c : eliminated_by_round[r]) out.ranking[c] = 1 + eliminated_by_round.size() - r;
  out.selected = active;
  return out;
}

/// Contiguous stratified folds: each label's rows, in order, are cut into
/// `k` consecutive chunks and fold f takes chunk f of every label.
inline std::vector<int> contiguous_folds(std::span<const int> labels, std::size_t k) {
  std::vector<int> fold(labels.size(), 0);
  std::map<int, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);
  for (const auto& [_, idx] : by_label)
    for (std::size_t r = 0; r < idx.size(); ++r) fold[idx[r]] = static_cast<int>(r * k / idx.size());
  return fold;
}

struct GridScore {
  double accuracy = 0;
  double c2 = 0, gamma = 0;
};

/// Best mean cross-validated accuracy of an RBF SVM over the C2 x gamma grid.
/// Ties go to the smaller C2, then the smaller gamma.
inline GridScore rbf_grid_cv(const Eigen::MatrixXd& Z, std::span<const int> labels, std::size_t k,
                             const std::vector<double>& c2_grid, const std::vector<double>& gamma_grid,
                             const svm::SmoConfig& smo = {}) {
  const auto fold = contiguous_folds(labels, k);
  std::vector<double> correct(c2_grid.size() * gamma_grid.size(), 0.0);
  std::size_t total = 0;
  for (std::size_t f = 0; f < k; ++f) {
    std::vector<Eigen::Index> tr, te;
    for (std::size_t i = 0; i < labels.size(); ++i) (fold[i] == static_cast<int>(f) ? te : tr).push_back(static_cast<Eigen::Index>(i));
    if (te.empty()) continue;
    std::vector<int> ytr_l;
    for (auto i : tr) ytr_l.push_back(labels[static_cast<std::size_t>(i)]);
    const Eigen::VectorXd ytr = svm::to_signs(ytr_l);
    if ((ytr.array() > 0).all() || (ytr.array() < 0).all()) continue;
    const Eigen::MatrixXd Ztr = Z(tr, Eigen::all), Zte = Z(te, Eigen::all);
    const Eigen::MatrixXd D = svm::squared_distances(Ztr);
    const Eigen::MatrixXd Dx = svm::cross_squared_distances(Zte, Ztr);
    total += te.size();
    for (std::size_t g = 0; g < gamma_grid.size(); ++g) {
      const Eigen::MatrixXd K = svm::rbf_from_distances(D, gamma_grid[g]);
      const Eigen::MatrixXd Kx = svm::rbf_from_distances(Dx, gamma_grid[g]);
      for (std::size_t c = 0; c < c2_grid.size(); ++c) {
        const auto sol = svm::solve_dual(K, ytr, c2_grid[c], smo);
        const Eigen::VectorXd f_te = (Kx * ytr.cwiseProduct(sol.alpha)).array() + sol.bias;
        for (std::size_t r = 0; r < te.size(); ++r) {
          const int pred = static_cast<int>(svm::label_from_margin(f_te(static_cast<Eigen::Index>(r))));
          if (pred == labels[static_cast<std::size_t>(te[r])]) correct[c * gamma_grid.size() + g] += 1;
        }
      }
    }
  }
  GridScore best{-1, 0, 0};
  for (std::size_t c = 0; c < c2_grid.size(); ++c)
    for (std::size_t g = 0; g < gamma_grid.size(); ++g) {
      const double acc = total ? correct[c * gamma_grid.size() + g] / static_cast<double>(total) : 0.0;
      if (acc > best.accuracy) best = {acc, c2_grid[c], gamma_grid[g]};
    }
  return best;
}

struct SubjectSelection {
  std::string subject_id;
  std::vector<double> c1_scores;                    // per C1: best grid accuracy
  std::vector<std::vector<std::string>> c1_sets;    // per C1: surviving names
  std::vector<std::vector<std::size_t>> c1_ranks;   // per C1: ranking aligned to PCF survivors
  std::vector<GridScore> c1_best;
  std::size_t chosen_c1_index = 0;
  std::vector<std::string> chosen;
};

struct ConsensusEntry {
  std::string name;
  std::size_t count = 0;
  double frequency = 0;
};

/// Features picked by at least `cutoff` of the subject sets, most frequent
/// first, then by name.
inline std::vector<ConsensusEntry> consensus_features(const std::vector<std::vector<std::string>>& sets,
                                                      double cutoff = 0.5) {
  if (sets.empty()) throw Error(ErrorCode::InvalidConfig, "consensus needs at least one subject set");
  std::map<std::string, std::size_t> count;
  for (const auto& s : sets) {
    std::vector<std::string> uniq(s.begin(), s.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (const auto& n : uniq) ++count[n];
  }
  std::vector<ConsensusEntry> out;
  const double total = static_cast<double>(sets.size());
  for (const auto& [n, c] : count) {
    const double f = static_cast<double>(c) / total;
    if (f >= cutoff - 1e-12) out.push_back({n, c, f});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.count > b.count || (a.count == b.count && a.name < b.name);
  });
  return out;
}

struct SelectionResult {
  std::vector<std::string> pcf_survivors;
  std::vector<SubjectSelection> subjects;
  std::vector<ConsensusEntry> consensus;
  std::size_t nonconverged_fits = 0;

  std::vector<std::string> consensus_names() const {
    std::vector<std::string> out;
    for (const auto& c : consensus) out.push_back(c.name);
    return out;
  }
};

/// Per-subject selection: z-score on the subject's rows, RFE to d for every
/// C1, score each set with the RBF grid under within-subject CV, keep the
/// argmax (ties to the smaller C1).
inline SubjectSelection select_for_subject(const Eigen::MatrixXd& X, std::span<const int> labels,
                                           const std::vector<std::string>& names, const std::string& subject,
                                           const SelectionConfig& cfg, std::size_t* nonconverged = nullptr) {
  SubjectSelection s;
  s.subject_id = subject;
  const Eigen::MatrixXd Z = svm::Standardizer::fit(X).apply(X);
  const std::size_t d = std::min(cfg.target_count, static_cast<std::size_t>(X.cols()));
  double best = -1;
  for (std::size_t c = 0; c < cfg.c1_grid.size(); ++c) {
    const auto rfe = rfe_linear_svm(Z, labels, d, cfg.c1_grid[c], cfg.rfe_step);
    if (nonconverged) *nonconverged += rfe.nonconverged_fits;
    std::vector<std::string> set;
    std::vector<Eigen::Index> cols;
    for (auto j : rfe.selected) {
      set.push_back(names[j]);
      cols.push_back(static_cast<Eigen::Index>(j));
    }
    const Eigen::MatrixXd Zs = Z(Eigen::all, cols);
    const auto score = rbf_grid_cv(Zs, labels, cfg.cv_folds, cfg.c2_grid, cfg.gamma_grid);
    s.c1_scores.push_back(score.accuracy);
    s.c1_best.push_back(score);
    s.c1_sets.push_back(set);
    s.c1_ranks.push_back(rfe.ranking);
    if (score.accuracy > best) {
      best = score.accuracy;
      s.chosen_c1_index = c;
      s.chosen = set;
    }
  }
  return s;
}

/// Full selection over a feature table: PCF on all rows, per-subject RFE and
/// evaluation, then cross-subject consensus.
inline SelectionResult select_features(const features::FeatureTable& table, const SelectionConfig& cfg = {}) {
  std::vector<std::string> candidates;
  for (const auto& n : table.names)
    if (!(cfg.exclude_aux && features::is_aux_feature(n))) candidates.push_back(n);
  const auto sub = table.select_columns(candidates);
  SelectionResult out;
  const auto kept = pearson_filter(sub.values, cfg.pearson_threshold);
  std::vector<Eigen::Index> cols;
  for (auto j : kept) {
    out.pcf_survivors.push_back(sub.names[j]);
    cols.push_back(static_cast<Eigen::Index>(j));
  }
  cfg.validate(std::max(out.pcf_survivors.size(), cfg.target_count));  // d is clamped to the survivors
  const Eigen::MatrixXd P = sub.values(Eigen::all, cols);

  std::vector<std::vector<std::string>> sets;
  for (const auto& subject : table.subject_ids()) {
    std::vector<Eigen::Index> rows;
    std::vector<int> y;
    for (std::size_t i = 0; i < table.rows(); ++i)
      if (table.subjects[i] == subject) {
        rows.push_back(static_cast<Eigen::Index>(i));
        y.push_back(table.labels[i]);
      }
    if (std::count(y.begin(), y.end(), 0) == 0 || std::count(y.begin(), y.end(), 1) == 0) continue;
    const Eigen::MatrixXd Xs = P(rows, Eigen::all);
    out.subjects.push_back(select_for_subject(Xs, y, out.pcf_survivors, subject, cfg, &out.nonconverged_fits));
    sets.push_back(out.subjects.back().chosen);
  }
  if (sets.empty()) throw Error(ErrorCode::DegenerateData, "no subject has both classes");
  out.consensus = consensus_features(sets, cfg.consensus_cutoff);
  return out;
}

inline nlohmann::json to_json(const SelectionResult& r, const SelectionConfig& cfg) {
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& s : r.subjects) {
    nlohmann::json per_c1 = nlohmann::json::array();
    for (std::size_t c = 0; c < s.c1_sets.size(); ++c)
      per_c1.push_back({{"C1", cfg.c1_grid[c]},
                        {"cv_accuracy", s.c1_scores[c]},
                        {"best_C2", s.c1_best[c].c2},
                        {"best_gamma", s.c1_best[c].gamma},
                        {"selected", s.c1_sets[c]},
                        {"ranking", s.c1_ranks[c]}});
    subjects.push_back({{"subject_id", s.subject_id},
                        {"chosen_C1", cfg.c1_grid[s.chosen_c1_index]},
                        {"chosen", s.chosen},
                        {"per_C1", per_c1}});
  }
  nlohmann::json consensus = nlohmann::json::array();
  for (const auto& c : r.consensus) consensus.push_back({{"name", c.name}, {"count", c.count}, {"frequency", c.frequency}});
  return {{"config",
           {{"pearson_threshold", cfg.pearson_threshold},
            {"target_count", cfg.target_count},
            {"C1_grid", cfg.c1_grid},
            {"C2_grid", cfg.c2_grid},
            {"gamma_grid", cfg.gamma_grid},
            {"cv_folds", cfg.cv_folds},
            {"rfe_step", cfg.rfe_step},
            {"consensus_cutoff", cfg.consensus_cutoff},
            {"exclude_aux", cfg.exclude_aux}}},
          {"pcf_survivors", r.pcf_survivors},
          {"subjects", subjects},
          {"consensus", consensus},
          {"nonconverged_fits", r.nonconverged_fits}};
}

}  // namespace eegattn::selection
