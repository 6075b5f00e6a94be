#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "error.hpp"
#include "features.hpp"
#include "svm.hpp"

namespace eegattn::learn {

/// Counts with NonAttentive (label 1) as the positive class.
struct Confusion {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;

  void add(int truth, int pred) {
    if (truth == 1) (pred == 1 ? tp : fn) += 1;
    else (pred == 1 ? fp : tn) += 1;
  }
  std::size_t total() const { return tp + fp + fn + tn; }
  Confusion& operator+=(const Confusion& o) {
    tp += o.tp; fp += o.fp; fn += o.fn; tn += o.tn;
    return *this;
  }
};

struct Metrics {
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
};

/// Undefined ratios (no predicted or no actual positives) are reported as 0.
inline Metrics metrics(const Confusion& c) {
  Metrics m;
  const double n = static_cast<double>(c.total());
  m.accuracy = n > 0 ? static_cast<double>(c.tp + c.tn) / n : 0.0;
  m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  return m;
}

/// r_am rule: attentive iff attention / meditation > 1; zero meditation
/// counts as an infinite ratio.
inline Label ratio_baseline(double attention, double meditation) {
  if (meditation == 0.0) return Label::Attentive;
  return attention / meditation > 1.0 ? Label::Attentive : Label::NonAttentive;
}

struct HyperPair {
  double c2 = 0, gamma = 0;
  bool operator==(const HyperPair&) const = default;
  bool operator<(const HyperPair& o) const { return c2 < o.c2 || (c2 == o.c2 && gamma < o.gamma); }
};

struct LosoConfig {
  std::vector<double> c2_grid{0.01, 0.1, 1, 10, 100};
  std::vector<double> gamma_grid{0.001, 0.01, 0.1, 0.5, 1, 10};
  svm::SmoConfig smo;

  void normalize() {
    std::sort(c2_grid.begin(), c2_grid.end());
    std::sort(gamma_grid.begin(), gamma_grid.end());
    if (c2_grid.empty() || gamma_grid.empty()) throw Error(ErrorCode::InvalidConfig, "LOSO grids must be non-empty");
  }
};

struct FoldReport {
  std::string subject_id;
  std::size_t n_test = 0;
  HyperPair best;                  // best held-out accuracy on this fold
  double best_accuracy = 0;
  Confusion confusion;             // at the reported pair
  Metrics metrics;
  std::vector<Confusion> grid;     // c2-major over the grid
  std::vector<int> predictions;    // at the reported pair, in test-row order
  std::vector<std::size_t> test_rows;
};

struct LosoReport {
  std::vector<std::string> features;
  LosoConfig config;
  std::vector<FoldReport> folds;
  HyperPair modal;
  std::size_t modal_count = 0;
  HyperPair best_mean;
  double best_mean_accuracy = 0;
  Metrics mean;  // average of per-fold metrics at the modal pair
  std::vector<std::string> nonconverged;

  double mean_accuracy() const { return mean.accuracy; }
};

namespace detail {

inline std::vector<int> predict_rows(const Eigen::MatrixXd& Kx, const Eigen::VectorXd& y, const svm::DualSolution& s) {
  const Eigen::VectorXd f = (Kx * y.cwiseProduct(s.alpha)).array() + s.bias;
  std::vector<int> out(static_cast<std::size_t>(f.size()));
  for (Eigen::Index r = 0; r < f.size(); ++r) out[static_cast<std::size_t>(r)] = static_cast<int>(svm::label_from_margin(f(r)));
  return out;
}

inline std::string pair_tag(double c2, double g) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "C2=%g,gamma=%g", c2, g);
  return buf;
}

}  // namespace detail

/// Held-out index sets, one per subject in first-appearance order.
inline std::vector<std::pair<std::string, std::vector<std::size_t>>> loso_partition(const std::vector<std::string>& subjects) {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> out;
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    auto [it, fresh] = pos.emplace(subjects[i], out.size());
    if (fresh) out.push_back({subjects[i], {}});
    out[it->second].second.push_back(i);
  }
  return out;
}

/// Leave-one-subject-out over the C2 x gamma grid. Standardization is fitted
/// on each training fold. Each fold records its best pair (ties to smaller C2,
/// then smaller gamma); the modal pair across folds is the final choice and
/// the headline metrics are the per-fold metrics at that pair.
inline LosoReport grid_search_loso(const features::FeatureTable& table, LosoConfig cfg = {}) {
  cfg.normalize();
  const auto parts = loso_partition(table.subjects);
  if (parts.size() < 2) throw Error(ErrorCode::InvalidConfig, "LOSO needs at least two subjects");
  const std::size_t G = cfg.c2_grid.size() * cfg.gamma_grid.size();
  LosoReport rep;
  rep.features = table.names;
  rep.config = cfg;
  std::vector<std::vector<std::vector<int>>> preds;  // fold -> grid -> predictions
  for (const auto& [subject, test] : parts) {
    std::vector<Eigen::Index> tr, te;
    std::vector<int> ytr_l, yte;
    std::vector<bool> is_test(table.rows(), false);
    for (auto i : test) is_test[i] = true;
    for (std::size_t i = 0; i < table.rows(); ++i) {
      if (is_test[i]) {
        te.push_back(static_cast<Eigen::Index>(i));
        yte.push_back(table.labels[i]);
      } else {
        tr.push_back(static_cast<Eigen::Index>(i));
        ytr_l.push_back(table.labels[i]);
      }
    }
    if (std::count(ytr_l.begin(), ytr_l.end(), 0) == 0 || std::count(ytr_l.begin(), ytr_l.end(), 1) == 0)
      throw Error(ErrorCode::DegenerateFold, "training split without subject " + subject + " lacks a class");
    const Eigen::MatrixXd Xtr = table.values(tr, Eigen::all);
    const auto st = svm::Standardizer::fit(Xtr);
    const Eigen::MatrixXd Ztr = st.apply(Xtr);
    const Eigen::MatrixXd Zte = st.apply(table.values(te, Eigen::all));
    const Eigen::VectorXd ytr = svm::to_signs(ytr_l);
    const Eigen::MatrixXd D = svm::squared_distances(Ztr);
    const Eigen::MatrixXd Dx = svm::cross_squared_distances(Zte, Ztr);

    FoldReport fr;
    fr.subject_id = subject;
    fr.n_test = te.size();
    fr.test_rows = test;
    fr.grid.assign(G, {});
    std::vector<std::vector<int>> fold_preds(G);
    for (std::size_t g = 0; g < cfg.gamma_grid.size(); ++g) {
      const Eigen::MatrixXd K = svm::rbf_from_distances(D, cfg.gamma_grid[g]);
      const Eigen::MatrixXd Kx = svm::rbf_from_distances(Dx, cfg.gamma_grid[g]);
      Eigen::VectorXd warm;
      for (std::size_t c = 0; c < cfg.c2_grid.size(); ++c) {
        const auto sol = svm::solve_dual(K, ytr, cfg.c2_grid[c], cfg.smo, warm.size() ? &warm : nullptr);
        warm = sol.alpha;
        if (!sol.converged)
          rep.nonconverged.push_back(subject + ":" + detail::pair_tag(cfg.c2_grid[c], cfg.gamma_grid[g]));
        const std::size_t k = c * cfg.gamma_grid.size() + g;
        fold_preds[k] = detail::predict_rows(Kx, ytr, sol);
        for (std::size_t r = 0; r < yte.size(); ++r) fr.grid[k].add(yte[r], fold_preds[k][r]);
      }
    }
    fr.best_accuracy = -1;
    for (std::size_t c = 0; c < cfg.c2_grid.size(); ++c)
      for (std::size_t g = 0; g < cfg.gamma_grid.size(); ++g) {
        const double acc = metrics(fr.grid[c * cfg.gamma_grid.size() + g]).accuracy;
        if (acc > fr.best_accuracy) {
          fr.best_accuracy = acc;
          fr.best = {cfg.c2_grid[c], cfg.gamma_grid[g]};
        }
      }
    rep.folds.push_back(std::move(fr));
    preds.push_back(std::move(fold_preds));
  }

  std::map<HyperPair, std::size_t> votes;
  for (const auto& f : rep.folds) ++votes[f.best];
  for (const auto& [pair, n] : votes)  // map order gives the smaller-C2, smaller-gamma tie break
    if (n > rep.modal_count) {
      rep.modal = pair;
      rep.modal_count = n;
    }

  auto grid_index = [&](const HyperPair& p) {
    const auto c = static_cast<std::size_t>(std::find(cfg.c2_grid.begin(), cfg.c2_grid.end(), p.c2) - cfg.c2_grid.begin());
    const auto g = static_cast<std::size_t>(std::find(cfg.gamma_grid.begin(), cfg.gamma_grid.end(), p.gamma) - cfg.gamma_grid.begin());
    return c * cfg.gamma_grid.size() + g;
  };
  rep.best_mean_accuracy = -1;
  for (std::size_t c = 0; c < cfg.c2_grid.size(); ++c)
    for (std::size_t g = 0; g < cfg.gamma_grid.size(); ++g) {
      double acc = 0;
      for (const auto& f : rep.folds) acc += metrics(f.grid[c * cfg.gamma_grid.size() + g]).accuracy;
      acc /= static_cast<double>(rep.folds.size());
      if (acc > rep.best_mean_accuracy) {
        rep.best_mean_accuracy = acc;
        rep.best_mean = {cfg.c2_grid[c], cfg.gamma_grid[g]};
      }
    }

  const std::size_t mk = grid_index(rep.modal);
  for (std::size_t f = 0; f < rep.folds.size(); ++f) {
    auto& fr = rep.folds[f];
    fr.confusion = fr.grid[mk];
    fr.metrics = metrics(fr.confusion);
    fr.predictions = preds[f][mk];
    rep.mean.accuracy += fr.metrics.accuracy;
    rep.mean.precision += fr.metrics.precision;
    rep.mean.recall += fr.metrics.recall;
    rep.mean.f1 += fr.metrics.f1;
  }
  const double nf = static_cast<double>(rep.folds.size());
  rep.mean.accuracy /= nf;
  rep.mean.precision /= nf;
  rep.mean.recall /= nf;
  rep.mean.f1 /= nf;
  return rep;
}

/// LOSO at one fixed hyperparameter pair; used by the ablation rows.
inline LosoReport loso_fixed(const features::FeatureTable& table, HyperPair pair, const svm::SmoConfig& smo = {}) {
  LosoConfig cfg;
  cfg.c2_grid = {pair.c2};
  cfg.gamma_grid = {pair.gamma};
  cfg.smo = smo;
  return grid_search_loso(table, cfg);
}

/// Final model on all rows with the given pair.
inline svm::SvmModel train_final(const features::FeatureTable& table, HyperPair pair, const svm::SmoConfig& smo = {}) {
  return svm::train_svm(table.values, table.labels, svm::Kernel::rbf(pair.gamma), pair.c2, table.names, smo);
}

inline nlohmann::json metrics_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

inline nlohmann::json confusion_json(const Confusion& c) {
  return {{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}, {"tn", c.tn}};
}

inline nlohmann::json to_json(const LosoReport& r) {
  nlohmann::json folds = nlohmann::json::array();
  for (const auto& f : r.folds) {
    nlohmann::json grid = nlohmann::json::array();
    for (std::size_t c = 0; c < r.config.c2_grid.size(); ++c)
      for (std::size_t g = 0; g < r.config.gamma_grid.size(); ++g)
        grid.push_back({{"C2", r.config.c2_grid[c]},
                        {"gamma", r.config.gamma_grid[g]},
                        {"accuracy", metrics(f.grid[c * r.config.gamma_grid.size() + g]).accuracy}});
    folds.push_back({{"subject_id", f.subject_id},
                     {"n_test", f.n_test},
                     {"best_C2", f.best.c2},
                     {"best_gamma", f.best.gamma},
                     {"best_accuracy", f.best_accuracy},
                     {"confusion", confusion_json(f.confusion)},
                     {"metrics", metrics_json(f.metrics)},
                     {"grid", grid}});
  }
  return {{"features", r.features},
          {"C2_grid", r.config.c2_grid},
          {"gamma_grid", r.config.gamma_grid},
          {"selection_mode", "modal"},
          {"modal_pair", {{"C2", r.modal.c2}, {"gamma", r.modal.gamma}, {"folds", r.modal_count}}},
          {"best_mean_pair", {{"C2", r.best_mean.c2}, {"gamma", r.best_mean.gamma}, {"accuracy", r.best_mean_accuracy}}},
          {"mean", metrics_json(r.mean)},
          {"folds", folds},
          {"nonconverged", r.nonconverged}};
}

/// Per-fold table: one row per held-out subject plus the mean.
inline std::string format_loso_table(const LosoReport& r) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "LOSO at C2=%g gamma=%g (modal over %zu/%zu folds)\n", r.modal.c2, r.modal.gamma,
                r.modal_count, r.folds.size());
  out += buf;
  std::snprintf(buf, sizeof buf, "%-12s %6s %9s %9s %9s %9s %14s\n", "subject", "n", "accuracy", "precision", "recall",
                "f1", "fold-best");
  out += buf;
  for (const auto& f : r.folds) {
    std::snprintf(buf, sizeof buf, "%-12s %6zu %9.4f %9.4f %9.4f %9.4f %6g/%-7g\n", f.subject_id.c_str(), f.n_test,
                  f.metrics.accuracy, f.metrics.precision, f.metrics.recall, f.metrics.f1, f.best.c2, f.best.gamma);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-12s %6s %9.4f %9.4f %9.4f %9.4f\n", "mean", "", r.mean.accuracy, r.mean.precision,
                r.mean.recall, r.mean.f1);
  out += buf;
  std::snprintf(buf, sizeof buf, "best mean pair: C2=%g gamma=%g accuracy=%.4f\n", r.best_mean.c2, r.best_mean.gamma,
                r.best_mean_accuracy);
  out += buf;
  return out;
}

struct AblationRow {
  std::string name;
  bool available = true;
  std::string note;
  std::vector<std::string> features;
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0;
};

struct AblationConfig {
  HyperPair pair{0.01, 0.5};
  bool grid_search_each = false;  // rerun the full grid per row instead of the fixed pair
  LosoConfig loso;
};

inline AblationRow ablation_svm_row(const std::string& name, const features::FeatureTable& table,
                                    const std::vector<std::string>& cols, const AblationConfig& cfg) {
  AblationRow row;
  row.name = name;
  row.features = cols;
  if (cols.empty()) {
    row.available = false;
    row.note = "no features";
    return row;
  }
  const auto sub = table.select_columns(cols);
  const auto rep = cfg.grid_search_each ? grid_search_loso(sub, cfg.loso) : loso_fixed(sub, cfg.pair, cfg.loso.smo);
  for (const auto& f : rep.folds) row.fold_accuracy.push_back(f.metrics.accuracy);
  row.mean_accuracy = rep.mean.accuracy;
  return row;
}

/// Four configurations under identical subject folds: computed features only,
/// the attention/meditation ratio rule, an SVM on the two scores, and the
/// full selected set. Rows needing the scores are Unavailable when the table
/// has no attention/meditation columns.
inline std::vector<AblationRow> ablation_suite(const features::FeatureTable& table, const std::vector<std::string>& selected,
                                               const AblationConfig& cfg = {}) {
  std::vector<AblationRow> rows;
  std::vector<std::string> computed;
  for (const auto& n : selected)
    if (!features::is_aux_feature(n)) computed.push_back(n);
  rows.push_back(ablation_svm_row("computed_features_only", table, computed, cfg));

  const auto att = table.column("attention"), med = table.column("meditation");
  const bool have_scores = att.has_value() && med.has_value();
  AblationRow ratio;
  ratio.name = "ratio_baseline";
  ratio.features = {"attention", "meditation"};
  if (!have_scores) {
    ratio.available = false;
    ratio.note = "Unavailable: dataset has no attention/meditation scores";
  } else {
    for (const auto& [subject, idx] : loso_partition(table.subjects)) {
      Confusion c;
      for (auto i : idx) {
        const auto r = static_cast<Eigen::Index>(i);
        c.add(table.labels[i], static_cast<int>(ratio_baseline(table.values(r, static_cast<Eigen::Index>(*att)),
                                                               table.values(r, static_cast<Eigen::Index>(*med)))));
      }
      ratio.fold_accuracy.push_back(metrics(c).accuracy);
    }
    double s = 0;
    for (double a : ratio.fold_accuracy) s += a;
    ratio.mean_accuracy = s / static_cast<double>(ratio.fold_accuracy.size());
  }
  rows.push_back(ratio);

  if (have_scores) {
    rows.push_back(ablation_svm_row("scores_only_svm", table, {"attention", "meditation"}, cfg));
  } else {
    AblationRow r;
    r.name = "scores_only_svm";
    r.available = false;
    r.note = "Unavailable: dataset has no attention/meditation scores";
    r.features = {"attention", "meditation"};
    rows.push_back(r);
  }

  bool selected_needs_scores = false;
  for (const auto& n : selected)
    if (features::is_aux_feature(n) && !table.column(n)) selected_needs_scores = true;
  if (selected_needs_scores) {
    AblationRow r;
    r.name = "full_feature_set";
    r.available = false;
    r.note = "Unavailable: selected set uses auxiliary channels the dataset lacks";
    r.features = selected;
    rows.push_back(r);
  } else {
    rows.push_back(ablation_svm_row("full_feature_set", table, selected, cfg));
  }
  return rows;
}

inline nlohmann::json to_json(const std::vector<AblationRow>& rows, const AblationConfig& cfg) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& r : rows)
    a.push_back({{"name", r.name},
                 {"available", r.available},
                 {"note", r.note},
                 {"features", r.features},
                 {"fold_accuracy", r.fold_accuracy},
                 {"mean_accuracy", r.available ? nlohmann::json(r.mean_accuracy) : nlohmann::json(nullptr)}});
  return {{"pair", {{"C2", cfg.pair.c2}, {"gamma", cfg.pair.gamma}}}, {"grid_search_each", cfg.grid_search_each}, {"rows", a}};
}

inline std::string format_ablation_table(const std::vector<AblationRow>& rows) {
  std::string out = "Model                      Accuracy\n";
  char buf[128];
  for (const auto& r : rows) {
    if (r.available) std::snprintf(buf, sizeof buf, "%-26s %7.2f%%\n", r.name.c_str(), 100.0 * r.mean_accuracy);
    else std::snprintf(buf, sizeof buf, "%-26s %s\n", r.name.c_str(), "Unavailable");
    out += buf;
  }
  return out;
}

}  // namespace eegattn::learn
