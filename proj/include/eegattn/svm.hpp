#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "error.hpp"

namespace eegattn::svm {

enum class KernelKind { Linear, Rbf };

struct Kernel {
  KernelKind kind = KernelKind::Rbf;
  double gamma = 0.5;

  static Kernel linear() { return {KernelKind::Linear, 0.0}; }
  static Kernel rbf(double g) { return {KernelKind::Rbf, g}; }

  template <class A, class B>
  double operator()(const A& a, const B& b) const {
    if (kind == KernelKind::Linear) return a.dot(b);
    return std::exp(-gamma * (a - b).squaredNorm());
  }
};

/// Squared Euclidean distances between all rows of X.
inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X) {
  const Eigen::VectorXd sq = X.rowwise().squaredNorm();
  Eigen::MatrixXd D = -2.0 * X * X.transpose();
  D.colwise() += sq;
  D.rowwise() += sq.transpose();
  return D.cwiseMax(0.0);
}

/// Squared distances between rows of A (result rows) and rows of B.
inline Eigen::MatrixXd cross_squared_distances(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd D = -2.0 * A * B.transpose();
  D.colwise() += A.rowwise().squaredNorm();
  D.rowwise() += B.rowwise().squaredNorm().transpose();
  return D.cwiseMax(0.0);
}

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& X, const Kernel& k) {
  if (k.kind == KernelKind::Linear) return X * X.transpose();
  return (-k.gamma * squared_distances(X)).array().exp().matrix();
}

inline Eigen::MatrixXd rbf_from_distances(const Eigen::MatrixXd& D, double gamma) {
  return (-gamma * D).array().exp().matrix();
}

/// Class labels as the solver sees them: NonAttentive -> +1, Attentive -> -1.
inline double to_sign(int label) { return label == static_cast<int>(Label::NonAttentive) ? 1.0 : -1.0; }

inline Eigen::VectorXd to_signs(std::span<const int> labels) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = to_sign(labels[i]);
  return y;
}

struct SmoConfig {
  double tolerance = 1e-3;      // KKT violation gap m(a) - M(a)
  std::size_t max_iter_per_sample = 10;
  std::size_t min_iterations = 100000;
  bool throw_on_nonconvergence = false;
};

struct DualSolution {
  Eigen::VectorXd alpha;
  double bias = 0;
  double objective = 0;  // 0.5 a'Qa - sum(a)
  std::size_t iterations = 0;
  bool converged = false;
};

/// Soft-margin SVM dual
///   min 0.5 a'Qa - e'a,  Q_ij = y_i y_j K_ij,  0 <= a <= C,  y'a = 0
/// by sequential minimal optimization over a precomputed Gram matrix.
/// The first index is the maximal KKT violator; the second maximizes the
/// second-order objective decrease among violating partners.
inline DualSolution solve_dual(const Eigen::MatrixXd& K, const Eigen::VectorXd& y, double C, const SmoConfig& cfg = {},
                               const Eigen::VectorXd* warm_start = nullptr) {
  const Eigen::Index n = y.size();
  if (K.rows() != n || K.cols() != n) throw Error(ErrorCode::InvalidConfig, "Gram matrix does not match label count");
  if (!(C > 0)) throw Error(ErrorCode::InvalidConfig, "C must be positive");
  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < n; ++i) (y(i) > 0 ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg) throw Error(ErrorCode::DegenerateData, "SVM training needs both classes");

  constexpr double tau = 1e-12;
  DualSolution s;
  s.alpha = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd G = -Eigen::VectorXd::Ones(n);  // gradient Qa - e
  if (warm_start && warm_start->size() == n) {
    s.alpha = warm_start->cwiseMax(0.0).cwiseMin(C);
    // Restore y'a = 0 if clipping broke it: shrink the heavier side.
    double bal = y.dot(s.alpha);
    for (Eigen::Index i = 0; i < n && std::abs(bal) > 1e-12; ++i) {
      if (y(i) * bal > 0 && s.alpha(i) > 0) {
        const double take = std::min(s.alpha(i), std::abs(bal));
        s.alpha(i) -= take;
        bal -= y(i) * take;
      }
    }
    const Eigen::VectorXd ya = y.cwiseProduct(s.alpha);
    G = y.cwiseProduct(K * ya) - Eigen::VectorXd::Ones(n);
  }

  auto in_up = [&](Eigen::Index t) { return (y(t) > 0 && s.alpha(t) < C) || (y(t) < 0 && s.alpha(t) > 0); };
  auto in_low = [&](Eigen::Index t) { return (y(t) > 0 && s.alpha(t) > 0) || (y(t) < 0 && s.alpha(t) < C); };

  const std::size_t max_iter = std::max(cfg.min_iterations, cfg.max_iter_per_sample * static_cast<std::size_t>(n));
  for (;;) {
    double gmax = -std::numeric_limits<double>::infinity(), gmin = std::numeric_limits<double>::infinity();
    Eigen::Index i = -1;
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = -y(t) * G(t);
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) gmin = v;
    }
    if (i < 0 || gmax - gmin < cfg.tolerance) {
      s.converged = true;
      break;
    }
    if (s.iterations >= max_iter) break;

    Eigen::Index j = -1;
    double best = std::numeric_limits<double>::infinity();
    const double Kii = K(i, i);
    for (Eigen::Index t = 0; t < n; ++t) {
      if (!in_low(t)) continue;
      const double b = gmax + y(t) * G(t);
      if (b <= 0) continue;
      double a = Kii + K(t, t) - 2.0 * K(i, t);
      if (a <= 0) a = tau;
      const double obj = -(b * b) / a;
      if (obj < best) {
        best = obj;
        j = t;
      }
    }
    if (j < 0) {
      s.converged = true;
      break;
    }
    ++s.iterations;

    // Two-variable analytic step (LIBSVM form).
    const double ai_old = s.alpha(i), aj_old = s.alpha(j);
    const double Kij = K(i, j), Kjj = K(j, j);
    double quad = Kii + Kjj - 2.0 * Kij;
    if (quad <= 0) quad = tau;
    double ai = ai_old, aj = aj_old;
    if (y(i) != y(j)) {
      const double delta = (-G(i) - G(j)) / quad;
      const double diff = ai_old - aj_old;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else {
        if (ai < 0) { ai = 0; aj = -diff; }
      }
      if (diff > 0) {
        if (ai > C) { ai = C; aj = C - diff; }
      } else {
        if (aj > C) { aj = C; ai = C + diff; }
      }
    } else {
      const double delta = (G(i) - G(j)) / quad;
      const double sum = ai_old + aj_old;
      ai -= delta;
      aj += delta;
      if (sum > C) {
        if (ai > C) { ai = C; aj = sum - C; }
      } else {
        if (aj < 0) { aj = 0; ai = sum; }
      }
      if (sum > C) {
        if (aj > C) { aj = C; ai = sum - C; }
      } else {
        if (ai < 0) { ai = 0; aj = sum; }
      }
    }
    const double di = ai - ai_old, dj = aj - aj_old;
    s.alpha(i) = ai;
    s.alpha(j) = aj;
    // G_t += Q_ti di + Q_tj dj
    G.noalias() += (y(i) * di) * y.cwiseProduct(K.col(i)) + (y(j) * dj) * y.cwiseProduct(K.col(j));
  }

  if (!s.converged && cfg.throw_on_nonconvergence)
    throw Error(ErrorCode::NonConvergence, "SMO did not reach the KKT tolerance in " + std::to_string(s.iterations) +
                                               " iterations");

  // b = -rho, rho = mean of y_t G_t over free vectors, else midpoint of the bounds.
  double sum_free = 0, ub = std::numeric_limits<double>::infinity(), lb = -ub;
  std::size_t free = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    const double yg = y(t) * G(t);
    if (s.alpha(t) > 0 && s.alpha(t) < C) {
      sum_free += yg;
      ++free;
    } else if ((s.alpha(t) >= C && y(t) < 0) || (s.alpha(t) <= 0 && y(t) > 0)) {
      ub = std::min(ub, yg);
    } else {
      lb = std::max(lb, yg);
    }
  }
  double rho = 0;
  if (free > 0) rho = sum_free / static_cast<double>(free);
  else if (std::isfinite(ub) && std::isfinite(lb)) rho = (ub + lb) / 2;
  else rho = std::isfinite(ub) ? ub : lb;
  s.bias = -rho;
  // Qa = G + e
  s.objective = 0.5 * s.alpha.dot(G + Eigen::VectorXd::Ones(n)) - s.alpha.sum();
  return s;
}

/// Per-feature z-scoring with population statistics; zero spread maps to 1.
struct Standardizer {
  Eigen::RowVectorXd mean, scale;

  static Standardizer fit(const Eigen::MatrixXd& X) {
    Standardizer s;
    const double n = static_cast<double>(X.rows());
    s.mean = X.colwise().mean();
    s.scale.resize(X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      const double var = (X.col(j).array() - s.mean(j)).square().sum() / n;
      const double sd = std::sqrt(var);
      s.scale(j) = sd > 0 && std::isfinite(sd) ? sd : 1.0;
    }
    return s;
  }

  Eigen::MatrixXd apply(const Eigen::MatrixXd& X) const {
    return (X.rowwise() - mean).array().rowwise() / scale.array();
  }
  Eigen::RowVectorXd apply_row(const Eigen::RowVectorXd& x) const {
    return ((x - mean).array() / scale.array()).matrix();
  }
};

struct SvmModel {
  Kernel kernel;
  double C = 1.0;
  Eigen::MatrixXd support_vectors;  // standardized rows
  Eigen::VectorXd dual_coef;        // alpha_i * y_i
  double bias = 0;
  Standardizer standardizer;
  std::vector<std::string> feature_names;
  std::string manifest_hash;
  bool converged = true;
  std::size_t iterations = 0;
  nlohmann::json metadata = nlohmann::json::object();

  double decision_standardized(const Eigen::RowVectorXd& z) const {
    double f = bias;
    for (Eigen::Index i = 0; i < support_vectors.rows(); ++i)
      f += dual_coef(i) * kernel(support_vectors.row(i), z);
    return f;
  }

  double decision(std::span<const double> x) const {
    if (x.size() != feature_names.size())
      throw Error(ErrorCode::FeatureMismatch, "model expects " + std::to_string(feature_names.size()) +
                                                  " features, got " + std::to_string(x.size()));
    Eigen::RowVectorXd r(static_cast<Eigen::Index>(x.size()));
    for (std::size_t j = 0; j < x.size(); ++j) r(static_cast<Eigen::Index>(j)) = x[j];
    return decision_standardized(standardizer.apply_row(r));
  }

  /// Linear-kernel primal weights in standardized space.
  Eigen::VectorXd linear_weights() const { return support_vectors.transpose() * dual_coef; }
};

struct Prediction {
  Label label = Label::Attentive;
  double margin = 0;
};

/// f >= 0 is the NonAttentive side; the boundary itself counts as NonAttentive.
inline Label label_from_margin(double f) { return f >= 0 ? Label::NonAttentive : Label::Attentive; }

inline Prediction predict(const SvmModel& model, std::span<const double> x) {
  const double f = model.decision(x);
  return {label_from_margin(f), f};
}

/// Assembles a model from a dual solution on already standardized rows.
inline SvmModel assemble(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, const DualSolution& sol, const Kernel& k,
                         double C, Standardizer st, std::vector<std::string> names) {
  SvmModel m;
  m.kernel = k;
  m.C = C;
  m.bias = sol.bias;
  m.standardizer = std::move(st);
  m.feature_names = std::move(names);
  m.converged = sol.converged;
  m.iterations = sol.iterations;
  std::vector<Eigen::Index> sv;
  for (Eigen::Index i = 0; i < sol.alpha.size(); ++i)
    if (sol.alpha(i) > 0) sv.push_back(i);
  m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), Z.cols());
  m.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
  for (std::size_t r = 0; r < sv.size(); ++r) {
    m.support_vectors.row(static_cast<Eigen::Index>(r)) = Z.row(sv[r]);
    m.dual_coef(static_cast<Eigen::Index>(r)) = sol.alpha(sv[r]) * y(sv[r]);
  }
  return m;
}

/// Standardizes X, solves the dual and returns the model. Labels are 0/1.
inline SvmModel train_svm(const Eigen::MatrixXd& X, std::span<const int> labels, const Kernel& k, double C,
                          std::vector<std::string> names = {}, const SmoConfig& cfg = {}) {
  if (static_cast<std::size_t>(X.rows()) != labels.size())
    throw Error(ErrorCode::InvalidConfig, "feature rows and labels differ in count");
  if (names.empty())
    for (Eigen::Index j = 0; j < X.cols(); ++j) names.push_back("f" + std::to_string(j));
  auto st = Standardizer::fit(X);
  const Eigen::MatrixXd Z = st.apply(X);
  const Eigen::VectorXd y = to_signs(labels);
  const auto sol = solve_dual(gram(Z, k), y, C, cfg);
  return assemble(Z, y, sol, k, C, std::move(st), std::move(names));
}

inline nlohmann::json to_json(const SvmModel& m) {
  auto row_list = [](const Eigen::MatrixXd& M) {
    nlohmann::json a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < M.rows(); ++i) {
      std::vector<double> r(static_cast<std::size_t>(M.cols()));
      for (Eigen::Index j = 0; j < M.cols(); ++j) r[static_cast<std::size_t>(j)] = M(i, j);
      a.push_back(r);
    }
    return a;
  };
  auto vec = [](const auto& v) {
    std::vector<double> r(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) r[static_cast<std::size_t>(i)] = v(i);
    return r;
  };
  return {{"kernel", m.kernel.kind == KernelKind::Linear ? "linear" : "rbf"},
          {"gamma", m.kernel.gamma},
          {"C", m.C},
          {"bias", m.bias},
          {"dual_coef", vec(m.dual_coef)},
          {"support_vectors", row_list(m.support_vectors)},
          {"standardization", {{"mean", vec(m.standardizer.mean)}, {"std", vec(m.standardizer.scale)}}},
          {"feature_names", m.feature_names},
          {"manifest_hash", m.manifest_hash},
          {"converged", m.converged},
          {"iterations", m.iterations},
          {"metadata", m.metadata}};
}

inline SvmModel model_from_json(const nlohmann::json& j) {
  SvmModel m;
  const auto kind = j.at("kernel").get<std::string>();
  if (kind != "linear" && kind != "rbf") throw Error(ErrorCode::ParseError, "unknown kernel " + kind);
  m.kernel = {kind == "linear" ? KernelKind::Linear : KernelKind::Rbf, j.at("gamma").get<double>()};
  m.C = j.at("C").get<double>();
  m.bias = j.at("bias").get<double>();
  const auto coef = j.at("dual_coef").get<std::vector<double>>();
  m.dual_coef = Eigen::Map<const Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
  m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  const auto d = static_cast<Eigen::Index>(m.feature_names.size());
  const auto& svs = j.at("support_vectors");
  m.support_vectors.resize(static_cast<Eigen::Index>(svs.size()), d);
  for (std::size_t i = 0; i < svs.size(); ++i) {
    const auto r = svs[i].get<std::vector<double>>();
    if (static_cast<Eigen::Index>(r.size()) != d) throw Error(ErrorCode::ParseError, "support vector width mismatch");
    for (Eigen::Index c = 0; c < d; ++c) m.support_vectors(static_cast<Eigen::Index>(i), c) = r[static_cast<std::size_t>(c)];
  }
  const auto mean = j.at("standardization").at("mean").get<std::vector<double>>();
  const auto sd = j.at("standardization").at("std").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(mean.size()) != d || static_cast<Eigen::Index>(sd.size()) != d)
    throw Error(ErrorCode::ParseError, "standardization width mismatch");
  m.standardizer.mean = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), d);
  m.standardizer.scale = Eigen::Map<const Eigen::RowVectorXd>(sd.data(), d);
  m.manifest_hash = j.value("manifest_hash", "");
  m.converged = j.value("converged", true);
  m.iterations = j.value("iterations", std::size_t{0});
  m.metadata = j.value("metadata", nlohmann::json::object());
  return m;
}

}  // namespace eegattn::svm
