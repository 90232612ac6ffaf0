#include "terradeep/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "terradeep/error.hpp"

namespace terradeep {

void SvmConfig::validate() const {
  if (!(C > 0.0)) throw ParameterError("SVM C must be > 0");
  if (!(tol > 0.0)) throw ParameterError("SVM tol must be > 0");
  if (std::isnan(gamma)) throw ParameterError("SVM gamma is NaN");
  if (max_passes < 1) throw ParameterError("SVM max_passes must be >= 1");
}

double SvmConfig::resolved_gamma(std::size_t feature_count) const {
  if (gamma > 0.0) return gamma;
  if (feature_count == 0) throw ShapeError("SVM needs at least one feature");
  return 1.0 / static_cast<double>(feature_count);
}

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma) {
  if (x.size() != z.size()) {
    throw ShapeError("rbf_kernel: dimension mismatch " + std::to_string(x.size()) + " vs " + std::to_string(z.size()));
  }
  double d2 = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double d = x[k] - z[k];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

namespace {

void check_binary_input(const Tensor& features, std::span<const int> labels) {
  if (features.rank() != 2) throw ShapeError("SVM features must be [n x d], got " + to_string(features.shape()));
  if (features.dim(0) != labels.size()) throw ShapeError("SVM feature / label count mismatch");
  bool pos = false, neg = false;
  for (int y : labels) {
    if (y == 1) {
      pos = true;
    } else if (y == -1) {
      neg = true;
    } else {
      throw LabelError("binary SVM labels must be -1 or +1, got " + std::to_string(y));
    }
  }
  if (!pos || !neg) throw DatasetError("binary SVM training needs samples of both classes");
}

std::vector<double> gram_matrix(const Tensor& x, double gamma) {
  const std::size_t n = x.dim(0);
  std::vector<double> k(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    k[i * n + i] = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) k[i * n + j] = k[j * n + i] = rbf_kernel(x.slice0(i), x.slice0(j), gamma);
  }
  return k;
}

}  // namespace

// Two-variable SMO on the dual, tracking the extreme errors of the "up" and
// "low" index sets. F_i = sum_j alpha_j y_j K_ij - y_i. Optimal within tol
// once max_low F <= min_up F + tol, which bounds every KKT violation by tol/2.
SmoResult smo_train(const Tensor& features, std::span<const int> labels, const SvmConfig& cfg) {
  cfg.validate();
  check_binary_input(features, labels);
  const std::size_t n = features.dim(0);
  const double C = cfg.C;
  const double gamma = cfg.resolved_gamma(features.dim(1));
  const double gap = cfg.tol;
  const std::vector<double> K = gram_matrix(features, gamma);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = labels[i];

  std::vector<double> alpha(n, 0.0), F(n);
  auto in_up = [&](std::size_t i) { return (y[i] > 0 && alpha[i] < C) || (y[i] < 0 && alpha[i] > 0); };
  auto in_low = [&](std::size_t i) { return (y[i] > 0 && alpha[i] > 0) || (y[i] < 0 && alpha[i] < C); };
  auto recompute_errors = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (alpha[j] > 0) s += alpha[j] * y[j] * K[i * n + j];
      F[i] = s - y[i];
    }
  };
  struct Extremes {
    double up = std::numeric_limits<double>::infinity();
    double low = -std::numeric_limits<double>::infinity();
    std::size_t i_up = 0, i_low = 0;
  };
  auto extremes = [&] {
    Extremes e;
    for (std::size_t i = 0; i < n; ++i) {
      if (in_up(i) && F[i] < e.up) {
        e.up = F[i];
        e.i_up = i;
      }
      if (in_low(i) && F[i] > e.low) {
        e.low = F[i];
        e.i_low = i;
      }
    }
    return e;
  };

  // Joint step on (i, j); returns false when the pair cannot move.
  auto take_step = [&](std::size_t i, std::size_t j) {
    if (i == j) return false;
    const double s = y[i] * y[j];
    double lo, hi;
    if (s < 0) {
      lo = std::max(0.0, alpha[j] - alpha[i]);
      hi = std::min(C, C + alpha[j] - alpha[i]);
    } else {
      lo = std::max(0.0, alpha[i] + alpha[j] - C);
      hi = std::min(C, alpha[i] + alpha[j]);
    }
    if (hi - lo <= 0.0) return false;
    double eta = K[i * n + i] + K[j * n + j] - 2.0 * K[i * n + j];
    if (eta <= 1e-12) eta = 1e-12;
    // Round-off residues near a bound would keep a point in the working
    // sets while leaving it no room to move, so snap them onto the bound.
    const double snap = 1e-12 * C;
    auto settle = [&](double a) { return a < snap ? 0.0 : (a > C - snap ? C : a); };
    const double aj = settle(std::clamp(alpha[j] + y[j] * (F[i] - F[j]) / eta, lo, hi));
    const double dj = aj - alpha[j];
    if (std::fabs(dj) < 1e-14 * std::max(1.0, C)) return false;
    const double ai = settle(std::clamp(alpha[i] - s * dj, 0.0, C));
    const double di = ai - alpha[i];
    alpha[i] = ai;
    alpha[j] = aj;
    const double ci = y[i] * di, cj = y[j] * dj;
    for (std::size_t k = 0; k < n; ++k) F[k] += ci * K[i * n + k] + cj * K[j * n + k];
    return true;
  };

  bool converged = false;
  std::size_t pass = 0;
  while (pass < cfg.max_passes && !converged) {
    recompute_errors();
    ++pass;
    std::size_t moved = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const Extremes e = extremes();
      if (e.low <= e.up + gap) {
        converged = true;
        break;
      }
      // i violates when it pairs with the opposite extreme beyond the gap;
      // the partner is that extreme, which maximizes |F_i - F_j|.
      const bool viol_up = in_up(i) && F[i] < e.low - gap;
      const bool viol_low = in_low(i) && F[i] > e.up + gap;
      if (!viol_up && !viol_low) continue;
      std::size_t j;
      if (viol_up && viol_low) {
        j = (e.low - F[i] >= F[i] - e.up) ? e.i_low : e.i_up;
      } else {
        j = viol_up ? e.i_low : e.i_up;
      }
      if (take_step(i, j)) ++moved;
    }
    if (!converged && moved == 0) {
      // The maximal violating pair always has a feasible direction.
      const Extremes e = extremes();
      if (!take_step(e.i_up, e.i_low)) break;
    }
  }
  recompute_errors();
  const Extremes e = extremes();
  if (!converged) converged = e.low <= e.up + gap;

  SmoResult result;
  result.alpha = alpha;
  BinarySvmModel& m = result.model;
  m.gamma = gamma;
  m.converged = converged;
  m.passes = pass;
  // Midpoint of the feasible bias interval.
  const double up = std::isfinite(e.up) ? e.up : e.low;
  const double low = std::isfinite(e.low) ? e.low : e.up;
  m.bias = -(up + low) / 2.0;
  std::vector<std::size_t> sv;
  for (std::size_t i = 0; i < n; ++i)
    if (alpha[i] > 0.0) sv.push_back(i);
  m.support = gather_rows(features, sv);
  if (sv.empty()) m.support = Tensor({0, features.dim(1)});
  for (std::size_t i : sv) m.dual_coef.push_back(alpha[i] * y[i]);
  return result;
}

KktAudit kkt_audit(const Tensor& features, std::span<const int> labels, std::span<const double> alpha, double bias,
                   double gamma, double C, double tol) {
  check_binary_input(features, labels);
  const std::size_t n = features.dim(0);
  if (alpha.size() != n) throw ShapeError("KKT audit: alpha count does not match samples");
  KktAudit a;
  a.box_ok = true;
  double eq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!(alpha[i] >= 0.0 && alpha[i] <= C)) a.box_ok = false;
    eq += alpha[i] * labels[i];
  }
  a.equality_residual = std::fabs(eq);
  for (std::size_t i = 0; i < n; ++i) {
    double f = bias;
    for (std::size_t j = 0; j < n; ++j)
      if (alpha[j] > 0) f += alpha[j] * labels[j] * rbf_kernel(features.slice0(j), features.slice0(i), gamma);
    const double margin = labels[i] * f;
    double v = 0.0;
    if (alpha[i] <= 0.0) {
      v = std::max(0.0, 1.0 - margin);
    } else if (alpha[i] >= C) {
      v = std::max(0.0, margin - 1.0);
    } else {
      v = std::fabs(margin - 1.0);
    }
    a.max_violation = std::max(a.max_violation, v);
  }
  a.passed = a.box_ok && a.max_violation <= tol && a.equality_residual <= tol;
  return a;
}

KktAudit kkt_audit(const SmoResult& fit, const Tensor& features, std::span<const int> labels, const SvmConfig& cfg) {
  return kkt_audit(features, labels, fit.alpha, fit.model.bias, fit.model.gamma, cfg.C, cfg.tol);
}

double svm_decision(const BinarySvmModel& model, std::span<const double> x) {
  if (x.size() != model.feature_count()) {
    throw ShapeError("SVM input has " + std::to_string(x.size()) + " features, model expects " +
                     std::to_string(model.feature_count()));
  }
  double f = model.bias;
  for (std::size_t i = 0; i < model.dual_coef.size(); ++i)
    f += model.dual_coef[i] * rbf_kernel(model.support.slice0(i), x, model.gamma);
  return f;
}

int svm_predict_binary(const BinarySvmModel& model, std::span<const double> x) {
  return svm_decision(model, x) >= 0.0 ? 1 : -1;
}

MulticlassSvmModel one_vs_one_train(const Tensor& features, std::span<const int> labels, const SvmConfig& cfg,
                                    std::size_t class_count) {
  cfg.validate();
  if (features.rank() != 2 || features.dim(0) != labels.size()) {
    throw ShapeError("SVM features " + to_string(features.shape()) + " do not match " +
                     std::to_string(labels.size()) + " labels");
  }
  int max_label = -1;
  for (int l : labels) {
    if (l < 0) throw LabelError("negative class label " + std::to_string(l));
    max_label = std::max(max_label, l);
  }
  const std::size_t k = class_count ? class_count : static_cast<std::size_t>(max_label + 1);
  if (static_cast<std::size_t>(max_label + 1) > k) throw LabelError("label outside the class range");
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
  for (std::size_t c = 0; c < k; ++c)
    if (members[c].empty()) throw DatasetError("class " + std::to_string(c) + " has no training samples");
  if (k < 2) throw DatasetError("multiclass SVM needs at least two classes");

  MulticlassSvmModel model;
  model.class_count = k;
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a + 1; b < k; ++b) {
      std::vector<std::size_t> rows;
      std::merge(members[a].begin(), members[a].end(), members[b].begin(), members[b].end(),
                 std::back_inserter(rows));
      std::vector<int> y(rows.size());
      for (std::size_t r = 0; r < rows.size(); ++r) y[r] = labels[rows[r]] == static_cast<int>(a) ? 1 : -1;
      const Tensor x = gather_rows(features, rows);
      SvmConfig pair_cfg = cfg;
      pair_cfg.gamma = cfg.resolved_gamma(features.dim(1));
      SmoResult fit = smo_train(x, y, pair_cfg);
      model.audits.push_back(kkt_audit(fit, x, y, pair_cfg));
      model.pairs.emplace_back(static_cast<int>(a), static_cast<int>(b));
      model.machines.push_back(std::move(fit.model));
    }
  }
  return model;
}

int one_vs_one_predict(const MulticlassSvmModel& model, std::span<const double> x) {
  if (model.machines.empty()) throw StateError("multiclass SVM has no machines");
  std::vector<int> votes(model.class_count, 0);
  std::vector<double> score(model.class_count, 0.0);
  for (std::size_t m = 0; m < model.machines.size(); ++m) {
    const double f = svm_decision(model.machines[m], x);
    const auto [a, b] = model.pairs[m];
    ++votes[f >= 0.0 ? a : b];
    score[a] += f;
    score[b] -= f;
  }
  std::size_t best = 0;
  for (std::size_t c = 1; c < model.class_count; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && score[c] > score[best])) best = c;
  }
  return static_cast<int>(best);
}

std::vector<int> one_vs_one_predict(const MulticlassSvmModel& model, const Tensor& features) {
  if (features.rank() != 2) throw ShapeError("SVM inputs must be [n x d], got " + to_string(features.shape()));
  std::vector<int> out(features.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = one_vs_one_predict(model, features.slice0(i));
  return out;
}

}  // namespace terradeep
