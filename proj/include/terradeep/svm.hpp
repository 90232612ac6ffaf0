#pragma once

#include <span>
#include <utility>
#include <vector>

#include "terradeep/tensor.hpp"

namespace terradeep {

struct SvmConfig {
  double C = 1.0;
  double gamma = 0.0;  // <= 0 means 1 / feature_count
  double tol = 1e-3;
  std::size_t max_passes = 200;

  void validate() const;
  double resolved_gamma(std::size_t feature_count) const;
};

struct BinarySvmModel {
  Tensor support;                 // [m x d]
  std::vector<double> dual_coef;  // alpha_i * y_i per support vector
  double bias = 0.0;
  double gamma = 1.0;
  bool converged = true;
  std::size_t passes = 0;

  std::size_t feature_count() const { return support.rank() == 2 ? support.dim(1) : 0; }
};

struct KktAudit {
  bool passed = false;
  double max_violation = 0.0;       // worst KKT violation in units of y*f(x)
  double equality_residual = 0.0;   // |sum alpha_i y_i|
  bool box_ok = false;              // 0 <= alpha <= C
};

struct SmoResult {
  BinarySvmModel model;
  std::vector<double> alpha;  // one per training sample
};

double rbf_kernel(std::span<const double> x, std::span<const double> z, double gamma);

// features [n x d], labels in {-1, +1}.
SmoResult smo_train(const Tensor& features, std::span<const int> labels, const SvmConfig& cfg);

KktAudit kkt_audit(const Tensor& features, std::span<const int> labels, std::span<const double> alpha,
                   double bias, double gamma, double C, double tol);
KktAudit kkt_audit(const SmoResult& fit, const Tensor& features, std::span<const int> labels, const SvmConfig& cfg);

double svm_decision(const BinarySvmModel& model, std::span<const double> x);
int svm_predict_binary(const BinarySvmModel& model, std::span<const double> x);

struct MulticlassSvmModel {
  std::size_t class_count = 0;
  std::vector<std::pair<int, int>> pairs;  // (a, b): a is the +1 side
  std::vector<BinarySvmModel> machines;
  std::vector<KktAudit> audits;  // training-time audit per machine (not persisted)
};

// labels in [0, k) with every class present; k = class_count (or max label + 1
// when class_count is 0).
MulticlassSvmModel one_vs_one_train(const Tensor& features, std::span<const int> labels, const SvmConfig& cfg,
                                    std::size_t class_count = 0);
// Majority vote; ties broken by summed decision values, then lowest index.
int one_vs_one_predict(const MulticlassSvmModel& model, std::span<const double> x);
std::vector<int> one_vs_one_predict(const MulticlassSvmModel& model, const Tensor& features);

}  // namespace terradeep
