#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "terradeep/datasets.hpp"
#include "terradeep/learner.hpp"

namespace terradeep {

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;  // rows actual, columns predicted

double accuracy(std::span<const int> predicted, std::span<const int> actual);
ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> actual, std::size_t classes);

// Smallest e with max - min of curve[e, e + window) <= band; nullopt when no
// window qualifies or the curve is shorter than the window.
std::optional<std::size_t> epoch_stability(std::span<const double> curve, std::size_t window = 5,
                                           double band = 0.02);

struct RunRecord {
  double ratio = 0.0;
  std::uint64_t seed = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
  double accuracy = 0.0;
  ConfusionMatrix confusion;
  std::vector<double> epoch_curve;  // network learners only
};

struct EvalReport {
  std::string learner;
  InputMode input_mode = InputMode::raw;
  std::vector<std::string> class_names;
  std::vector<RunRecord> runs;
  double accuracy_mean = 0.0;
  double accuracy_std = 0.0;  // population
  std::vector<std::pair<double, double>> per_ratio_mean;  // (ratio, mean accuracy), ascending ratio
  std::vector<double> mean_epoch_curve;
  std::optional<std::size_t> stable_epoch;  // of mean_epoch_curve
  double total_wall_seconds = 0.0;          // not part of to_json (reports stay byte-stable)
  nlohmann::json config;

  // Recomputes accuracy_mean / accuracy_std / per-ratio means / curve summary
  // from the run records.
  void aggregate();

  nlohmann::ordered_json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
  std::string runs_csv() const;
  std::string confusion_csv(std::size_t run) const;
};

std::string curve_csv(std::span<const double> curve);

struct ExperimentOptions {
  std::size_t threads = 1;
  bool keep_first_model = false;
};

// Runs every split of the plan: partition, fit on the training side
// (standardization included), score the test side. Runs may execute
// concurrently; records are assembled in plan order.
EvalReport run_experiment(const ZooEntry& entry, InputMode mode, const LabeledDataset& prepared, const SplitPlan& plan,
                          const LearnerOptions& options, const ExperimentOptions& run_options = {},
                          LearnerModel* first_model = nullptr);

// Scores a trained model on prepared samples (one run, ratio 0).
EvalReport evaluate_model(const LearnerModel& model, const LabeledDataset& prepared);

}  // namespace terradeep
