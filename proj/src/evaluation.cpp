#include "terradeep/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "terradeep/error.hpp"

namespace terradeep {

using nlohmann::json;
using nlohmann::ordered_json;

double accuracy(std::span<const int> predicted, std::span<const int> actual) {
  if (predicted.size() != actual.size()) {
    throw ShapeError("accuracy: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(actual.size()) + " labels");
  }
  if (actual.empty()) throw ShapeError("accuracy of an empty label vector");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) hits += predicted[i] == actual[i];
  return static_cast<double>(hits) / static_cast<double>(actual.size());
}

ConfusionMatrix confusion(std::span<const int> predicted, std::span<const int> actual, std::size_t classes) {
  if (predicted.size() != actual.size()) throw ShapeError("confusion: prediction / label count mismatch");
  ConfusionMatrix m(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < actual.size(); ++i) {
    for (int l : {actual[i], predicted[i]}) {
      if (l < 0 || static_cast<std::size_t>(l) >= classes) {
        throw LabelError("label " + std::to_string(l) + " outside [0, " + std::to_string(classes) + ")");
      }
    }
    ++m[actual[i]][predicted[i]];
  }
  return m;
}

std::optional<std::size_t> epoch_stability(std::span<const double> curve, std::size_t window, double band) {
  if (window == 0 || curve.size() < window) return std::nullopt;
  for (std::size_t e = 0; e + window <= curve.size(); ++e) {
    const auto [lo, hi] = std::minmax_element(curve.begin() + static_cast<std::ptrdiff_t>(e),
                                              curve.begin() + static_cast<std::ptrdiff_t>(e + window));
    if (*hi - *lo <= band) return e;
  }
  return std::nullopt;
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

}  // namespace

void EvalReport::aggregate() {
  if (runs.empty()) throw StateError("report has no runs");
  double sum = 0.0;
  for (const RunRecord& r : runs) sum += r.accuracy;
  accuracy_mean = sum / static_cast<double>(runs.size());
  double ss = 0.0;
  for (const RunRecord& r : runs) ss += (r.accuracy - accuracy_mean) * (r.accuracy - accuracy_mean);
  accuracy_std = std::sqrt(ss / static_cast<double>(runs.size()));

  std::map<double, std::pair<double, std::size_t>> by_ratio;
  for (const RunRecord& r : runs) {
    auto& slot = by_ratio[r.ratio];
    slot.first += r.accuracy;
    ++slot.second;
  }
  per_ratio_mean.clear();
  for (const auto& [ratio, s] : by_ratio) per_ratio_mean.emplace_back(ratio, s.first / static_cast<double>(s.second));

  mean_epoch_curve.clear();
  stable_epoch.reset();
  const std::size_t len = runs.front().epoch_curve.size();
  const bool uniform = len > 0 && std::all_of(runs.begin(), runs.end(), [&](const RunRecord& r) {
                         return r.epoch_curve.size() == len;
                       });
  if (uniform) {
    mean_epoch_curve.assign(len, 0.0);
    for (const RunRecord& r : runs)
      for (std::size_t e = 0; e < len; ++e) mean_epoch_curve[e] += r.epoch_curve[e];
    for (double& v : mean_epoch_curve) v /= static_cast<double>(runs.size());
    stable_epoch = epoch_stability(mean_epoch_curve);
  }
}

ordered_json EvalReport::to_json() const {
  ordered_json j;
  j["learner"] = learner;
  j["input_mode"] = to_string(input_mode);
  j["class_names"] = class_names;
  ordered_json rs = ordered_json::array();
  for (const RunRecord& r : runs) {
    ordered_json o;
    o["ratio"] = r.ratio;
    o["seed"] = r.seed;
    o["train_count"] = r.train_count;
    o["test_count"] = r.test_count;
    o["accuracy"] = r.accuracy;
    o["confusion"] = r.confusion;
    if (!r.epoch_curve.empty()) o["epoch_curve"] = r.epoch_curve;
    rs.push_back(std::move(o));
  }
  j["runs"] = std::move(rs);
  j["accuracy_mean"] = accuracy_mean;
  j["accuracy_std"] = accuracy_std;
  j["std_convention"] = "population";
  ordered_json pr = ordered_json::array();
  for (const auto& [ratio, mean] : per_ratio_mean) pr.push_back({{"ratio", ratio}, {"accuracy_mean", mean}});
  j["per_ratio"] = std::move(pr);
  if (!mean_epoch_curve.empty()) {
    j["epoch_curves"] = {{"mean", mean_epoch_curve},
                         {"stable_epoch", stable_epoch ? ordered_json(*stable_epoch) : ordered_json(nullptr)}};
  }
  j["config"] = ordered_json(config);
  return j;
}

EvalReport EvalReport::from_json(const json& j) {
  EvalReport r;
  try {
    r.learner = j.at("learner").get<std::string>();
    r.input_mode = parse_input_mode(j.at("input_mode").get<std::string>());
    r.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const json& o : j.at("runs")) {
      RunRecord rec;
      rec.ratio = o.at("ratio").get<double>();
      rec.seed = o.at("seed").get<std::uint64_t>();
      rec.train_count = o.at("train_count").get<std::size_t>();
      rec.test_count = o.at("test_count").get<std::size_t>();
      rec.accuracy = o.at("accuracy").get<double>();
      rec.confusion = o.at("confusion").get<ConfusionMatrix>();
      if (o.contains("epoch_curve")) rec.epoch_curve = o.at("epoch_curve").get<std::vector<double>>();
      r.runs.push_back(std::move(rec));
    }
    r.accuracy_mean = j.at("accuracy_mean").get<double>();
    r.accuracy_std = j.at("accuracy_std").get<double>();
    for (const json& p : j.at("per_ratio")) {
      r.per_ratio_mean.emplace_back(p.at("ratio").get<double>(), p.at("accuracy_mean").get<double>());
    }
    if (j.contains("epoch_curves")) {
      r.mean_epoch_curve = j.at("epoch_curves").at("mean").get<std::vector<double>>();
      const json& s = j.at("epoch_curves").at("stable_epoch");
      if (!s.is_null()) r.stable_epoch = s.get<std::size_t>();
    }
    if (j.contains("config")) r.config = j.at("config");
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string EvalReport::runs_csv() const {
  std::string s = "run,ratio,seed,train_count,test_count,accuracy\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const RunRecord& r = runs[i];
    s += std::to_string(i) + "," + num(r.ratio) + "," + std::to_string(r.seed) + "," + std::to_string(r.train_count) +
         "," + std::to_string(r.test_count) + "," + num(r.accuracy) + "\n";
  }
  return s;
}

std::string EvalReport::confusion_csv(std::size_t run) const {
  if (run >= runs.size()) throw ParameterError("no run " + std::to_string(run) + " in report");
  const ConfusionMatrix& m = runs[run].confusion;
  std::string s = "actual\\predicted";
  for (std::size_t c = 0; c < m.size(); ++c) s += "," + (c < class_names.size() ? class_names[c] : std::to_string(c));
  s += "\n";
  for (std::size_t a = 0; a < m.size(); ++a) {
    s += a < class_names.size() ? class_names[a] : std::to_string(a);
    for (std::size_t v : m[a]) s += "," + std::to_string(v);
    s += "\n";
  }
  return s;
}

std::string curve_csv(std::span<const double> curve) {
  std::string s = "epoch,accuracy\n";
  for (std::size_t e = 0; e < curve.size(); ++e) s += std::to_string(e + 1) + "," + num(curve[e]) + "\n";
  return s;
}

EvalReport run_experiment(const ZooEntry& entry, InputMode mode, const LabeledDataset& prepared, const SplitPlan& plan,
                          const LearnerOptions& options, const ExperimentOptions& run_options,
                          LearnerModel* first_model) {
  plan.validate();
  prepared.validate();
  const auto start = std::chrono::steady_clock::now();
  const std::size_t runs = plan.runs.size();
  std::vector<RunRecord> records(runs);
  std::vector<std::exception_ptr> failures(runs);

  auto do_run = [&](std::size_t r) {
    const SplitRun& sr = plan.runs[r];
    const Split split = holdout_split(prepared.size(), sr.train_ratio, sr.seed);
    const LabeledDataset train = prepared.subset(split.train);
    const LabeledDataset test = prepared.subset(split.test);
    LearnerOptions opts = options;
    opts.train.seed = sr.seed;
    LearnerModel model = fit_learner(entry, mode, train, opts);
    const std::vector<int> predicted = predict_learner(model, test.features);
    RunRecord& rec = records[r];
    rec.ratio = sr.train_ratio;
    rec.seed = sr.seed;
    rec.train_count = train.size();
    rec.test_count = test.size();
    rec.accuracy = accuracy(predicted, test.labels);
    rec.confusion = confusion(predicted, test.labels, prepared.class_count());
    if (model.kind == LearnerKind::network) rec.epoch_curve = model.network.epoch_curve;
    if (r == 0 && first_model) *first_model = std::move(model);
  };

  const std::size_t threads = std::clamp<std::size_t>(run_options.threads, 1, runs);
  if (threads == 1) {
    for (std::size_t r = 0; r < runs; ++r) {
      try {
        do_run(r);
      } catch (...) {
        failures[r] = std::current_exception();
        break;
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t r; (r = next.fetch_add(1)) < runs;) {
          try {
            do_run(r);
          } catch (...) {
            failures[r] = std::current_exception();
          }
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  for (std::size_t r = 0; r < runs; ++r) {
    if (!failures[r]) continue;
    try {
      std::rethrow_exception(failures[r]);
    } catch (const Error& e) {
      throw Error(e.kind(), "run " + std::to_string(r) + " failed: " + e.what());
    } catch (const std::exception& e) {
      throw InternalError("run " + std::to_string(r) + " failed: " + e.what());
    }
  }

  EvalReport report;
  report.learner = entry.name;
  report.input_mode = mode;
  report.class_names = prepared.class_names;
  report.runs = std::move(records);
  report.aggregate();
  json cfg = options.to_json(entry);
  json plan_json = json::array();
  for (const SplitRun& sr : plan.runs) plan_json.push_back({{"ratio", sr.train_ratio}, {"seed", sr.seed}});
  cfg["split_plan"] = plan_json;
  cfg["samples"] = prepared.size();
  cfg["sample_shape"] = prepared.sample_shape();
  report.config = std::move(cfg);
  report.total_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

EvalReport evaluate_model(const LearnerModel& model, const LabeledDataset& prepared) {
  prepared.validate();
  const auto start = std::chrono::steady_clock::now();
  if (prepared.class_count() != model.class_names.size()) {
    throw DatasetError("dataset has " + std::to_string(prepared.class_count()) + " classes, model was trained on " +
                       std::to_string(model.class_names.size()));
  }
  const std::vector<int> predicted = predict_learner(model, prepared.features);
  EvalReport report;
  report.learner = model.entry;
  report.input_mode = model.mode;
  report.class_names = model.class_names;
  RunRecord rec;
  rec.test_count = prepared.size();
  rec.accuracy = accuracy(predicted, prepared.labels);
  rec.confusion = confusion(predicted, prepared.labels, model.class_names.size());
  report.runs.push_back(std::move(rec));
  report.aggregate();
  report.config = json{{"model", model.entry}, {"samples", prepared.size()}};
  report.total_wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace terradeep
