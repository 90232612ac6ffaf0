#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "terradeep/datasets.hpp"
#include "terradeep/error.hpp"
#include "terradeep/evaluation.hpp"
#include "terradeep/rng.hpp"

using namespace terradeep;

namespace {

std::size_t trace(const ConfusionMatrix& m) {
  std::size_t t = 0;
  for (std::size_t i = 0; i < m.size(); ++i) t += m[i][i];
  return t;
}

std::size_t total(const ConfusionMatrix& m) {
  std::size_t t = 0;
  for (const auto& row : m) t = std::accumulate(row.begin(), row.end(), t);
  return t;
}

// Per-run invariants every report must satisfy.
void check_report(const EvalReport& r, std::size_t classes) {
  double sum = 0.0;
  for (const RunRecord& run : r.runs) {
    REQUIRE(run.confusion.size() == classes);
    CHECK(total(run.confusion) == run.test_count);
    CHECK(std::fabs(static_cast<double>(trace(run.confusion)) / static_cast<double>(run.test_count) -
                    run.accuracy) <= 1e-12);
    sum += run.accuracy;
  }
  CHECK(std::fabs(r.accuracy_mean - sum / static_cast<double>(r.runs.size())) <= 1e-12);
  CHECK(r.accuracy_std >= 0.0);
}

LabeledDataset slip_features(std::size_t per_class, std::uint64_t seed) {
  const auto frames = synth_slip(per_class, 50, seed);
  return assemble_slip_dataset(frames, InputMode::filtered, 50);
}

}  // namespace

TEST_CASE("accuracy") {
  const std::vector<int> a{0, 1, 2, 1};
  CHECK(accuracy(a, a) == 1.0);
  CHECK(accuracy(std::vector<int>{1, 2, 0, 0}, a) == 0.0);
  CHECK(accuracy(std::vector<int>{0, 1, 2, 2}, a) == 0.75);
  CHECK_THROWS_AS(accuracy(std::vector<int>{0}, a), ShapeError);
  CHECK_THROWS_AS(accuracy(std::vector<int>{}, std::vector<int>{}), ShapeError);
}

TEST_CASE("confusion matrix") {
  const std::vector<int> actual{0, 0, 1, 2, 2, 2};
  const ConfusionMatrix perfect = confusion(actual, actual, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK((i == j || perfect[i][j] == 0));
  CHECK(perfect[2][2] == 3);

  const ConfusionMatrix zeros = confusion(std::vector<int>(6, 0), actual, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(zeros[i][1] == 0);
    CHECK(zeros[i][2] == 0);
  }
  CHECK(zeros[2][0] == 3);

  SeededRng rng(1, Stream::data);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = 2 + rng.below(9), n = 1 + rng.below(200);
    std::vector<int> p(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      p[i] = static_cast<int>(rng.below(k));
      y[i] = static_cast<int>(rng.below(k));
    }
    const ConfusionMatrix m = confusion(p, y, k);
    CHECK(total(m) == n);
    CHECK(static_cast<double>(trace(m)) / static_cast<double>(n) == doctest::Approx(accuracy(p, y)).epsilon(1e-15));

    // Relabelling classes permutes rows and columns and leaves accuracy alone.
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    std::vector<int> pp(n), py(n);
    for (std::size_t i = 0; i < n; ++i) {
      pp[i] = static_cast<int>(perm[p[i]]);
      py[i] = static_cast<int>(perm[y[i]]);
    }
    const ConfusionMatrix mp = confusion(pp, py, k);
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) CHECK(mp[perm[a]][perm[b]] == m[a][b]);
    CHECK(accuracy(pp, py) == accuracy(p, y));
  }
  CHECK_THROWS_AS(confusion(std::vector<int>{3}, std::vector<int>{0}, 3), LabelError);
  CHECK_THROWS_AS(confusion(std::vector<int>{0}, std::vector<int>{-1}, 3), LabelError);
}

TEST_CASE("epoch stability") {
  const std::vector<double> curve{0.3, 0.6, 0.85, 0.88, 0.89, 0.89, 0.90, 0.89, 0.90, 0.90};
  CHECK(epoch_stability(curve) == 4u);
  CHECK(epoch_stability(std::vector<double>(8, 0.5)) == 0u);
  std::vector<double> rising;
  for (int e = 0; e < 20; ++e) rising.push_back(0.05 * e);
  CHECK_FALSE(epoch_stability(rising).has_value());
  CHECK_FALSE(epoch_stability(std::vector<double>{0.5, 0.5}).has_value());
  CHECK(epoch_stability(rising, 1, 0.0) == 0u);
  // The band is inclusive.
  const std::vector<double> edge{0.5, 0.75, 0.5, 0.75, 0.5};
  CHECK(epoch_stability(edge, 5, 0.25) == 0u);
  CHECK_FALSE(epoch_stability(edge, 5, 0.2499).has_value());
}

TEST_CASE("aggregation and std convention") {
  EvalReport r;
  r.learner = "x";
  r.class_names = {"a", "b"};
  for (double acc : {0.5, 0.7, 0.9, 0.7}) {
    RunRecord run;
    run.accuracy = acc;
    run.ratio = acc > 0.8 ? 0.5 : 0.7;
    run.epoch_curve = {acc, acc};
    r.runs.push_back(run);
  }
  r.aggregate();
  CHECK(r.accuracy_mean == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(r.accuracy_std == doctest::Approx(std::sqrt(0.02)).epsilon(1e-14));
  REQUIRE(r.per_ratio_mean.size() == 2);
  CHECK(r.per_ratio_mean[0].first == 0.5);
  CHECK(r.per_ratio_mean[0].second == doctest::Approx(0.9));
  CHECK(r.per_ratio_mean[1].second == doctest::Approx(0.6333333333333333));
  CHECK(r.mean_epoch_curve.size() == 2);

  for (RunRecord& run : r.runs) run.accuracy = 0.8;
  r.aggregate();
  CHECK(r.accuracy_std == 0.0);
  CHECK_THROWS_AS(EvalReport{}.aggregate(), StateError);
}

TEST_CASE("report serialization") {
  EvalReport r;
  r.learner = "slip-dnn";
  r.input_mode = InputMode::filtered;
  r.class_names = {"low", "moderate", "high"};
  RunRecord run;
  run.ratio = 0.7;
  run.seed = 3;
  run.train_count = 7;
  run.test_count = 3;
  run.accuracy = 2.0 / 3.0;
  run.confusion = {{1, 0, 0}, {0, 1, 0}, {0, 1, 0}};
  run.epoch_curve = {0.1, 0.2, 0.3, 0.3, 0.3, 0.3};
  r.runs = {run, run};
  r.config = {{"seed", 3}};
  r.aggregate();
  const auto j = r.to_json();
  CHECK(j["std_convention"] == "population");
  CHECK(j["runs"][0]["confusion"][2][1] == 1);
  const EvalReport back = EvalReport::from_json(j);
  CHECK(back.to_json().dump() == j.dump());
  CHECK(back.stable_epoch == r.stable_epoch);
  CHECK(r.runs_csv() ==
        "run,ratio,seed,train_count,test_count,accuracy\n0,0.7,3,7,3,0.6666666666666666\n"
        "1,0.7,3,7,3,0.6666666666666666\n");
  CHECK(r.confusion_csv(0) == "actual\\predicted,low,moderate,high\nlow,1,0,0\nmoderate,0,1,0\nhigh,0,1,0\n");
  CHECK_THROWS_AS(r.confusion_csv(2), ParameterError);
  CHECK(curve_csv(std::vector<double>{0.5, 0.75}) == "epoch,accuracy\n1,0.5\n2,0.75\n");
  CHECK_THROWS_AS(EvalReport::from_json(nlohmann::json{{"learner", "x"}}), FormatError);
}

TEST_CASE("experiments follow the plan") {
  const LabeledDataset ds = slip_features(120, 2);
  const ZooEntry e = build("slip-svm");
  const SplitPlan plan = SplitPlan::standard(40);
  const EvalReport r = run_experiment(e, InputMode::filtered, ds, plan, default_options(e));
  REQUIRE(r.runs.size() == 10);
  check_report(r, 3);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(r.runs[i].ratio == plan.runs[i].train_ratio);
    CHECK(r.runs[i].seed == plan.runs[i].seed);
    CHECK(r.runs[i].train_count == static_cast<std::size_t>(std::floor(plan.runs[i].train_ratio * 360)));
    CHECK(r.runs[i].epoch_curve.empty());
  }
  CHECK(r.accuracy_mean > 0.9);

  // Deterministic regardless of how runs are scheduled.
  const EvalReport again = run_experiment(e, InputMode::filtered, ds, plan, default_options(e), {.threads = 3});
  CHECK(again.to_json().dump() == r.to_json().dump());
}

TEST_CASE("a learner that cannot tell samples apart scores chance") {
  LabeledDataset ds = slip_features(100, 3);
  for (double& v : ds.features.values()) v = 1.0;
  const ZooEntry e = build("slip-svm");
  const EvalReport r = run_experiment(e, InputMode::filtered, ds, SplitPlan::standard(7), default_options(e));
  check_report(r, 3);
  CHECK(r.accuracy_mean == doctest::Approx(1.0 / 3.0).epsilon(0.1));
  for (const RunRecord& run : r.runs) {
    std::size_t used = 0;
    for (std::size_t c = 0; c < 3; ++c) {
      std::size_t column = 0;
      for (std::size_t a = 0; a < 3; ++a) column += run.confusion[a][c];
      used += column > 0;
    }
    CHECK(used == 1);
  }
}

TEST_CASE("network runs carry epoch curves") {
  const LabeledDataset ds = slip_features(60, 4);
  const ZooEntry e = build("slip-dnn");
  LearnerOptions opt = default_options(e);
  opt.train.epochs = 6;
  SplitPlan plan;
  plan.runs = {{0.7, 1}, {0.5, 2}};
  LearnerModel first;
  const EvalReport r = run_experiment(e, InputMode::filtered, ds, plan, opt, {}, &first);
  check_report(r, 3);
  for (const RunRecord& run : r.runs) CHECK(run.epoch_curve.size() == 6);
  CHECK(r.mean_epoch_curve.size() == 6);
  CHECK(first.entry == "slip-dnn");
  CHECK(first.network.epoch_curve == r.runs[0].epoch_curve);

  const EvalReport scored = evaluate_model(first, ds);
  REQUIRE(scored.runs.size() == 1);
  CHECK(scored.runs[0].test_count == ds.size());
  check_report(scored, 3);

  LabeledDataset broken = ds;
  broken.labels[0] = 7;
  CHECK_THROWS_AS(run_experiment(e, InputMode::filtered, broken, plan, opt), DatasetError);
}
