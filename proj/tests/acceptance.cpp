// End-to-end acceptance checks. Each criterion prints exactly one line
// "criterion N: PASS|FAIL <details>" and the exit status is non-zero when any
// selected criterion fails.
#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "terradeep/datasets.hpp"
#include "terradeep/error.hpp"
#include "terradeep/evaluation.hpp"
#include "terradeep/gradcheck_suite.hpp"
#include "terradeep/learner.hpp"
#include "terradeep/ops.hpp"
#include "terradeep/rng.hpp"
#include "terradeep/serialize.hpp"
#include "terradeep/svm.hpp"
#include "terradeep/training.hpp"
#include "terradeep/zoo.hpp"

using namespace terradeep;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

struct Context {
  fs::path work;
  std::string cli;
};

double cpu_seconds() { return static_cast<double>(std::clock()) / CLOCKS_PER_SEC; }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary | std::ios::trunc) << text;
}

// ----- shared experiment settings -----------------------------------------

constexpr std::uint64_t kSeed = 7;

std::vector<std::string> six_terrain_classes() {
  return {terrain_class_names().begin(), terrain_class_names().begin() + 6};
}

DataSource slip_source() {
  DataSource s;
  s.task = Task::slip;
  s.frames = synth_slip(1000, 50, kSeed);
  return s;
}

DataSource terrain_source() {
  DataSource s;
  s.task = Task::image;
  s.images = synth_terrain(six_terrain_classes(), 100, 64, kSeed);
  return s;
}

// The settings the CLI uses for `--seed 7` with default flags.
EvalReport experiment(const std::string& name, InputMode mode, const DataSource& source) {
  const ZooEntry entry = build(name);
  PrepareOptions prep;
  prep.nw = 50;
  const LabeledDataset data = prepare_dataset(entry, mode, source, prep);
  LearnerOptions options = default_options(entry);
  options.train.seed = kSeed;
  EvalReport r = run_experiment(entry, mode, data, SplitPlan::standard(kSeed, 10), options);
  r.config = {{"learner", name}, {"input_mode", to_string(mode)}, {"seed", kSeed}};
  return r;
}

fs::path cached_report(const Context& ctx, const std::string& key) { return ctx.work / ("report_" + key + ".json"); }

void store(const Context& ctx, const std::string& key, const EvalReport& r) {
  write_file(cached_report(ctx, key), r.to_json().dump(2) + "\n");
}

std::string summary(const EvalReport& r) {
  return r.learner + "/" + to_string(r.input_mode) + " " + fmt("%.4f", r.accuracy_mean) + " +- " +
         fmt("%.4f", r.accuracy_std);
}

// Returns an empty string when the report satisfies the protocol invariants.
std::string protocol_violation(const EvalReport& r) {
  if (r.runs.empty()) return "no runs";
  double sum = 0.0;
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    const RunRecord& run = r.runs[i];
    std::size_t total = 0, trace = 0;
    for (std::size_t a = 0; a < run.confusion.size(); ++a) {
      for (std::size_t v : run.confusion[a]) total += v;
      if (a < run.confusion[a].size()) trace += run.confusion[a][a];
    }
    if (total != run.test_count) return "run " + std::to_string(i) + ": confusion sums to " + std::to_string(total);
    if (std::fabs(static_cast<double>(trace) / static_cast<double>(total) - run.accuracy) > 1e-12) {
      return "run " + std::to_string(i) + ": trace/total differs from accuracy";
    }
    sum += run.accuracy;
  }
  const double mean = sum / static_cast<double>(r.runs.size());
  double ss = 0.0;
  for (const RunRecord& run : r.runs) ss += (run.accuracy - mean) * (run.accuracy - mean);
  const double sd = std::sqrt(ss / static_cast<double>(r.runs.size()));
  if (std::fabs(mean - r.accuracy_mean) > 1e-12) return "accuracy_mean differs from recomputation";
  if (std::fabs(sd - r.accuracy_std) > 1e-12) return "accuracy_std differs from recomputation";
  return "";
}

// ----- 1: gradient correctness --------------------------------------------

Outcome criterion1(const Context&) {
  const double t0 = cpu_seconds();
  const std::vector<GradCheckCase> cases = run_gradcheck_suite(0);
  const double cpu = cpu_seconds() - t0;
  std::size_t failed = 0;
  double worst_ratio = 0.0;
  std::string worst;
  for (const GradCheckCase& c : cases) {
    failed += !c.passed();
    const double ratio = c.result.max_relative_error / c.threshold;
    if (ratio >= worst_ratio) worst_ratio = ratio, worst = c.name + " " + fmt("%.2e", c.result.max_relative_error);
  }
  const bool ok = failed == 0 && !cases.empty() && cpu < 120.0;
  return {ok, std::to_string(cases.size()) + " networks, " + std::to_string(failed) + " over threshold, closest " +
                  worst + ", cpu " + fmt("%.1f", cpu) + " s (limit 120)"};
}

// ----- 2: convolution / pooling oracles -----------------------------------

Tensor random_tensor(Shape shape, SeededRng& rng) {
  Tensor t(std::move(shape));
  for (double& v : t.values()) v = rng.uniform(-1.0, 1.0);
  return t;
}

// [n x c x h x w] input, [f x c x kh x kw] kernels, bias per filter.
Tensor oracle_conv(const Tensor& x, const Tensor& k, const Tensor& bias) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t f = k.dim(0), kh = k.dim(2), kw = k.dim(3), oh = h - kh + 1, ow = w - kw + 1;
  Tensor y({n, f, oh, ow});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t fi = 0; fi < f; ++fi)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = bias[fi];
          for (std::size_t ci = 0; ci < c; ++ci)
            for (std::size_t a = 0; a < kh; ++a)
              for (std::size_t b = 0; b < kw; ++b)
                acc += k[((fi * c + ci) * kh + a) * kw + b] * x[((s * c + ci) * h + i + a) * w + j + b];
          y[((s * f + fi) * oh + i) * ow + j] = acc;
        }
  return y;
}

// 2x2 (or 1x2 when h == 1) max windows with first-wins ties.
PoolResult oracle_pool(const Tensor& x, bool one_d) {
  const std::size_t n = x.dim(0), c = x.dim(1);
  const std::size_t h = one_d ? 1 : x.dim(2), w = one_d ? x.dim(2) : x.dim(3);
  const std::size_t ph = one_d ? 1 : h / 2, pw = w / 2, wh = one_d ? 1 : 2;
  PoolResult r;
  r.output = one_d ? Tensor({n, c, pw}) : Tensor({n, c, ph, pw});
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t ci = 0; ci < c; ++ci)
      for (std::size_t i = 0; i < ph; ++i)
        for (std::size_t j = 0; j < pw; ++j) {
          std::size_t best = 0;
          double best_v = -INFINITY;
          for (std::size_t a = 0; a < wh; ++a)
            for (std::size_t b = 0; b < 2; ++b) {
              const std::size_t idx = ((s * c + ci) * h + i * wh + a) * w + j * 2 + b;
              if (x[idx] > best_v) best_v = x[idx], best = idx;
            }
          r.output[((s * c + ci) * ph + i) * pw + j] = best_v;
          r.argmax.push_back(best);
        }
  return r;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return INFINITY;
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

Outcome criterion2(const Context&) {
  const double t0 = cpu_seconds();
  SeededRng rng(kSeed, Stream::data);
  double conv_err = 0.0;
  std::size_t pool_mismatch = 0, cases = 0;
  for (int trial = 0; trial < 400; ++trial, ++cases) {
    const std::size_t n = 1 + rng.below(4), c = 1 + rng.below(4), f = 1 + rng.below(5);
    const int kind = trial % 4;
    if (kind == 0) {
      // conv1d: a single-row image, both through the engine and the per-sample routine.
      const std::size_t len = 3 + rng.below(40), width = 1 + rng.below(std::min<std::size_t>(len, 5));
      const Tensor x = random_tensor({n, c, 1, len}, rng), k = random_tensor({f, c, 1, width}, rng);
      const Tensor bias = random_tensor({f}, rng);
      const Tensor ref = oracle_conv(x, k, bias);
      conv_err = std::max(conv_err, max_abs_diff(conv2d_forward(x, k, bias.values()), ref));
      const Tensor x0({c, len}, std::vector<double>(x.data(), x.data() + c * len));
      Tensor y0 = conv1d_valid(x0, k.reshaped({f, c, width}));
      for (std::size_t i = 0; i < y0.size(); ++i) y0[i] += bias[i / (len - width + 1)];
      const Tensor ref0({f, len - width + 1}, std::vector<double>(ref.data(), ref.data() + y0.size()));
      conv_err = std::max(conv_err, max_abs_diff(y0, ref0));
    } else if (kind == 1) {
      const std::size_t h = 2 + rng.below(24), w = 2 + rng.below(24);
      const std::size_t kh = 1 + rng.below(std::min<std::size_t>(h, 5)), kw = 1 + rng.below(std::min<std::size_t>(w, 5));
      const Tensor x = random_tensor({n, c, h, w}, rng), k = random_tensor({f, c, kh, kw}, rng);
      const Tensor bias = random_tensor({f}, rng);
      const Tensor ref = oracle_conv(x, k, bias);
      conv_err = std::max(conv_err, max_abs_diff(conv2d_forward(x, k, bias.values()), ref));
      const Tensor x0({c, h, w}, std::vector<double>(x.data(), x.data() + c * h * w));
      Tensor y0 = conv2d_valid(x0, k);
      const std::size_t plane = (h - kh + 1) * (w - kw + 1);
      for (std::size_t i = 0; i < y0.size(); ++i) y0[i] += bias[i / plane];
      const Tensor ref0(y0.shape(), std::vector<double>(ref.data(), ref.data() + y0.size()));
      conv_err = std::max(conv_err, max_abs_diff(y0, ref0));
    } else {
      const bool one_d = kind == 2;
      // Coarse values make ties common, exercising the tie rule.
      Tensor x = one_d ? Tensor({n, c, 2 + rng.below(40)}) : Tensor({n, c, 2 + rng.below(20), 2 + rng.below(20)});
      for (double& v : x.values()) v = std::round(rng.uniform(-3.0, 3.0));
      const PoolResult got = one_d ? maxpool1d_forward(x) : maxpool2d_forward(x);
      const PoolResult ref = oracle_pool(x, one_d);
      if (max_abs_diff(got.output, ref.output) != 0.0 || got.argmax != ref.argmax) ++pool_mismatch;
      const Tensor grad = random_tensor(ref.output.shape(), rng);
      const Tensor back = maxpool_backward(grad, got.argmax, x.shape());
      Tensor expected(x.shape());
      for (std::size_t i = 0; i < ref.argmax.size(); ++i) expected[ref.argmax[i]] += grad[i];
      if (max_abs_diff(back, expected) > 1e-12) ++pool_mismatch;
    }
  }
  const double cpu = cpu_seconds() - t0;
  const bool ok = conv_err <= 1e-12 && pool_mismatch == 0 && cpu < 30.0;
  return {ok, std::to_string(cases) + " cases (100 each of conv1d, conv2d, pool1d, pool2d), conv max error " + fmt("%.2e", conv_err) + " (limit 1e-12), " +
                  std::to_string(pool_mismatch) + " pooling mismatches, cpu " + fmt("%.2f", cpu) + " s (limit 30)"};
}

// ----- 3: determinism of the CLI benchmark ---------------------------------

int run_command(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::map<std::string, std::string> tree_contents(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

Outcome criterion3(const Context& ctx) {
  if (ctx.cli.empty()) return {false, "no CLI path given (--cli)"};
  const fs::path a = ctx.work / "determinism_a", b = ctx.work / "determinism_b";
  for (const fs::path& dir : {a, b}) {
    fs::remove_all(dir);
    const std::string cmd =
        "\"" + ctx.cli + "\" benchmark --synth --seed 7 --out \"" + dir.string() + "\" > \"" + dir.string() + ".log\" 2>&1";
    const int code = run_command(cmd);
    if (code != 0) return {false, "benchmark exited with " + std::to_string(code) + ", see " + dir.string() + ".log"};
  }
  const auto fa = tree_contents(a), fb = tree_contents(b);
  std::size_t compared = 0, reports = 0, models = 0, curves = 0;
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : fa) {
    if (fs::path(name).filename() == "timing.json") continue;  // wall-clock seconds
    ++compared;
    reports += name.ends_with("report.json");
    models += name.ends_with(".tdml");
    curves += name.find("curve") != std::string::npos;
    const auto it = fb.find(name);
    if (it == fb.end() || it->second != bytes) differing.push_back(name);
  }
  for (const auto& [name, bytes] : fb)
    if (!fa.count(name)) differing.push_back(name);
  const bool ok = differing.empty() && reports > 0 && models > 0 && curves > 0;
  std::string detail = std::to_string(compared) + " files (" + std::to_string(reports) + " reports, " +
                       std::to_string(models) + " models, " + std::to_string(curves) + " curves), " +
                       std::to_string(differing.size()) + " differ";
  if (!differing.empty()) detail += ", first " + differing.front();
  return {ok, detail};
}

// ----- 4: slip raw vs filtered ---------------------------------------------

Outcome criterion4(const Context& ctx) {
  const double t0 = cpu_seconds();
  const DataSource src = slip_source();
  const EvalReport cnn = experiment("slip-cnn", InputMode::raw, src);
  const EvalReport svm_raw = experiment("slip-svm", InputMode::raw, src);
  const EvalReport svm_filtered = experiment("slip-svm", InputMode::filtered, src);
  const double cpu = cpu_seconds() - t0;
  store(ctx, "slip-cnn_raw", cnn);
  store(ctx, "slip-svm_raw", svm_raw);
  store(ctx, "slip-svm_filtered", svm_filtered);
  const bool a = cnn.accuracy_mean >= 0.85 && svm_filtered.accuracy_mean >= 0.85;
  const double gap = svm_raw.accuracy_mean - svm_filtered.accuracy_mean;
  const bool b = gap <= -0.15;
  const bool ok = a && b && cpu < 300.0;
  return {ok, std::string("(a) ") + (a ? "met" : "missed") + ": " + summary(cnn) + ", " + summary(svm_filtered) +
                  " (need >= 0.85); (b) " + (b ? "met" : "missed") + ": svm raw - filtered = " + fmt("%+.4f", gap) +
                  " (need <= -0.15); cpu " + fmt("%.0f", cpu) + " s (limit 300)"};
}

// ----- 5: image raw vs filtered --------------------------------------------

Outcome criterion5(const Context& ctx) {
  const double t0 = cpu_seconds();
  const DataSource src = terrain_source();
  const EvalReport dnn_raw = experiment("image-dnn", InputMode::raw, src);
  store(ctx, "image-dnn_raw", dnn_raw);
  const EvalReport dnn_hog = experiment("image-dnn", InputMode::filtered, src);
  store(ctx, "image-dnn_filtered", dnn_hog);
  const EvalReport cnn = experiment("image-cnn1", InputMode::raw, src);
  store(ctx, "image-cnn1_raw", cnn);
  const double cpu = cpu_seconds() - t0;
  const bool a = cnn.accuracy_mean >= 0.80;
  const double gain = dnn_hog.accuracy_mean - dnn_raw.accuracy_mean;
  const bool b = gain >= 0.10;
  const bool ok = a && b && cpu < 900.0;
  return {ok, std::string("(a) ") + (a ? "met" : "missed") + ": " + summary(cnn) + " (need >= 0.80); (b) " +
                  (b ? "met" : "missed") + ": dnn filtered - raw = " + fmt("%+.4f", gain) + " (" + summary(dnn_hog) +
                  " vs " + summary(dnn_raw) + ", need >= 0.10); cpu " + fmt("%.0f", cpu) + " s (limit 900)"};
}

// ----- 6: epoch stability ---------------------------------------------------

EvalReport load_or_run(const Context& ctx, const std::string& key, const std::string& name,
                       const std::function<DataSource()>& source, std::string& provenance) {
  const fs::path p = cached_report(ctx, key);
  if (fs::exists(p)) {
    provenance += " " + key + " cached";
    return EvalReport::from_json(nlohmann::json::parse(read_file(p)));
  }
  provenance += " " + key + " computed";
  EvalReport r = experiment(name, InputMode::raw, source());
  store(ctx, key, r);
  return r;
}

Outcome criterion6(const Context& ctx) {
  std::string provenance;
  const EvalReport slip = load_or_run(ctx, "slip-cnn_raw", "slip-cnn", slip_source, provenance);
  const EvalReport image = load_or_run(ctx, "image-cnn1_raw", "image-cnn1", terrain_source, provenance);
  auto describe = [](const std::optional<std::size_t>& e) { return e ? std::to_string(*e) : std::string("never"); };
  // Check every run's curve as well as the mean curve.
  auto all_runs = [](const EvalReport& r, std::size_t limit) {
    std::size_t stable = 0;
    for (const RunRecord& run : r.runs) {
      const auto e = epoch_stability(run.epoch_curve, 5, 0.02);
      stable += e && *e <= limit;
    }
    return stable;
  };
  const auto s = epoch_stability(slip.mean_epoch_curve, 5, 0.02);
  const auto i = epoch_stability(image.mean_epoch_curve, 5, 0.02);
  const bool ok = s && *s <= 30 && i && *i <= 35;
  return {ok, "slip-cnn mean-curve epoch " + describe(s) + " (limit 30, " + std::to_string(all_runs(slip, 30)) + "/" +
                  std::to_string(slip.runs.size()) + " runs stable), image-cnn1 mean-curve epoch " + describe(i) +
                  " (limit 35, " + std::to_string(all_runs(image, 35)) + "/" + std::to_string(image.runs.size()) +
                  " runs stable);" + provenance};
}

// ----- 7: SVM soundness ------------------------------------------------------

Outcome criterion7(const Context&) {
  std::vector<std::string> problems;
  std::size_t audited = 0;
  auto audit_all = [&](const MulticlassSvmModel& m, const std::string& what) {
    for (std::size_t k = 0; k < m.audits.size(); ++k) {
      ++audited;
      const KktAudit& a = m.audits[k];
      if (!a.passed || a.max_violation > 1e-3 || a.equality_residual > 1e-3 || !a.box_ok) {
        problems.push_back(what + " machine " + std::to_string(k) + " violation " + fmt("%.2e", a.max_violation));
      }
    }
  };

  // The slip machines under the criterion-4 data, one 70/30 split per mode.
  const DataSource src = slip_source();
  const ZooEntry svm = build("slip-svm");
  for (InputMode mode : {InputMode::raw, InputMode::filtered}) {
    const LabeledDataset data = prepare_dataset(svm, mode, src, {});
    const Split split = holdout_split(data.size(), 0.7, kSeed);
    const LearnerModel m = fit_learner(svm, mode, data.subset(split.train), default_options(svm));
    audit_all(m.svm, std::string("slip ") + to_string(mode));
  }

  // Separable blobs: centres 8 sigma apart on a circle.
  std::size_t blob_errors = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SeededRng rng(seed, Stream::data);
    const std::size_t k = 2 + seed % 3, per = 40;
    Tensor x({k * per, 2});
    std::vector<int> labels;
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t i = 0; i < per; ++i) {
        const double angle = 2.0 * 3.141592653589793 * static_cast<double>(c) / static_cast<double>(k);
        x.at(c * per + i, 0) = 4.0 * std::cos(angle) + rng.normal(0.0, 0.5);
        x.at(c * per + i, 1) = 4.0 * std::sin(angle) + rng.normal(0.0, 0.5);
        labels.push_back(static_cast<int>(c));
      }
    const MulticlassSvmModel m = one_vs_one_train(x, labels, {});
    audit_all(m, "blobs");
    const std::vector<int> predicted = one_vs_one_predict(m, x);
    for (std::size_t i = 0; i < labels.size(); ++i) blob_errors += predicted[i] != labels[i];
  }
  if (blob_errors) problems.push_back(std::to_string(blob_errors) + " blob training errors");

  // Two points at -1 and +1.
  const Tensor two({2, 1}, std::vector<double>{-1.0, 1.0});
  const std::vector<int> y{-1, 1};
  const SmoResult fit = smo_train(two, y, {});
  const double mid = svm_decision(fit.model, std::vector<double>{0.0});
  if (std::fabs(fit.model.bias) > 1e-6) problems.push_back("two-point bias " + fmt("%.2e", fit.model.bias));
  if (std::fabs(mid) > 1e-6) problems.push_back("two-point decision at midpoint " + fmt("%.2e", mid));

  const bool ok = problems.empty();
  std::string detail = std::to_string(audited) + " machines audited, blob training errors " +
                       std::to_string(blob_errors) + ", two-point bias " + fmt("%.1e", fit.model.bias) +
                       ", f(0) " + fmt("%.1e", mid);
  if (!ok) detail += "; first problem: " + problems.front();
  return {ok, detail};
}

// ----- 8: protocol invariants ------------------------------------------------

Outcome criterion8(const Context& ctx) {
  std::size_t checked = 0;
  std::vector<std::string> problems;
  auto check = [&](const EvalReport& r, const std::string& where) {
    ++checked;
    const std::string v = protocol_violation(r);
    if (!v.empty()) problems.push_back(where + ": " + v);
  };

  // Fresh reports from every zoo entry in every mode it accepts, kept small.
  DataSource slip;
  slip.task = Task::slip;
  slip.frames = synth_slip(100, 50, kSeed);
  DataSource images;
  images.task = Task::image;
  images.images = synth_terrain(six_terrain_classes(), 8, 64, kSeed);
  for (const std::string& name : zoo_names()) {
    const ZooEntry e = build(name);
    for (InputMode mode : {InputMode::raw, InputMode::filtered}) {
      if (!e.supports(mode)) continue;
      const LabeledDataset data = prepare_dataset(e, mode, e.task == Task::slip ? slip : images, {});
      LearnerOptions options = default_options(e);
      options.train.epochs = 2;
      SplitPlan plan = SplitPlan::standard(kSeed, e.convolutional() && e.task == Task::image ? 3 : 10);
      const EvalReport r = run_experiment(e, mode, data, plan, options);
      check(r, name + "/" + to_string(mode));
      check(EvalReport::from_json(nlohmann::json::parse(r.to_json().dump())), name + "/" + to_string(mode) + " json");
    }
  }
  // Plus every report already written by the other criteria.
  std::size_t on_disk = 0;
  if (fs::exists(ctx.work)) {
    for (const auto& f : fs::recursive_directory_iterator(ctx.work)) {
      const std::string fname = f.path().filename().string();
      if (!f.is_regular_file() || !fname.ends_with(".json") ||
          (fname != "report.json" && !fname.starts_with("report_"))) {
        continue;
      }
      ++on_disk;
      check(EvalReport::from_json(nlohmann::json::parse(read_file(f.path()))), f.path().string());
    }
  }
  std::string detail = std::to_string(checked) + " reports checked (" + std::to_string(on_disk) +
                       " from earlier criteria), " + std::to_string(problems.size()) + " violations";
  if (!problems.empty()) detail += "; first: " + problems.front();
  return {problems.empty(), detail};
}

// ----- 9: serialization ------------------------------------------------------

bool same_bits(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::equal(a.values().begin(), a.values().end(), b.values().begin(),
                    [](double x, double y) { return std::memcmp(&x, &y, sizeof x) == 0; });
}

Outcome criterion9(const Context& ctx) {
  DataSource slip;
  slip.task = Task::slip;
  slip.frames = synth_slip(100, 50, kSeed);
  DataSource images;
  images.task = Task::image;
  images.images = synth_terrain(six_terrain_classes(), 6, 64, kSeed);
  std::size_t models = 0;
  std::vector<std::string> problems;
  SeededRng rng(kSeed, Stream::data);
  for (const std::string& name : zoo_names()) {
    const ZooEntry e = build(name);
    for (InputMode mode : {InputMode::raw, InputMode::filtered}) {
      if (!e.supports(mode)) continue;
      ++models;
      const std::string tag = name + "/" + to_string(mode);
      const LabeledDataset data = prepare_dataset(e, mode, e.task == Task::slip ? slip : images, {});
      LearnerOptions options = default_options(e);
      options.train.epochs = 2;
      const LearnerModel m = fit_learner(e, mode, data, options);
      const fs::path path = ctx.work / "models" / (name + "_" + to_string(mode) + ".tdml");
      fs::create_directories(path.parent_path());
      save_learner(path, m);
      const LearnerModel back = load_learner(path);
      if (encode_model(to_model_file(back)) != read_file(path)) problems.push_back(tag + ": re-encoding differs");
      if (m.kind == LearnerKind::network) {
        for (std::size_t t = 0; t < m.network.state.params.size(); ++t)
          if (!same_bits(m.network.state.params[t], back.network.state.params[t]))
            problems.push_back(tag + ": parameter tensor " + std::to_string(t) + " differs");
      }
      Shape shape = data.sample_shape();
      shape.insert(shape.begin(), 1000);
      Tensor inputs(shape);
      for (double& v : inputs.values()) v = mode == InputMode::raw && e.task == Task::image ? rng.uniform() : rng.normal();
      if (predict_learner(m, inputs) != predict_learner(back, inputs)) problems.push_back(tag + ": predictions differ");
      if (m.kind == LearnerKind::network) {
        const Prediction pa = predict(m.network, m.standardizer.apply(inputs));
        const Prediction pb = predict(back.network, back.standardizer.apply(inputs));
        if (!same_bits(pa.probabilities, pb.probabilities)) problems.push_back(tag + ": probabilities differ");
      }
    }
  }
  std::string detail = std::to_string(models) + " models round-tripped, 1000 random inputs each, " +
                       std::to_string(problems.size()) + " mismatches";
  if (!problems.empty()) detail += "; first: " + problems.front();
  return {problems.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> selected;
  Context ctx;
  std::string work = "acceptance_work";
  app.add_option("--criterion", selected, "criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--work", work, "scratch directory shared between criteria");
  app.add_option("--cli", ctx.cli, "path of the terradeep executable");
  CLI11_PARSE(app, argc, argv);
  ctx.work = fs::absolute(work);
  fs::create_directories(ctx.work);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  const std::vector<std::function<Outcome(const Context&)>> criteria = {
      criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7, criterion8, criterion9};
  bool all = true;
  for (int c : selected) {
    Outcome o;
    try {
      o = criteria[static_cast<std::size_t>(c - 1)](ctx);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d: %s %s\n", c, o.passed ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all = all && o.passed;
  }
  return all ? 0 : 1;
}
