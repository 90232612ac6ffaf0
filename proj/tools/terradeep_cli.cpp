// terradeep command-line front end. Everything goes through the C API.
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "terradeep/terradeep.h"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Carries a C API status out of nested helpers.
struct Failure {
  int code;
  std::string message;
};

void check(td_status s, const std::string& what) {
  if (s != TD_OK) throw Failure{static_cast<int>(s), what + ": " + td_last_error()};
}

std::string take_string(char* text) {
  std::string s = text ? text : "";
  td_string_free(text);
  return s;
}

struct DatasetDeleter {
  void operator()(td_dataset* d) const { td_dataset_free(d); }
};
struct ModelDeleter {
  void operator()(td_model* m) const { td_model_free(m); }
};
struct ReportDeleter {
  void operator()(td_report* r) const { td_report_free(r); }
};
using DatasetPtr = std::unique_ptr<td_dataset, DatasetDeleter>;
using ModelPtr = std::unique_ptr<td_model, ModelDeleter>;
using ReportPtr = std::unique_ptr<td_report, ReportDeleter>;

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{2, "cannot write '" + path.string() + "'"};
  out << text;
}

// ExperimentConfig: JSON file values first, then explicitly given flags.
struct Settings {
  std::string task = "slip";
  std::string learner;
  std::string mode = "raw";
  std::string data;
  bool synth = false;
  std::size_t nw = 50;
  std::size_t size = 128;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch;
  std::uint64_t seed = 0;
  std::string out = "terradeep_out";
  std::size_t runs = 10;
  std::string classes;  // comma-separated terrain classes; empty = all
  std::size_t per_class = 0;  // 0 = task default
  std::size_t window_stride = 4;
  std::string model;

  ordered_json echo() const {
    ordered_json j;
    j["task"] = task;
    if (!learner.empty()) j["learner"] = learner;
    j["input_mode"] = mode;
    if (!data.empty()) {
      j["data"] = data;
    } else {
      j["synth"] = {{"per_class", per_class_or_default()}, {"seed", seed}};
      if (task == "image") j["synth"]["classes"] = classes;
    }
    j["nw"] = nw;
    if (task == "image") j["image_size"] = size;
    if (epochs) j["epochs"] = *epochs;
    if (batch) j["batch"] = *batch;
    j["seed"] = seed;
    j["runs"] = runs;
    j["window_stride"] = window_stride;
    return j;
  }

  std::size_t per_class_or_default() const {
    if (per_class) return per_class;
    return task == "slip" ? 1000 : 100;
  }
};

template <typename T>
void from_config(const json& j, const char* key, T& target) {
  if (j.contains(key) && !j[key].is_null()) {
    try {
      target = j[key].get<T>();
    } catch (const json::exception&) {
      throw Failure{1, std::string("config key '") + key + "' has the wrong type"};
    }
  }
}

void load_config_file(const std::string& path, Settings& s) {
  std::ifstream in(path);
  if (!in) throw Failure{1, "cannot read config file '" + path + "'"};
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Failure{1, "config file '" + path + "' is not valid JSON: " + e.what()};
  }
  if (!j.is_object()) throw Failure{1, "config file must hold a JSON object"};
  static const std::vector<std::string> keys = {"task",  "learner", "input_mode", "mode",     "data",
                                                "synth", "nw",      "image_size", "size",     "epochs",
                                                "batch", "seed",    "out",        "runs",     "classes",
                                                "per_class", "window_stride", "model"};
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) throw Failure{1, "unknown config key '" + k + "'"};
  }
  from_config(j, "task", s.task);
  from_config(j, "learner", s.learner);
  from_config(j, "mode", s.mode);
  from_config(j, "input_mode", s.mode);
  from_config(j, "data", s.data);
  if (j.contains("synth")) {
    if (j["synth"].is_boolean()) {
      s.synth = j["synth"].get<bool>();
    } else if (j["synth"].is_object()) {
      s.synth = true;
      from_config(j["synth"], "per_class", s.per_class);
      from_config(j["synth"], "classes", s.classes);
    }
  }
  from_config(j, "nw", s.nw);
  from_config(j, "size", s.size);
  from_config(j, "image_size", s.size);
  if (j.contains("epochs")) s.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("batch")) s.batch = j["batch"].get<std::size_t>();
  from_config(j, "seed", s.seed);
  from_config(j, "out", s.out);
  from_config(j, "runs", s.runs);
  from_config(j, "classes", s.classes);
  from_config(j, "per_class", s.per_class);
  from_config(j, "window_stride", s.window_stride);
  from_config(j, "model", s.model);
}

DatasetPtr open_dataset(const Settings& s) {
  td_dataset* raw = nullptr;
  if (!s.data.empty()) {
    if (s.task == "slip") {
      check(td_dataset_load_sensor_csv(s.data.c_str(), &raw), "loading " + s.data);
    } else {
      check(td_dataset_load_image_dir(s.data.c_str(), s.size, &raw), "loading " + s.data);
    }
  } else if (s.task == "slip") {
    check(td_dataset_synth_slip(s.per_class_or_default(), s.nw, s.seed, &raw), "synthesizing slip data");
  } else {
    check(td_dataset_synth_terrain(s.classes.c_str(), s.per_class_or_default(), s.size, s.seed, &raw),
          "synthesizing terrain images");
  }
  return DatasetPtr(raw);
}

json learner_config(const Settings& s, const std::string& learner, const std::string& mode) {
  json c{{"learner", learner}, {"mode", mode}, {"nw", s.nw}, {"seed", s.seed}, {"window_stride", s.window_stride}};
  if (s.epochs) c["epochs"] = *s.epochs;
  if (s.batch) c["batch"] = *s.batch;
  return c;
}

std::size_t thread_cap() {
  const char* env = std::getenv("TERRADEEP_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const unsigned long v = std::strtoul(env, &end, 10);
  if (*end != '\0' || v == 0) throw Failure{1, "TERRADEEP_THREADS must be a positive integer"};
  return v;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

// ----- subcommands ----------------------------------------------------------

int cmd_synth(const Settings& s) {
  if (!s.data.empty()) throw Failure{1, "synth generates data; --data is not accepted"};
  DatasetPtr ds = open_dataset(s);
  const fs::path target = s.task == "slip" ? fs::path(s.out) / "slip.csv" : fs::path(s.out);
  check(td_dataset_export(ds.get(), target.string().c_str()), "exporting");
  write_text(fs::path(s.out) / "config.json", s.echo().dump(2) + "\n");
  std::cout << "wrote " << target.string() << "\n";
  return 0;
}

int cmd_features(const Settings& s) {
  DatasetPtr ds = open_dataset(s);
  const fs::path target = fs::path(s.out) / "features.csv";
  check(td_dataset_write_features_csv(ds.get(), s.nw, target.string().c_str()), "writing features");
  std::cout << "wrote " << target.string() << "\n";
  return 0;
}

int cmd_train(const Settings& s) {
  if (s.learner.empty()) throw Failure{1, "train needs --learner"};
  DatasetPtr ds = open_dataset(s);
  td_model* raw = nullptr;
  check(td_model_train(ds.get(), learner_config(s, s.learner, s.mode).dump().c_str(), &raw), "training");
  ModelPtr model(raw);
  const fs::path dir(s.out);
  fs::create_directories(dir);
  check(td_model_save(model.get(), (dir / "model.tdml").string().c_str()), "saving model");
  check(td_model_write_curve_csv(model.get(), (dir / "curve.csv").string().c_str()), "writing curve");
  ordered_json echo = s.echo();
  echo["learner"] = s.learner;
  write_text(dir / "config.json", echo.dump(2) + "\n");
  std::cout << "wrote " << (dir / "model.tdml").string() << "\n";
  return 0;
}

int cmd_eval(Settings s) {
  if (s.model.empty()) throw Failure{1, "eval needs --model"};
  td_model* raw = nullptr;
  check(td_model_load(s.model.c_str(), &raw), "loading model");
  ModelPtr model(raw);
  const json info = json::parse(take_string([&] {
    char* out = nullptr;
    check(td_model_info_json(model.get(), &out), "reading model");
    return out;
  }()));
  s.task = info.at("task").get<std::string>();
  DatasetPtr ds = open_dataset(s);
  td_report* rep = nullptr;
  check(td_model_evaluate(model.get(), ds.get(), &rep), "evaluating");
  ReportPtr report(rep);
  check(td_report_write(report.get(), s.out.c_str()), "writing report");
  double mean = 0, sd = 0;
  check(td_report_accuracy(report.get(), &mean, &sd), "reading report");
  std::cout << "accuracy " << fmt(mean) << "\n";
  return 0;
}

int cmd_benchmark(const Settings& s) {
  DatasetPtr ds = open_dataset(s);
  const json catalog = json::parse(take_string([] {
    char* out = nullptr;
    check(td_zoo_catalog_json(&out), "reading catalog");
    return out;
  }()));
  const fs::path dir(s.out);
  fs::create_directories(dir);
  const std::size_t threads = thread_cap();

  std::string csv = "learner,input_mode,accuracy_mean,accuracy_std,stable_epoch\n";
  std::string md = "| learner | input | accuracy mean | accuracy std | stable epoch |\n|---|---|---|---|---|\n";
  ordered_json timing = ordered_json::object();
  bool matched = false;
  for (const json& entry : catalog) {
    const std::string name = entry.at("name").get<std::string>();
    if (entry.at("task").get<std::string>() != s.task) continue;
    if (!s.learner.empty() && s.learner != name) continue;
    matched = true;
    const auto modes = entry.at("input_modes").get<std::vector<std::string>>();
    for (const std::string mode : {"raw", "filtered"}) {
      if (std::find(modes.begin(), modes.end(), mode) == modes.end()) {
        csv += name + "," + mode + ",n/a,n/a,n/a\n";
        md += "| " + name + " | " + mode + " | n/a | n/a | n/a |\n";
        continue;
      }
      std::cerr << "benchmark: " << name << " (" << mode << ")\n";
      json cfg = learner_config(s, name, mode);
      cfg["runs"] = s.runs;
      cfg["threads"] = threads;
      td_report* rep = nullptr;
      td_model* first = nullptr;
      check(td_experiment_run(ds.get(), cfg.dump().c_str(), &rep, &first), name + " (" + mode + ")");
      ReportPtr report(rep);
      ModelPtr model(first);
      const fs::path cell = dir / (name + "_" + mode);
      check(td_report_write(report.get(), cell.string().c_str()), "writing report");
      check(td_model_save(model.get(), (cell / "model_run0.tdml").string().c_str()), "saving model");
      check(td_model_write_curve_csv(model.get(), (cell / "curve_run0.csv").string().c_str()), "writing curve");
      double mean = 0, sd = 0;
      int64_t stable = -1;
      check(td_report_accuracy(report.get(), &mean, &sd), "reading report");
      check(td_report_stable_epoch(report.get(), &stable), "reading report");
      const std::string stable_text = stable < 0 ? "never" : std::to_string(stable);
      csv += name + "," + mode + "," + fmt(mean) + "," + fmt(sd) + "," + stable_text + "\n";
      md += "| " + name + " | " + mode + " | " + fmt(mean) + " | " + fmt(sd) + " | " + stable_text + " |\n";
      timing[name + "_" + mode] = td_report_wall_seconds(report.get());
    }
  }
  if (!matched) throw Failure{1, "no " + s.task + " learner named '" + s.learner + "'"};
  write_text(dir / "summary.csv", csv);
  write_text(dir / "summary.md", md);
  write_text(dir / "config.json", s.echo().dump(2) + "\n");
  // Wall times vary between runs, so they live apart from the reports.
  write_text(dir / "timing.json", timing.dump(2) + "\n");
  std::cout << md;
  return 0;
}

int cmd_gradcheck(const Settings& s) {
  const json results = json::parse(take_string([&] {
    char* out = nullptr;
    check(td_gradcheck_run(s.seed, &out), "gradient check");
    return out;
  }()));
  bool ok = true;
  for (const json& r : results) {
    const bool passed = r.at("passed").get<bool>();
    ok = ok && passed;
    std::printf("%-18s max_rel_err %.3e  threshold %.0e  checked %3zu  %s\n", r.at("name").get<std::string>().c_str(),
                r.at("max_relative_error").get<double>(), r.at("threshold").get<double>(),
                r.at("checked").get<std::size_t>(), passed ? "ok" : "FAIL");
  }
  return ok ? 0 : 3;
}

int cmd_zoo() {
  std::cout << take_string([] {
    char* out = nullptr;
    check(td_zoo_catalog_json(&out), "reading catalog");
    return out;
  }());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"terradeep: slip and terrain classification experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(td_version()));

  Settings flags;
  std::string config_path;
  std::string seed_text;

  auto add_common = [&](CLI::App* sub, bool data_flags) {
    sub->add_option("--config", config_path, "JSON file with experiment settings (flags override it)");
    sub->add_option("--task", flags.task, "slip or image")->check(CLI::IsMember({"slip", "image"}));
    sub->add_option("--seed", flags.seed, "seed for every random stream");
    sub->add_option("--out", flags.out, "output directory");
    if (data_flags) {
      sub->add_option("--data", flags.data, "sensor CSV file (slip) or image directory (image)");
      sub->add_flag("--synth", flags.synth, "use synthetic data (the default when --data is absent)");
      sub->add_option("--nw", flags.nw, "variance window in samples")->check(CLI::PositiveNumber);
      sub->add_option("--size", flags.size, "image side in pixels")->check(CLI::IsMember({64, 128}));
      sub->add_option("--classes", flags.classes, "comma-separated synthetic terrain classes");
      sub->add_option("--per-class", flags.per_class, "synthetic samples per class")->check(CLI::PositiveNumber);
    }
  };
  auto add_learning = [&](CLI::App* sub) {
    sub->add_option("--learner", flags.learner, "zoo entry name");
    sub->add_option("--mode", flags.mode, "raw or filtered")->check(CLI::IsMember({"raw", "filtered"}));
    sub->add_option("--epochs", flags.epochs, "training epochs");
    sub->add_option("--batch", flags.batch, "mini-batch size")->check(CLI::PositiveNumber);
    sub->add_option("--window-stride", flags.window_stride, "frames between slip-cnn windows")
        ->check(CLI::PositiveNumber);
  };

  CLI::App* synth = app.add_subcommand("synth", "write a synthetic corpus as CSV / PGM");
  add_common(synth, true);
  CLI::App* features = app.add_subcommand("features", "write filtered features (variance vectors or HOG) as CSV");
  add_common(features, true);
  CLI::App* train = app.add_subcommand("train", "fit one zoo entry and save the model");
  add_common(train, true);
  add_learning(train);
  CLI::App* eval = app.add_subcommand("eval", "score a saved model on a dataset");
  add_common(eval, true);
  eval->add_option("--model", flags.model, "TDML model file");
  CLI::App* bench = app.add_subcommand("benchmark", "every zoo entry x input mode for one task");
  add_common(bench, true);
  add_learning(bench);
  bench->add_option("--runs", flags.runs, "hold-out runs per cell")->check(CLI::PositiveNumber);
  CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gradcheck->add_option("--seed", flags.seed, "seed for weights and inputs");
  app.add_subcommand("zoo", "print the learner catalog as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  try {
    CLI::App* sub = app.get_subcommands().front();
    Settings s;
    if (!config_path.empty()) load_config_file(config_path, s);
    auto given = [&](const char* name) {
      const CLI::Option* o = sub->get_option_no_throw(name);
      return o && o->count() > 0;
    };
    if (given("--task")) s.task = flags.task;
    if (given("--learner")) s.learner = flags.learner;
    if (given("--mode")) s.mode = flags.mode;
    if (given("--data")) s.data = flags.data;
    if (given("--synth")) s.synth = true;
    if (given("--nw")) s.nw = flags.nw;
    if (given("--size")) s.size = flags.size;
    if (given("--epochs")) s.epochs = flags.epochs;
    if (given("--batch")) s.batch = flags.batch;
    if (given("--seed")) s.seed = flags.seed;
    if (given("--out")) s.out = flags.out;
    if (given("--runs")) s.runs = flags.runs;
    if (given("--classes")) s.classes = flags.classes;
    if (given("--per-class")) s.per_class = flags.per_class;
    if (given("--window-stride")) s.window_stride = flags.window_stride;
    if (given("--model")) s.model = flags.model;
    if (s.task != "slip" && s.task != "image") throw Failure{1, "task must be slip or image"};
    if (s.synth && !s.data.empty()) throw Failure{1, "--synth and --data are mutually exclusive"};

    const std::string name = sub->get_name();
    if (name == "synth") return cmd_synth(s);
    if (name == "features") return cmd_features(s);
    if (name == "train") return cmd_train(s);
    if (name == "eval") return cmd_eval(s);
    if (name == "benchmark") return cmd_benchmark(s);
    if (name == "gradcheck") return cmd_gradcheck(s);
    if (name == "zoo") return cmd_zoo();
    std::cerr << app.help();
    return 1;
  } catch (const Failure& f) {
    std::cerr << "terradeep: " << f.message << "\n";
    return f.code;
  } catch (const json::exception& e) {
    std::cerr << "terradeep: malformed JSON: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "terradeep: " << e.what() << "\n";
    return 3;
  }
}
