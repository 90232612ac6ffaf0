#include "terradeep/terradeep.h"

#include <charconv>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "terradeep/datasets.hpp"
#include "terradeep/error.hpp"
#include "terradeep/evaluation.hpp"
#include "terradeep/gradcheck_suite.hpp"
#include "terradeep/learner.hpp"
#include "terradeep/zoo.hpp"

using namespace terradeep;
using nlohmann::json;

struct td_dataset {
  DataSource source;
  std::size_t dropped = 0;
  std::size_t image_size = 0;
};

struct td_model {
  LearnerModel model;
};

struct td_report {
  EvalReport report;
};

namespace {

thread_local std::string last_error;

td_status status_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::parameter:
    case ErrorKind::catalog: return TD_ERR_ARGUMENT;
    case ErrorKind::shape:
    case ErrorKind::dataset:
    case ErrorKind::format:
    case ErrorKind::outlier:
    case ErrorKind::label: return TD_ERR_DATA;
    case ErrorKind::state:
    case ErrorKind::internal: return TD_ERR_INTERNAL;
  }
  return TD_ERR_INTERNAL;
}

template <typename F>
td_status guarded(F&& body) {
  try {
    body();
    last_error.clear();
    return TD_OK;
  } catch (const Error& e) {
    last_error = std::string(to_string(e.kind())) + " error: " + e.what();
    return status_for(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return TD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = std::string("internal error: ") + e.what();
    return TD_ERR_INTERNAL;
  }
}

void require(const void* p, const char* what) {
  if (!p) throw ParameterError(std::string(what) + " must not be NULL");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw DatasetError("failed writing '" + path.string() + "'");
}

// Learner settings shared by training and experiments.
struct RunSettings {
  ZooEntry entry;
  InputMode mode = InputMode::raw;
  PrepareOptions prep;
  LearnerOptions options;
  std::size_t runs = 10;
  std::size_t threads = 1;
  std::uint64_t seed = 0;
};

RunSettings parse_settings(const char* text, bool experiment) {
  require(text, "config_json");
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParameterError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParameterError("config must be a JSON object");
  std::set<std::string> allowed = {"learner", "mode",  "nw",   "window_stride", "epochs", "batch",
                                   "eta",     "seed",  "svm_c", "svm_gamma"};
  if (experiment) allowed.insert({"runs", "threads"});
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ParameterError("unknown config key '" + key + "'");
  }
  auto get = [&]<typename T>(const char* key, T fallback) {
    if (!j.contains(key) || j[key].is_null()) return fallback;
    try {
      return j[key].get<T>();
    } catch (const json::exception&) {
      throw ParameterError(std::string("config key '") + key + "' has the wrong type");
    }
  };
  if (!j.contains("learner")) throw ParameterError("config needs a 'learner'");
  RunSettings s;
  s.entry = build(get("learner", std::string()));
  s.mode = parse_input_mode(get("mode", std::string("raw")));
  s.options = default_options(s.entry);
  s.prep.nw = get("nw", s.prep.nw);
  s.prep.window_stride = get("window_stride", s.prep.window_stride);
  if (s.prep.nw < 1) throw ParameterError("nw must be >= 1");
  s.options.train.epochs = get("epochs", s.options.train.epochs);
  s.options.train.batch_size = get("batch", s.options.train.batch_size);
  s.options.train.sgd_eta = get("eta", s.options.train.sgd_eta);
  s.options.svm.C = get("svm_c", s.options.svm.C);
  s.options.svm.gamma = get("svm_gamma", s.options.svm.gamma);
  s.seed = get("seed", std::uint64_t{0});
  s.options.train.seed = s.seed;
  s.runs = get("runs", s.runs);
  s.threads = get("threads", s.threads);
  s.options.train.validate();
  s.options.svm.validate();
  if (s.runs < 1) throw ParameterError("runs must be >= 1");
  return s;
}

std::size_t image_side(const td_dataset& ds) {
  return ds.source.task == Task::image ? ds.source.images.features.dim(2) : 0;
}

LearnerModel train_model(const td_dataset& ds, const RunSettings& s) {
  const LabeledDataset prepared = prepare_dataset(s.entry, s.mode, ds.source, s.prep);
  LearnerModel m = fit_learner(s.entry, s.mode, prepared, s.options);
  m.prep = s.prep;
  m.image_size = image_side(ds);
  return m;
}

}  // namespace

extern "C" {

const char* td_version(void) { return "1.0.0"; }

const char* td_last_error(void) { return last_error.c_str(); }

void td_string_free(char* text) { std::free(text); }

td_status td_dataset_synth_slip(size_t n_per_class, size_t nw, uint64_t seed, td_dataset** out) {
  return guarded([&] {
    require(out, "out");
    auto ds = std::make_unique<td_dataset>();
    ds->source.task = Task::slip;
    ds->source.frames = synth_slip(n_per_class, nw, seed);
    *out = ds.release();
  });
}

td_status td_dataset_synth_terrain(const char* classes, size_t images_per_class, size_t size, uint64_t seed,
                                   td_dataset** out) {
  return guarded([&] {
    require(out, "out");
    std::vector<std::string> names;
    if (classes && *classes) {
      std::stringstream ss(classes);
      for (std::string item; std::getline(ss, item, ',');) {
        if (!item.empty()) names.push_back(item);
      }
    } else {
      names = terrain_class_names();
    }
    auto ds = std::make_unique<td_dataset>();
    ds->source.task = Task::image;
    ds->source.images = synth_terrain(names, images_per_class, size, seed);
    ds->image_size = size;
    *out = ds.release();
  });
}

td_status td_dataset_load_sensor_csv(const char* path, td_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    SensorLog log = load_sensor_csv(path);
    auto ds = std::make_unique<td_dataset>();
    ds->source.task = Task::slip;
    ds->source.frames = std::move(log.frames);
    ds->dropped = log.dropped_count;
    if (ds->source.frames.empty()) throw DatasetError(std::string(path) + ": no usable rows");
    *out = ds.release();
  });
}

td_status td_dataset_load_image_dir(const char* path, size_t size, td_dataset** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto ds = std::make_unique<td_dataset>();
    ds->source.task = Task::image;
    ds->source.images = load_image_dir(path, size);
    ds->image_size = size;
    *out = ds.release();
  });
}

td_status td_dataset_info_json(const td_dataset* dataset, char** out_json) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out_json, "out_json");
    nlohmann::ordered_json j;
    j["task"] = to_string(dataset->source.task);
    if (dataset->source.task == Task::slip) {
      j["samples"] = dataset->source.frames.size();
      j["class_names"] = slip_class_names();
      j["dropped_rows"] = dataset->dropped;
    } else {
      j["samples"] = dataset->source.images.size();
      j["class_names"] = dataset->source.images.class_names;
      j["image_size"] = dataset->image_size;
    }
    *out_json = dup_string(j.dump(2));
  });
}

td_status td_dataset_export(const td_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(path, "path");
    if (dataset->source.task == Task::slip) {
      const std::filesystem::path p(path);
      if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
      write_sensor_csv(p, dataset->source.frames);
    } else {
      export_image_dataset(dataset->source.images, path);
    }
  });
}

td_status td_dataset_write_features_csv(const td_dataset* dataset, size_t nw, const char* path) {
  return guarded([&] {
    require(dataset, "dataset");
    require(path, "path");
    LabeledDataset features;
    std::string header;
    if (dataset->source.task == Task::slip) {
      features = assemble_slip_dataset(dataset->source.frames, InputMode::filtered, nw);
      header = "q1,q2,q3,q4";
    } else {
      features = hog_dataset(dataset->source.images);
      for (std::size_t k = 0; k < features.features.dim(1); ++k) header += (k ? ",hog" : "hog") + std::to_string(k);
    }
    std::string text = header + ",label\n";
    char buf[64];
    for (std::size_t i = 0; i < features.size(); ++i) {
      for (double v : features.features.slice0(i)) {
        const auto r = std::to_chars(buf, buf + sizeof(buf), v);
        text.append(buf, r.ptr);
        text += ',';
      }
      text += features.class_names[features.labels[i]];
      text += '\n';
    }
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    write_text(p, text);
  });
}

void td_dataset_free(td_dataset* dataset) { delete dataset; }

td_status td_model_train(const td_dataset* dataset, const char* config_json, td_model** out) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out, "out");
    const RunSettings s = parse_settings(config_json, false);
    auto m = std::make_unique<td_model>();
    m->model = train_model(*dataset, s);
    *out = m.release();
  });
}

td_status td_model_save(const td_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    const std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    save_learner(p, model->model);
  });
}

td_status td_model_load(const char* path, td_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto m = std::make_unique<td_model>();
    m->model = load_learner(path);
    *out = m.release();
  });
}

td_status td_model_info_json(const td_model* model, char** out_json) {
  return guarded([&] {
    require(model, "model");
    require(out_json, "out_json");
    nlohmann::ordered_json j;
    j["learner"] = model->model.entry;
    j["task"] = to_string(model->model.task);
    j["input_mode"] = to_string(model->model.mode);
    j["class_names"] = model->model.class_names;
    j["epoch_curve"] = model->model.network.epoch_curve;
    *out_json = dup_string(j.dump(2));
  });
}

td_status td_model_write_curve_csv(const td_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    write_text(path, curve_csv(model->model.network.epoch_curve));
  });
}

td_status td_model_evaluate(const td_model* model, const td_dataset* dataset, td_report** out) {
  return guarded([&] {
    require(model, "model");
    require(dataset, "dataset");
    require(out, "out");
    const LearnerModel& m = model->model;
    if (m.task == Task::image && m.image_size != image_side(*dataset)) {
      throw DatasetError("model expects " + std::to_string(m.image_size) + "-pixel images, dataset has " +
                         std::to_string(image_side(*dataset)));
    }
    LabeledDataset prepared = prepare_dataset(build(m.entry), m.mode, dataset->source, m.prep);
    if (prepared.class_names != m.class_names) {
      throw DatasetError("dataset classes do not match the model's classes");
    }
    auto r = std::make_unique<td_report>();
    r->report = evaluate_model(m, prepared);
    *out = r.release();
  });
}

void td_model_free(td_model* model) { delete model; }

td_status td_experiment_run(const td_dataset* dataset, const char* config_json, td_report** out_report,
                            td_model** out_first_model) {
  return guarded([&] {
    require(dataset, "dataset");
    require(out_report, "out_report");
    const RunSettings s = parse_settings(config_json, true);
    const LabeledDataset prepared = prepare_dataset(s.entry, s.mode, dataset->source, s.prep);
    const SplitPlan plan = SplitPlan::standard(s.seed, s.runs);
    ExperimentOptions eo;
    eo.threads = s.threads;
    LearnerModel first;
    auto r = std::make_unique<td_report>();
    r->report = run_experiment(s.entry, s.mode, prepared, plan, s.options, eo, out_first_model ? &first : nullptr);
    r->report.config["learner"] = s.entry.name;
    r->report.config["input_mode"] = to_string(s.mode);
    r->report.config["seed"] = s.seed;
    r->report.config["preprocessing"] = s.prep.to_json();
    if (out_first_model) {
      first.prep = s.prep;
      first.image_size = image_side(*dataset);
      auto m = std::make_unique<td_model>();
      m->model = std::move(first);
      *out_first_model = m.release();
    }
    *out_report = r.release();
  });
}

td_status td_report_json(const td_report* report, char** out_json) {
  return guarded([&] {
    require(report, "report");
    require(out_json, "out_json");
    *out_json = dup_string(report->report.to_json().dump(2) + "\n");
  });
}

td_status td_report_accuracy(const td_report* report, double* mean, double* std_dev) {
  return guarded([&] {
    require(report, "report");
    if (mean) *mean = report->report.accuracy_mean;
    if (std_dev) *std_dev = report->report.accuracy_std;
  });
}

td_status td_report_stable_epoch(const td_report* report, int64_t* out_epoch) {
  return guarded([&] {
    require(report, "report");
    require(out_epoch, "out_epoch");
    const auto& e = report->report.stable_epoch;
    *out_epoch = e ? static_cast<int64_t>(*e) : -1;
  });
}

double td_report_wall_seconds(const td_report* report) { return report ? report->report.total_wall_seconds : 0.0; }

td_status td_report_write(const td_report* report, const char* directory) {
  return guarded([&] {
    require(report, "report");
    require(directory, "directory");
    const std::filesystem::path dir(directory);
    std::filesystem::create_directories(dir);
    const EvalReport& r = report->report;
    write_text(dir / "report.json", r.to_json().dump(2) + "\n");
    write_text(dir / "runs.csv", r.runs_csv());
    for (std::size_t k = 0; k < r.runs.size(); ++k) {
      write_text(dir / ("confusion_run" + std::to_string(k) + ".csv"), r.confusion_csv(k));
    }
    if (!r.mean_epoch_curve.empty()) write_text(dir / "curve_mean.csv", curve_csv(r.mean_epoch_curve));
  });
}

void td_report_free(td_report* report) { delete report; }

td_status td_zoo_catalog_json(char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    *out_json = dup_string(catalog_json().dump(2) + "\n");
  });
}

td_status td_gradcheck_run(uint64_t seed, char** out_json) {
  return guarded([&] {
    require(out_json, "out_json");
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const GradCheckCase& c : run_gradcheck_suite(seed)) {
      nlohmann::ordered_json o;
      o["name"] = c.name;
      o["max_relative_error"] = c.result.max_relative_error;
      o["threshold"] = c.threshold;
      o["checked"] = c.result.checked;
      o["skipped_kinks"] = c.result.skipped_kinks;
      o["passed"] = c.passed();
      arr.push_back(std::move(o));
    }
    *out_json = dup_string(arr.dump(2) + "\n");
  });
}

}  // extern "C"
