#include "terradeep/learner.hpp"

#include <cmath>

#include "terradeep/error.hpp"

namespace terradeep {

using nlohmann::json;

json PrepareOptions::to_json() const {
  return json{{"nw", nw},
              {"window", window},
              {"window_stride", window_stride},
              {"hog",
               {{"cell_size", hog.cell_size},
                {"bins", hog.bins},
                {"block", hog.block},
                {"block_stride", hog.block_stride},
                {"norm_epsilon", hog.norm_epsilon}}}};
}

PrepareOptions PrepareOptions::from_json(const json& j) {
  PrepareOptions p;
  try {
    p.nw = j.at("nw").get<std::size_t>();
    p.window = j.at("window").get<std::size_t>();
    p.window_stride = j.at("window_stride").get<std::size_t>();
    const json& h = j.at("hog");
    p.hog.cell_size = h.at("cell_size").get<std::size_t>();
    p.hog.bins = h.at("bins").get<std::size_t>();
    p.hog.block = h.at("block").get<std::size_t>();
    p.hog.block_stride = h.at("block_stride").get<std::size_t>();
    p.hog.norm_epsilon = h.at("norm_epsilon").get<double>();
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed preprocessing options: ") + e.what());
  }
  return p;
}

LabeledDataset prepare_dataset(const ZooEntry& entry, InputMode mode, const DataSource& source,
                               const PrepareOptions& options) {
  if (source.task != entry.task) {
    throw ParameterError("learner '" + entry.name + "' belongs to the " + to_string(entry.task) + " task, data is " +
                         to_string(source.task));
  }
  if (!entry.supports(mode)) {
    throw ParameterError("learner '" + entry.name + "' takes raw input only");
  }
  if (entry.task == Task::slip) {
    if (source.frames.empty()) throw DatasetError("no sensor frames");
    if (entry.convolutional()) {
      if (options.window_stride < 1) throw ParameterError("window stride must be >= 1");
      return assemble_slip_windows(source.frames, mode, options.nw, options.window, options.window_stride);
    }
    return assemble_slip_dataset(source.frames, mode, options.nw);
  }
  source.images.validate();
  if (mode == InputMode::filtered) return hog_dataset(source.images, options.hog);
  if (entry.convolutional()) return source.images;
  return flatten_images(source.images);
}

// ----- standardization ------------------------------------------------------

Standardizer Standardizer::fit(const Tensor& features, std::size_t groups) {
  if (features.rank() < 2 || features.dim(0) == 0) throw DatasetError("cannot standardize an empty feature set");
  const std::size_t n = features.dim(0);
  const std::size_t per_sample = features.stride0();
  if (groups == 0 || per_sample % groups != 0) throw ShapeError("standardizer groups do not divide the sample size");
  Standardizer s;
  s.group_length = per_sample / groups;
  s.mean.assign(groups, 0.0);
  s.scale.assign(groups, 1.0);
  const double count = static_cast<double>(n * s.group_length);
  for (std::size_t g = 0; g < groups; ++g) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < s.group_length; ++k) sum += features[i * per_sample + g * s.group_length + k];
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < s.group_length; ++k) {
        const double d = features[i * per_sample + g * s.group_length + k] - mean;
        ss += d * d;
      }
    }
    const double sd = std::sqrt(ss / count);
    s.mean[g] = mean;
    s.scale[g] = sd > 1e-12 ? sd : 1.0;
  }
  return s;
}

Tensor Standardizer::apply(const Tensor& features) const {
  if (!active()) return features;
  const std::size_t per_sample = features.stride0();
  if (per_sample != group_length * mean.size()) {
    throw ShapeError("standardizer fitted on " + std::to_string(group_length * mean.size()) +
                     " values per sample, got " + std::to_string(per_sample));
  }
  Tensor out = features;
  const std::size_t n = features.dim(0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t g = 0; g < mean.size(); ++g) {
      double* p = out.data() + i * per_sample + g * group_length;
      for (std::size_t k = 0; k < group_length; ++k) p[k] = (p[k] - mean[g]) / scale[g];
    }
  }
  return out;
}

// ----- learners -------------------------------------------------------------

json LearnerOptions::to_json(const ZooEntry& entry) const {
  if (entry.learner == LearnerKind::svm) return json{{"svm", terradeep::to_json(svm)}};
  json t{{"optimizer", terradeep::to_string(train.optimizer)},
         {"batch_size", train.batch_size},
         {"epochs", train.epochs}};
  if (train.optimizer == Optimizer::sgd) {
    t["eta"] = train.sgd_eta;
  } else {
    t["rho"] = train.adadelta.rho;
    t["epsilon"] = train.adadelta.epsilon;
    t["learning_rate"] = train.adadelta.learning_rate;
  }
  return json{{"train", t}};
}

LearnerOptions default_options(const ZooEntry& entry) {
  LearnerOptions o;
  o.train = entry.train;
  o.svm = entry.svm;
  return o;
}

namespace {

// Vector features are scaled per column and slip windows per channel. Raw
// pixels share one mean and scale per image channel, which keeps the shared
// brightness offset from swamping the texture signal.
std::size_t standardizer_groups(const ZooEntry& entry, InputMode mode, const Tensor& features) {
  if (entry.task == Task::image && mode == InputMode::raw) return features.rank() == 4 ? features.dim(1) : 1;
  if (features.rank() == 2 || features.rank() == 3) return features.dim(1);
  return 0;
}

}  // namespace

LearnerModel fit_learner(const ZooEntry& entry, InputMode mode, const LabeledDataset& train,
                         const LearnerOptions& options) {
  train.validate();
  LearnerModel m;
  m.entry = entry.name;
  m.task = entry.task;
  m.mode = mode;
  m.kind = entry.learner;
  m.class_names = train.class_names;
  const std::size_t groups = standardizer_groups(entry, mode, train.features);
  if (groups) m.standardizer = Standardizer::fit(train.features, groups);
  const Tensor x = m.standardizer.apply(train.features);

  if (entry.learner == LearnerKind::svm) {
    if (x.rank() != 2) throw ShapeError("SVM input must be feature vectors");
    m.svm = one_vs_one_train(x, train.labels, options.svm, train.class_count());
    return m;
  }
  const NetworkSpec spec = instantiate(entry, train.sample_shape(), train.class_count());
  LabeledDataset scaled{x, train.labels, train.class_names};
  m.network = terradeep::train(spec, scaled, options.train);
  return m;
}

std::vector<int> predict_learner(const LearnerModel& model, const Tensor& features) {
  const Tensor x = model.standardizer.apply(features);
  if (model.kind == LearnerKind::svm) return one_vs_one_predict(model.svm, x);
  return predict(model.network, x).labels;
}

// ----- persistence ----------------------------------------------------------

ModelFile to_model_file(const LearnerModel& m) {
  ModelFile f;
  f.section = std::string(m.kind == LearnerKind::svm ? kSectionSvm : kSectionNetwork);
  json h;
  h["entry"] = m.entry;
  h["task"] = to_string(m.task);
  h["input_mode"] = to_string(m.mode);
  h["prep"] = m.prep.to_json();
  h["image_size"] = m.image_size;
  h["class_names"] = m.class_names;
  h["standardizer_groups"] = m.standardizer.mean.size();
  h["standardizer_group_length"] = m.standardizer.group_length;
  if (m.standardizer.active()) {
    f.tensors.emplace_back(Shape{m.standardizer.mean.size()}, m.standardizer.mean);
    f.tensors.emplace_back(Shape{m.standardizer.scale.size()}, m.standardizer.scale);
  }
  if (m.kind == LearnerKind::svm) {
    h["svm"] = svm_header(m.svm);
    append_svm_tensors(m.svm, f.tensors);
  } else {
    h["spec"] = to_json(m.network.spec);
    f.tensors.emplace_back(Shape{m.network.epoch_curve.size()}, m.network.epoch_curve);
    append_network_state(m.network.state, f.tensors);
  }
  f.header = std::move(h);
  return f;
}

LearnerModel from_model_file(const ModelFile& f) {
  LearnerModel m;
  const json& h = f.header;
  std::size_t cursor = 0;
  try {
    m.entry = h.at("entry").get<std::string>();
    m.task = parse_task(h.at("task").get<std::string>());
    m.mode = parse_input_mode(h.at("input_mode").get<std::string>());
    m.prep = PrepareOptions::from_json(h.at("prep"));
    m.image_size = h.at("image_size").get<std::size_t>();
    m.class_names = h.at("class_names").get<std::vector<std::string>>();
    const auto groups = h.at("standardizer_groups").get<std::size_t>();
    m.standardizer.group_length = h.at("standardizer_group_length").get<std::size_t>();
    if (m.standardizer.active()) {
      if (f.tensors.size() < 2 || f.tensors[0].size() != groups || f.tensors[1].size() != groups) {
        throw FormatError("standardizer tensors missing or mis-sized");
      }
      m.standardizer.mean.assign(f.tensors[0].values().begin(), f.tensors[0].values().end());
      m.standardizer.scale.assign(f.tensors[1].values().begin(), f.tensors[1].values().end());
      cursor = 2;
    }
    const ZooEntry entry = build(m.entry);
    m.kind = entry.learner;
    const bool svm_section = f.section == kSectionSvm;
    if (svm_section != (m.kind == LearnerKind::svm)) throw FormatError("section tag does not match the learner");
    if (m.kind == LearnerKind::svm) {
      m.svm = svm_model_from(h.at("svm"), f.tensors, cursor);
    } else {
      m.network.spec = network_spec_from_json(h.at("spec"));
      m.network.class_names = m.class_names;
      if (cursor >= f.tensors.size()) throw FormatError("epoch curve tensor missing");
      const Tensor& curve = f.tensors[cursor++];
      m.network.epoch_curve.assign(curve.values().begin(), curve.values().end());
      m.network.state = network_state_from(m.network.spec, f.tensors, cursor);
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed model header: ") + e.what());
  } catch (const CatalogError& e) {
    throw FormatError(std::string("model names an unknown learner: ") + e.what());
  }
  if (cursor != f.tensors.size()) throw FormatError("model file holds unexpected extra tensors");
  return m;
}

void save_learner(const std::filesystem::path& path, const LearnerModel& model) {
  write_model_file(path, to_model_file(model));
}

LearnerModel load_learner(const std::filesystem::path& path) {
  const ModelFile f = read_model_file(path);
  try {
    return from_model_file(f);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace terradeep
