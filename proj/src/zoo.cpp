#include "terradeep/zoo.hpp"

#include "terradeep/error.hpp"
#include "terradeep/signal_features.hpp"
#include "terradeep/serialize.hpp"

namespace terradeep {

namespace {

using L = LayerSpec;

std::vector<LayerSpec> layers_for(const std::string& name, std::size_t classes, std::size_t k) {
  const auto relu = L::act(Activation::relu);
  const auto sigmoid = L::act(Activation::sigmoid);
  const auto softmax = L::act(Activation::softmax);
  if (name == "slip-mlp" || name == "image-mlp1") return {L::dense(30), sigmoid, L::dense(classes), softmax};
  if (name == "image-mlp2") return {L::dense(15), sigmoid, L::dense(15), sigmoid, L::dense(classes), softmax};
  if (name == "slip-dnn" || name == "image-dnn") return {L::dense(100), sigmoid, L::dense(classes), softmax};
  if (name == "slip-cnn") {
    return {L::conv1d(128, k), relu, L::conv1d(64, k), relu, L::conv1d(32, k), relu, L::maxpool1d(),
            L::dropout(0.1), L::flatten(), L::dense(100), relu, L::dense(classes), softmax};
  }
  if (name == "image-cnn1") {
    return {L::conv2d(32, k, k), relu, L::conv2d(32, k, k), relu, L::conv2d(64, k, k), relu,
            L::conv2d(64, k, k), relu, L::maxpool2d(), L::dropout(0.25), L::flatten(), L::dense(100),
            relu, L::dense(classes), softmax};
  }
  if (name == "image-cnn2") {
    return {L::conv2d(32, k, k), relu, L::conv2d(32, k, k), relu, L::maxpool2d(), L::conv2d(64, k, k), relu,
            L::conv2d(64, k, k), relu, L::maxpool2d(), L::dropout(0.35), L::flatten(), L::dense(100),
            relu, L::dense(classes), softmax};
  }
  return {};
}

std::string valid_names() {
  std::string s;
  for (const auto& n : zoo_names()) s += (s.empty() ? "" : ", ") + n;
  return s;
}

}  // namespace

const std::vector<std::string>& zoo_names() {
  static const std::vector<std::string> names = {"slip-svm",   "slip-mlp",   "slip-dnn",   "slip-cnn",  "image-dnn",
                                                 "image-mlp1", "image-mlp2", "image-cnn1", "image-cnn2"};
  return names;
}

bool ZooEntry::convolutional() const { return name == "slip-cnn" || name == "image-cnn1" || name == "image-cnn2"; }

ZooEntry build(const std::string& name) {
  bool known = false;
  for (const auto& n : zoo_names()) known = known || n == name;
  if (!known) throw CatalogError("unknown learner '" + name + "'; valid names: " + valid_names());

  ZooEntry e;
  e.name = name;
  e.task = name.rfind("slip-", 0) == 0 ? Task::slip : Task::image;
  if (name == "slip-svm") {
    e.learner = LearnerKind::svm;
    e.summary = "RBF-kernel SVM (SMO, one-vs-one) on 4-channel raw or variance features";
    return e;
  }
  e.accepts_filtered = !e.convolutional();
  const std::size_t classes = e.task == Task::slip ? kSlipClasses : kImageClasses;
  Shape input;
  if (name == "slip-cnn") {
    input = {kSlipChannels, kSlipSequenceLength};
  } else if (e.task == Task::slip) {
    input = {kSlipChannels};
  } else if (e.convolutional()) {
    input = {1, kImageSide, kImageSide};
  } else {
    input = {kImageSide * kImageSide};
  }
  e.spec = NetworkSpec{input, layers_for(name, classes, e.kernel)};
  validate(e.spec);
  if (name == "slip-mlp" || name == "image-mlp1" || name == "image-mlp2") {
    e.train.optimizer = Optimizer::sgd;
    e.train.sgd_eta = 0.01;
    e.train.batch_size = 1;
  }

  if (name == "slip-mlp") e.summary = "MLP, 1 hidden layer x30 (sigmoid), sgd eta 0.01";
  if (name == "slip-dnn") e.summary = "dense 100 (sigmoid) -> dense 3 (softmax), adadelta, batch 100, 35 epochs";
  if (name == "slip-cnn") {
    e.summary = "conv1d 128 -> 64 -> 32 (width 3, relu) -> maxpool1d -> dropout 0.1 -> dense 100 -> dense 3";
  }
  if (name == "image-dnn") e.summary = "input 16384 -> dense 100 (sigmoid) -> dense 11 (softmax), adadelta";
  if (name == "image-mlp1") e.summary = "MLP, 1 hidden layer x30 (sigmoid), sgd eta 0.01";
  if (name == "image-mlp2") e.summary = "MLP, 2 hidden layers x15 (sigmoid), sgd eta 0.01";
  if (name == "image-cnn1") {
    e.summary = "conv2d 32 -> 32 -> 64 -> 64 (3x3, relu) -> maxpool2d -> dropout 0.25 -> dense 100 -> dense 11";
  }
  if (name == "image-cnn2") {
    e.summary =
        "conv2d 32 -> 32 -> maxpool2d -> conv2d 64 -> 64 (3x3, relu) -> maxpool2d -> dropout 0.35 -> dense 100 -> "
        "dense 11";
  }
  return e;
}

NetworkSpec instantiate(const ZooEntry& entry, const Shape& input_shape, std::size_t classes) {
  if (entry.learner != LearnerKind::network) throw CatalogError("'" + entry.name + "' is not a network learner");
  NetworkSpec spec{input_shape, layers_for(entry.name, classes, entry.kernel)};
  validate(spec);
  return spec;
}

std::vector<CatalogItem> list_catalog() {
  std::vector<CatalogItem> items;
  for (const auto& n : zoo_names()) items.push_back({n, build(n).summary});
  return items;
}

nlohmann::json to_json(const ZooEntry& e) {
  nlohmann::json j;
  j["name"] = e.name;
  j["task"] = to_string(e.task);
  j["summary"] = e.summary;
  j["input_modes"] = e.accepts_filtered ? nlohmann::json{"raw", "filtered"} : nlohmann::json{"raw"};
  if (e.learner == LearnerKind::svm) {
    j["learner"] = "svm";
    j["svm"] = to_json(e.svm);
    j["svm"]["gamma"] = "1/feature_count";
    j["multiclass"] = "one-vs-one";
    return j;
  }
  j["learner"] = "network";
  j["network"] = to_json(e.spec);
  j["kernel"] = e.kernel;
  nlohmann::json t{{"optimizer", to_string(e.train.optimizer)},
                   {"batch_size", e.train.batch_size},
                   {"epochs", e.train.epochs}};
  if (e.train.optimizer == Optimizer::sgd) {
    t["eta"] = e.train.sgd_eta;
  } else {
    t["rho"] = e.train.adadelta.rho;
    t["epsilon"] = e.train.adadelta.epsilon;
    t["learning_rate"] = e.train.adadelta.learning_rate;
  }
  j["train"] = t;
  return j;
}

nlohmann::json catalog_json() {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& n : zoo_names()) entries.push_back(to_json(build(n)));
  return entries;
}

}  // namespace terradeep
