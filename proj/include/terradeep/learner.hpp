#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "terradeep/datasets.hpp"
#include "terradeep/serialize.hpp"
#include "terradeep/zoo.hpp"

namespace terradeep {

// Raw material for one task: sensor frames (slip) or an image stack
// [n x 1 x size x size] in [0, 1] (image).
struct DataSource {
  Task task = Task::slip;
  std::vector<SensorFrame> frames;
  LabeledDataset images;
};

struct PrepareOptions {
  std::size_t nw = kDefaultVarianceWindow;
  std::size_t window = kSlipSequenceLength;  // slip-cnn sequence length
  std::size_t window_stride = 4;             // frames between slip-cnn windows
  HogConfig hog;

  nlohmann::json to_json() const;
  static PrepareOptions from_json(const nlohmann::json& j);
};

// Learner-ready samples for (entry, mode):
//   slip, vector learners: one row per frame, raw [T, acc_x, pitch, acc_z] or [q1..q4]
//   slip-cnn: [4 x window] raw sequences
//   image, raw: pixels ([1 x s x s] for CNNs, flattened otherwise)
//   image, filtered: HOG descriptors
LabeledDataset prepare_dataset(const ZooEntry& entry, InputMode mode, const DataSource& source,
                               const PrepareOptions& options);

// Zero-mean, unit-variance scaling per group, where a sample is laid out as
// [groups x group_length] (group_length 1 for feature vectors, the sequence
// length for multichannel signals). Statistics come from the data passed to
// fit only.
struct Standardizer {
  std::size_t group_length = 0;  // 0 = identity
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Tensor& features, std::size_t groups);
  bool active() const { return group_length != 0; }
  Tensor apply(const Tensor& features) const;
};

struct LearnerOptions {
  TrainConfig train;
  SvmConfig svm;

  nlohmann::json to_json(const ZooEntry& entry) const;
};

LearnerOptions default_options(const ZooEntry& entry);

struct LearnerModel {
  std::string entry;
  Task task = Task::slip;
  InputMode mode = InputMode::raw;
  LearnerKind kind = LearnerKind::network;
  // How raw data was turned into samples; set by the caller so the model can
  // re-prepare new data the same way.
  PrepareOptions prep;
  std::size_t image_size = 0;  // image task only
  std::vector<std::string> class_names;
  Standardizer standardizer;
  TrainedModel network;
  MulticlassSvmModel svm;
};

LearnerModel fit_learner(const ZooEntry& entry, InputMode mode, const LabeledDataset& train,
                         const LearnerOptions& options);
// features as produced by prepare_dataset.
std::vector<int> predict_learner(const LearnerModel& model, const Tensor& features);

ModelFile to_model_file(const LearnerModel& model);
LearnerModel from_model_file(const ModelFile& file);
void save_learner(const std::filesystem::path& path, const LearnerModel& model);
LearnerModel load_learner(const std::filesystem::path& path);

}  // namespace terradeep
