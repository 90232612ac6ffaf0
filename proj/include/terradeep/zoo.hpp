#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "terradeep/dataset.hpp"
#include "terradeep/network.hpp"
#include "terradeep/svm.hpp"
#include "terradeep/training.hpp"

namespace terradeep {

enum class LearnerKind { svm, network };

struct ZooEntry {
  std::string name;
  Task task = Task::slip;
  LearnerKind learner = LearnerKind::network;
  std::string summary;
  // Networks fed a single sample vector can take either input mode;
  // convolutional entries read raw signals or pixels only.
  bool accepts_filtered = true;
  std::size_t kernel = 3;  // conv kernel side
  NetworkSpec spec;        // at the pinned input shape and class count
  TrainConfig train;
  SvmConfig svm;

  bool convolutional() const;
  bool supports(InputMode mode) const { return mode == InputMode::raw || accepts_filtered; }
};

inline constexpr std::size_t kSlipClasses = 3;
inline constexpr std::size_t kImageClasses = 11;
inline constexpr std::size_t kImageSide = 128;

// Throws CatalogError listing the valid names.
ZooEntry build(const std::string& name);

// The entry's layer stack rebuilt for another per-sample input shape or
// class count (e.g. 64x64 images, HOG vectors, six classes).
NetworkSpec instantiate(const ZooEntry& entry, const Shape& input_shape, std::size_t classes);

struct CatalogItem {
  std::string name;
  std::string summary;
};

std::vector<CatalogItem> list_catalog();
const std::vector<std::string>& zoo_names();
nlohmann::json catalog_json();
nlohmann::json to_json(const ZooEntry& entry);

}  // namespace terradeep
