#pragma once

#include <span>
#include <string>
#include <vector>

#include "terradeep/tensor.hpp"

namespace terradeep {

enum class Task { slip, image };
enum class InputMode { raw, filtered };

const char* to_string(Task task);
const char* to_string(InputMode mode);
Task parse_task(const std::string& text);
InputMode parse_input_mode(const std::string& text);

// Feature matrix [n x d] or sample stack [n x ...] with integer labels.
struct LabeledDataset {
  Tensor features;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const { return labels.size(); }
  std::size_t class_count() const { return class_names.size(); }
  Shape sample_shape() const;

  // Throws DatasetError unless n >= 1, features has n leading slices, the
  // class list is non-empty and every label is in [0, class_count).
  void validate() const;

  LabeledDataset subset(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> class_counts() const;
};

}  // namespace terradeep
