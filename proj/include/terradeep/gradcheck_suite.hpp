#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "terradeep/gradient_check.hpp"

namespace terradeep {

struct GradCheckCase {
  std::string name;
  double threshold = 1e-4;
  GradCheckResult result;
  bool passed() const { return result.checked > 0 && result.max_relative_error < threshold; }
};

// Small networks covering every layer kind plus every zoo network at its
// pinned input shape, each on a 4-sample batch.
std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed = 0);

}  // namespace terradeep
