#pragma once

#include <cstdint>
#include <span>

#include "terradeep/network.hpp"

namespace terradeep {

struct GradCheckOptions {
  double step = 1e-5;
  std::size_t samples_per_tensor = 24;  // parameters compared per tensor
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  // Parameters whose perturbation flipped a relu sign or moved a pooling
  // argmax; finite differences are meaningless across such kinks.
  std::size_t skipped_kinks = 0;
};

// Compares backward() against central differences of the eval-mode loss
// (dropout off) on a random subset of parameters of a network initialized
// from `seed`.
GradCheckResult gradient_check(const NetworkSpec& spec, const Tensor& batch, std::span<const int> labels,
                               const GradCheckOptions& options = {});
GradCheckResult gradient_check(Network& network, const Tensor& batch, std::span<const int> labels,
                               const GradCheckOptions& options = {});

}  // namespace terradeep
