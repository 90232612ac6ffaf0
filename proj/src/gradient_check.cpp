#include "terradeep/gradient_check.hpp"

#include <algorithm>
#include <cmath>

#include "terradeep/error.hpp"

namespace terradeep {

namespace {

// Activation pattern of the piecewise-linear layers from `first` on: relu
// output signs and pooling winners. Equal patterns mean the loss is smooth
// between two points.
struct KinkPattern {
  std::vector<std::vector<bool>> signs;
  std::vector<std::vector<std::size_t>> winners;
  bool operator==(const KinkPattern&) const = default;
};

KinkPattern pattern_of(const Network& net, const ForwardTrace& t, std::size_t first) {
  KinkPattern p;
  const auto& layers = net.spec().layers;
  for (std::size_t i = first; i < layers.size(); ++i) {
    if (layers[i].kind == LayerKind::activation && layers[i].activation == Activation::relu) {
      const Tensor& x = t.activations[i + 1];
      std::vector<bool> s(x.size());
      for (std::size_t k = 0; k < x.size(); ++k) s[k] = x[k] > 0.0;
      p.signs.push_back(std::move(s));
    }
    if (!t.argmax[i].empty()) p.winners.push_back(t.argmax[i]);
  }
  return p;
}

}  // namespace

GradCheckResult gradient_check(Network& net, const Tensor& batch, std::span<const int> labels,
                               const GradCheckOptions& options) {
  if (!(options.step > 0.0)) throw ParameterError("gradient check step must be > 0");
  const Tensor targets = one_hot(labels, class_count(net.spec()));
  const ForwardTrace base = net.forward(batch, Mode::eval);
  if (targets.dim(0) != base.output().dim(0)) throw ShapeError("label count does not match batch");
  const Gradients analytic = net.backward(base, targets);

  // Layer owning each parameter tensor; perturbing it leaves earlier layers alone.
  std::vector<std::size_t> owner(net.state().params.size(), 0);
  for (std::size_t i = 0; i < net.spec().layers.size(); ++i) {
    const int w = net.param_index(i);
    if (w >= 0) owner[w] = owner[w + 1] = i;
  }

  SeededRng pick(options.seed, Stream::shuffle);
  GradCheckResult result;
  auto& params = net.state().params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const std::size_t size = params[p].size();
    const std::size_t layer = owner[p];
    const KinkPattern base_pattern = pattern_of(net, base, layer);
    std::vector<std::size_t> idx;
    if (size <= options.samples_per_tensor) {
      for (std::size_t k = 0; k < size; ++k) idx.push_back(k);
    } else {
      for (std::size_t k = 0; k < options.samples_per_tensor; ++k) idx.push_back(pick.below(size));
    }
    for (std::size_t k : idx) {
      const double saved = params[p][k];
      params[p][k] = saved + options.step;
      const ForwardTrace plus = net.forward_from(base, layer);
      params[p][k] = saved - options.step;
      const ForwardTrace minus = net.forward_from(base, layer);
      params[p][k] = saved;
      if (!(pattern_of(net, plus, layer) == base_pattern) || !(pattern_of(net, minus, layer) == base_pattern)) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric =
          (cross_entropy(plus.output(), targets) - cross_entropy(minus.output(), targets)) / (2.0 * options.step);
      const double a = analytic[p][k];
      const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      result.max_relative_error = std::max(result.max_relative_error, std::fabs(a - numeric) / denom);
      ++result.checked;
    }
  }
  return result;
}

GradCheckResult gradient_check(const NetworkSpec& spec, const Tensor& batch, std::span<const int> labels,
                               const GradCheckOptions& options) {
  Network net(spec);
  SeededRng init(options.seed, Stream::init);
  net.initialize(init);
  return gradient_check(net, batch, labels, options);
}

}  // namespace terradeep
