#include "terradeep/gradcheck_suite.hpp"

#include "terradeep/zoo.hpp"

namespace terradeep {

namespace {

constexpr std::size_t kBatch = 4;

GradCheckCase check(const std::string& name, const NetworkSpec& spec, bool unit_interval, double threshold,
                    std::size_t per_tensor, std::uint64_t seed) {
  SeededRng data(seed, Stream::data);
  Shape shape{kBatch};
  shape.insert(shape.end(), spec.input_shape.begin(), spec.input_shape.end());
  Tensor batch(shape);
  for (double& v : batch.values()) v = unit_interval ? data.uniform() : data.normal();
  const std::size_t classes = class_count(spec);
  std::vector<int> labels(kBatch);
  for (std::size_t i = 0; i < kBatch; ++i) labels[i] = static_cast<int>(i % classes);
  GradCheckOptions opts;
  opts.seed = seed;
  opts.samples_per_tensor = per_tensor;
  return {name, threshold, gradient_check(spec, batch, labels, opts)};
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed) {
  using L = LayerSpec;
  const auto relu = L::act(Activation::relu);
  const auto sigmoid = L::act(Activation::sigmoid);
  const auto softmax = L::act(Activation::softmax);
  std::vector<GradCheckCase> out;
  out.push_back(check("linear dense", {{5}, {L::dense(3), softmax}}, false, 1e-6, 64, seed));
  out.push_back(check("dense + sigmoid", {{6}, {L::dense(8), sigmoid, L::dense(3), softmax}}, false, 1e-4, 64, seed));
  out.push_back(check("dense + relu", {{6}, {L::dense(8), relu, L::dense(3), softmax}}, false, 1e-4, 64, seed));
  out.push_back(check("hidden softmax", {{5}, {L::dense(4), softmax, L::dense(3), softmax}}, false, 1e-4, 64, seed));
  out.push_back(check("dropout (off)", {{6}, {L::dense(5), sigmoid, L::dropout(0.5), L::dense(3), softmax}}, false,
                      1e-4, 64, seed));
  out.push_back(check("conv1d + flatten", {{2, 10}, {L::conv1d(3, 3), relu, L::flatten(), L::dense(3), softmax}},
                      false, 1e-4, 64, seed));
  out.push_back(check("maxpool1d", {{2, 9}, {L::conv1d(4, 2), L::maxpool1d(), L::flatten(), L::dense(3), softmax}},
                      false, 1e-4, 64, seed));
  out.push_back(check("conv2d", {{2, 6, 6}, {L::conv2d(3, 3, 3), relu, L::flatten(), L::dense(3), softmax}}, false,
                      1e-4, 64, seed));
  out.push_back(check("maxpool2d",
                      {{1, 7, 7}, {L::conv2d(3, 2, 2), L::maxpool2d(), L::flatten(), L::dense(3), softmax}}, false,
                      1e-4, 64, seed));
  for (const std::string& name : zoo_names()) {
    const ZooEntry e = build(name);
    if (e.learner != LearnerKind::network) continue;
    // Full-size image convnets cost ~0.3 s per forward pass; sample fewer
    // entries per tensor so the whole suite stays within a couple of minutes.
    const std::size_t per_tensor = e.convolutional() && e.task == Task::image ? 6 : 16;
    out.push_back(check(name, e.spec, e.task == Task::image, 1e-4, per_tensor, seed));
  }
  return out;
}

}  // namespace terradeep
