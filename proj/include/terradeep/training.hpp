#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "terradeep/dataset.hpp"
#include "terradeep/network.hpp"

namespace terradeep {

enum class Optimizer { adadelta, sgd };

const char* to_string(Optimizer optimizer);
Optimizer parse_optimizer(const std::string& text);

struct TrainConfig {
  std::size_t batch_size = 100;
  std::size_t epochs = 35;
  Optimizer optimizer = Optimizer::adadelta;
  AdadeltaConfig adadelta;
  double sgd_eta = 0.01;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainedModel {
  NetworkSpec spec;
  NetworkState state;
  std::vector<double> epoch_curve;  // training accuracy after each epoch
  std::vector<std::string> class_names;
};

// Called after every epoch with (epoch index, training accuracy).
using EpochCallback = std::function<void(std::size_t, double)>;

// Seeded initialization, per-epoch seeded shuffling, mini-batches of
// batch_size (the last partial batch is kept). Gradients of a mini-batch are
// accumulated over memory-bounded chunks before the single optimizer step.
TrainedModel train(const NetworkSpec& spec, const LabeledDataset& data, const TrainConfig& cfg,
                   const EpochCallback& on_epoch = {});

struct Prediction {
  std::vector<int> labels;
  Tensor probabilities;  // [n x classes]
};

Prediction predict(const TrainedModel& model, const Tensor& inputs);
Prediction predict(const Network& network, const Tensor& inputs);

}  // namespace terradeep
