#include "terradeep/training.hpp"

#include <algorithm>
#include <numeric>

#include "terradeep/error.hpp"

namespace terradeep {

const char* to_string(Optimizer optimizer) {
  return optimizer == Optimizer::adadelta ? "adadelta" : "sgd";
}

Optimizer parse_optimizer(const std::string& text) {
  if (text == "adadelta") return Optimizer::adadelta;
  if (text == "sgd") return Optimizer::sgd;
  throw ParameterError("unknown optimizer '" + text + "' (expected adadelta or sgd)");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (optimizer == Optimizer::sgd && !(sgd_eta >= 0.0)) throw ParameterError("sgd learning rate must be >= 0");
  if (optimizer == Optimizer::adadelta) {
    if (!(adadelta.rho > 0.0 && adadelta.rho < 1.0)) throw ParameterError("adadelta rho must lie in (0, 1)");
    if (!(adadelta.epsilon > 0.0)) throw ParameterError("adadelta epsilon must be > 0");
  }
}

namespace {

void accumulate(Gradients& total, const Gradients& part, double weight, bool first) {
  for (std::size_t p = 0; p < part.size(); ++p) {
    double* t = total[p].data();
    const double* g = part[p].data();
    const std::size_t n = part[p].size();
    if (first) {
      for (std::size_t k = 0; k < n; ++k) t[k] = weight * g[k];
    } else {
      for (std::size_t k = 0; k < n; ++k) t[k] += weight * g[k];
    }
  }
}

}  // namespace

TrainedModel train(const NetworkSpec& spec, const LabeledDataset& data, const TrainConfig& cfg,
                   const EpochCallback& on_epoch) {
  cfg.validate();
  data.validate();
  Network net(spec);
  const std::size_t classes = class_count(spec);
  if (data.class_count() > classes) {
    throw DatasetError("dataset has " + std::to_string(data.class_count()) + " classes, network outputs " +
                       std::to_string(classes));
  }
  const Shape sample = data.sample_shape();
  if (sample != spec.input_shape) {
    throw ShapeError("dataset samples " + to_string(sample) + " do not match network input " +
                     to_string(spec.input_shape));
  }

  SeededRng init_rng(cfg.seed, Stream::init);
  SeededRng shuffle_rng(cfg.seed, Stream::shuffle);
  SeededRng dropout_rng(cfg.seed, Stream::dropout);
  net.initialize(init_rng);

  TrainedModel model;
  model.spec = spec;
  model.class_names = data.class_names;

  const std::size_t n = data.size();
  const std::size_t chunk = net.micro_batch_size();
  std::vector<std::size_t> order(n);
  std::vector<std::size_t> rows;
  std::vector<int> chunk_labels;
  Gradients total;
  for (const Tensor& p : net.state().params) total.emplace_back(p.shape());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order);
    std::size_t correct = 0;
    for (std::size_t b0 = 0; b0 < n; b0 += cfg.batch_size) {
      const std::size_t batch_n = std::min(cfg.batch_size, n - b0);
      for (std::size_t c0 = 0; c0 < batch_n; c0 += chunk) {
        const std::size_t count = std::min(chunk, batch_n - c0);
        rows.assign(order.begin() + static_cast<std::ptrdiff_t>(b0 + c0),
                    order.begin() + static_cast<std::ptrdiff_t>(b0 + c0 + count));
        chunk_labels.resize(count);
        for (std::size_t k = 0; k < count; ++k) chunk_labels[k] = data.labels[rows[k]];
        const ForwardTrace trace = net.forward(gather_rows(data.features, rows), Mode::train, &dropout_rng);
        const Tensor& probs = trace.output();
        for (std::size_t k = 0; k < count; ++k) {
          if (argmax(probs.slice0(k)) == static_cast<std::size_t>(chunk_labels[k])) ++correct;
        }
        const Gradients g = net.backward(trace, one_hot(chunk_labels, classes));
        accumulate(total, g, static_cast<double>(count) / static_cast<double>(batch_n), c0 == 0);
      }
      if (cfg.optimizer == Optimizer::adadelta) {
        adadelta_step(net.state(), total, cfg.adadelta);
      } else {
        sgd_step(net.state(), total, cfg.sgd_eta);
      }
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(n);
    model.epoch_curve.push_back(acc);
    if (on_epoch) on_epoch(epoch, acc);
  }
  for (const Tensor& p : net.state().params) {
    if (!p.all_finite()) throw StateError("training diverged: non-finite parameters");
  }
  model.state = net.state();
  return model;
}

Prediction predict(const Network& network, const Tensor& inputs) {
  Prediction out;
  out.probabilities = network.predict_proba(inputs);
  const std::size_t n = out.probabilities.dim(0);
  out.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.labels[i] = static_cast<int>(argmax(out.probabilities.slice0(i)));
  return out;
}

Prediction predict(const TrainedModel& model, const Tensor& inputs) {
  const Network net(model.spec, model.state);
  return predict(net, inputs);
}

}  // namespace terradeep
