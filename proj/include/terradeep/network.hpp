#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "terradeep/rng.hpp"
#include "terradeep/tensor.hpp"

namespace terradeep {

enum class LayerKind { dense, conv1d, conv2d, maxpool1d, maxpool2d, dropout, flatten, activation };
enum class Activation { relu, sigmoid, softmax };

const char* to_string(LayerKind kind);
const char* to_string(Activation activation);

struct LayerSpec {
  LayerKind kind = LayerKind::flatten;
  std::size_t units = 0;     // dense units / conv filters
  std::size_t kernel_h = 0;  // conv2d only
  std::size_t kernel_w = 0;  // conv1d width, conv2d width
  double rate = 0.0;         // dropout
  Activation activation = Activation::relu;

  static LayerSpec dense(std::size_t units);
  static LayerSpec conv1d(std::size_t filters, std::size_t width);
  static LayerSpec conv2d(std::size_t filters, std::size_t kernel_h, std::size_t kernel_w);
  static LayerSpec maxpool1d();
  static LayerSpec maxpool2d();
  static LayerSpec dropout(double rate);
  static LayerSpec flatten();
  static LayerSpec act(Activation activation);

  bool has_parameters() const {
    return kind == LayerKind::dense || kind == LayerKind::conv1d || kind == LayerKind::conv2d;
  }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

struct NetworkSpec {
  Shape input_shape;  // per sample
  std::vector<LayerSpec> layers;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

// Per-sample output shape of every layer. Throws ShapeError if the chain is
// illegal or ParameterError for invalid layer parameters.
std::vector<Shape> infer_shapes(const NetworkSpec& spec);
// infer_shapes plus: the last layer is a softmax over a flat output.
void validate(const NetworkSpec& spec);
std::size_t class_count(const NetworkSpec& spec);
std::string describe(const NetworkSpec& spec);

// Weights and bias of every parameterised layer in layer order, plus the
// adadelta accumulators (E[g^2], E[dx^2]) for each of them.
struct NetworkState {
  std::vector<Tensor> params;
  std::vector<Tensor> grad_accum;
  std::vector<Tensor> update_accum;
  std::uint64_t version = 0;  // bumped on every parameter update
};

using Gradients = std::vector<Tensor>;

enum class Mode { train, eval };

struct ForwardTrace {
  // [0] input, [i + 1] output of layer i. A dense/conv output feeding a relu
  // is handed over to that relu and left empty.
  std::vector<Tensor> activations;
  std::vector<std::vector<std::size_t>> argmax;  // per layer; pooling only
  std::vector<std::vector<double>> masks;        // per layer; train-mode dropout only
  Mode mode = Mode::eval;
  std::uint64_t version = 0;
  std::size_t first_layer = 0;  // activations below this index are left empty

  const Tensor& output() const { return activations.back(); }
};

class Network {
 public:
  explicit Network(NetworkSpec spec);
  Network(NetworkSpec spec, NetworkState state);

  // Uniform(-sqrt(6 / (fan_in + fan_out)), +...) weights, zero biases, and
  // cleared optimizer accumulators.
  void initialize(SeededRng& rng);

  const NetworkSpec& spec() const { return spec_; }
  const NetworkState& state() const { return state_; }
  NetworkState& state() { return state_; }
  const std::vector<Shape>& shapes() const { return shapes_; }
  std::size_t parameter_count() const;
  // Index of the layer's weight tensor in state().params, or -1.
  int param_index(std::size_t layer) const { return param_index_[layer]; }

  // batch is [n x input_shape...]. In train mode dropout draws its masks
  // from dropout_rng (required when the network has dropout).
  ForwardTrace forward(const Tensor& batch, Mode mode, SeededRng* dropout_rng = nullptr) const;
  // Eval-mode pass that reuses base's input to `layer` and recomputes only
  // that layer and the ones after it. Backward rejects partial traces.
  ForwardTrace forward_from(const ForwardTrace& base, std::size_t layer) const;

  // Exact gradients of cross_entropy(trace.output(), one_hot) with respect to
  // every parameter. The trace must come from this network's current
  // parameters (StateError otherwise).
  Gradients backward(const ForwardTrace& trace, const Tensor& one_hot) const;

  // Eval-mode class probabilities, evaluated in memory-bounded chunks.
  Tensor predict_proba(const Tensor& inputs) const;

  // Samples per forward/backward chunk that keeps cached activations within
  // a fixed memory budget.
  std::size_t micro_batch_size() const;

 private:
  void run_layers(ForwardTrace& trace, std::size_t first, SeededRng* dropout_rng) const;

  NetworkSpec spec_;
  std::vector<Shape> shapes_;
  std::vector<int> param_index_;
  NetworkState state_;
};

Tensor one_hot(std::span<const int> labels, std::size_t classes);

// -(1/n) sum log(max(p_true, 1e-12)).
double cross_entropy(const Tensor& probs, const Tensor& one_hot);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> row);

struct AdadeltaConfig {
  double rho = 0.95;
  double epsilon = 1e-6;
  double learning_rate = 1.0;
};

void adadelta_step(NetworkState& state, const Gradients& gradients, const AdadeltaConfig& cfg = {});
void sgd_step(NetworkState& state, const Gradients& gradients, double eta);

}  // namespace terradeep
