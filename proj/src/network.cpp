#include "terradeep/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>

#include "terradeep/error.hpp"
#include "terradeep/ops.hpp"

namespace terradeep {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv1d: return "conv1d";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::maxpool1d: return "maxpool1d";
    case LayerKind::maxpool2d: return "maxpool2d";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::activation: return "activation";
  }
  return "?";
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::softmax: return "softmax";
  }
  return "?";
}

LayerSpec LayerSpec::dense(std::size_t units) {
  LayerSpec l;
  l.kind = LayerKind::dense;
  l.units = units;
  return l;
}

LayerSpec LayerSpec::conv1d(std::size_t filters, std::size_t width) {
  LayerSpec l;
  l.kind = LayerKind::conv1d;
  l.units = filters;
  l.kernel_w = width;
  return l;
}

LayerSpec LayerSpec::conv2d(std::size_t filters, std::size_t kh, std::size_t kw) {
  LayerSpec l;
  l.kind = LayerKind::conv2d;
  l.units = filters;
  l.kernel_h = kh;
  l.kernel_w = kw;
  return l;
}

LayerSpec LayerSpec::maxpool1d() {
  LayerSpec l;
  l.kind = LayerKind::maxpool1d;
  return l;
}

LayerSpec LayerSpec::maxpool2d() {
  LayerSpec l;
  l.kind = LayerKind::maxpool2d;
  return l;
}

LayerSpec LayerSpec::dropout(double rate) {
  LayerSpec l;
  l.kind = LayerKind::dropout;
  l.rate = rate;
  return l;
}

LayerSpec LayerSpec::flatten() { return LayerSpec{}; }

LayerSpec LayerSpec::act(Activation a) {
  LayerSpec l;
  l.kind = LayerKind::activation;
  l.activation = a;
  return l;
}

// ----- shape chaining -------------------------------------------------------

std::vector<Shape> infer_shapes(const NetworkSpec& spec) {
  if (spec.input_shape.empty() || shape_size(spec.input_shape) == 0) {
    throw ShapeError("network input shape " + to_string(spec.input_shape) + " is empty");
  }
  std::vector<Shape> shapes;
  Shape cur = spec.input_shape;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& l = spec.layers[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + "): ";
    switch (l.kind) {
      case LayerKind::dense:
        if (l.units == 0) throw ParameterError(where + "units must be >= 1");
        if (cur.size() != 1) throw ShapeError(where + "needs a flat input, got " + to_string(cur));
        cur = {l.units};
        break;
      case LayerKind::conv1d:
        if (l.units == 0 || l.kernel_w == 0) throw ParameterError(where + "filters and width must be >= 1");
        if (cur.size() != 2) throw ShapeError(where + "needs [channels x length], got " + to_string(cur));
        if (l.kernel_w > cur[1]) throw ShapeError(where + "width " + std::to_string(l.kernel_w) + " exceeds length " + std::to_string(cur[1]));
        cur = {l.units, cur[1] - l.kernel_w + 1};
        break;
      case LayerKind::conv2d:
        if (l.units == 0 || l.kernel_h == 0 || l.kernel_w == 0) throw ParameterError(where + "filters and kernel must be >= 1");
        if (cur.size() != 3) throw ShapeError(where + "needs [channels x h x w], got " + to_string(cur));
        if (l.kernel_h > cur[1] || l.kernel_w > cur[2]) throw ShapeError(where + "kernel larger than input " + to_string(cur));
        cur = {l.units, cur[1] - l.kernel_h + 1, cur[2] - l.kernel_w + 1};
        break;
      case LayerKind::maxpool1d:
        if (cur.size() != 2 || cur[1] < 2) throw ShapeError(where + "needs [channels x length>=2], got " + to_string(cur));
        cur = {cur[0], cur[1] / 2};
        break;
      case LayerKind::maxpool2d:
        if (cur.size() != 3 || cur[1] < 2 || cur[2] < 2) throw ShapeError(where + "needs [channels x h>=2 x w>=2], got " + to_string(cur));
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerKind::dropout:
        if (!(l.rate >= 0.0 && l.rate < 1.0)) throw ParameterError(where + "rate must lie in [0, 1)");
        break;
      case LayerKind::flatten:
        cur = {shape_size(cur)};
        break;
      case LayerKind::activation:
        if (l.activation == Activation::softmax && cur.size() != 1) {
          throw ShapeError(where + "softmax needs a flat input, got " + to_string(cur));
        }
        break;
    }
    shapes.push_back(cur);
  }
  return shapes;
}

void validate(const NetworkSpec& spec) {
  const auto shapes = infer_shapes(spec);
  if (spec.layers.empty() || spec.layers.back().kind != LayerKind::activation ||
      spec.layers.back().activation != Activation::softmax) {
    throw ShapeError("network must end with a softmax activation");
  }
  if (shapes.back().size() != 1 || shapes.back()[0] < 1) throw ShapeError("softmax head must be flat");
}

std::size_t class_count(const NetworkSpec& spec) {
  const auto shapes = infer_shapes(spec);
  if (shapes.empty() || shapes.back().size() != 1) throw ShapeError("network output is not flat");
  return shapes.back()[0];
}

std::string describe(const NetworkSpec& spec) {
  std::string s = "input " + to_string(spec.input_shape);
  for (const LayerSpec& l : spec.layers) {
    s += " -> ";
    switch (l.kind) {
      case LayerKind::dense: s += "dense " + std::to_string(l.units); break;
      case LayerKind::conv1d: s += "conv1d " + std::to_string(l.units) + "x" + std::to_string(l.kernel_w); break;
      case LayerKind::conv2d:
        s += "conv2d " + std::to_string(l.units) + "x" + std::to_string(l.kernel_h) + "x" + std::to_string(l.kernel_w);
        break;
      case LayerKind::dropout: {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "dropout %g", l.rate);
        s += buf;
        break;
      }
      case LayerKind::activation: s += to_string(l.activation); break;
      default: s += to_string(l.kind); break;
    }
  }
  return s;
}

// ----- network --------------------------------------------------------------

namespace {

Shape with_batch(std::size_t n, const Shape& sample) {
  Shape s{n};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

std::pair<Shape, Shape> param_shapes(const LayerSpec& l, const Shape& in) {
  switch (l.kind) {
    case LayerKind::dense: return {{in[0], l.units}, {l.units}};
    case LayerKind::conv1d: return {{l.units, in[0], l.kernel_w}, {l.units}};
    case LayerKind::conv2d: return {{l.units, in[0], l.kernel_h, l.kernel_w}, {l.units}};
    default: return {};
  }
}

// Conv1d runs through the 2-D kernel with a unit-height image.
Tensor as_conv2d_input(const Tensor& x) { return x.reshaped({x.dim(0), x.dim(1), 1, x.dim(2)}); }
Tensor as_conv2d_weights(const Tensor& w) { return w.reshaped({w.dim(0), w.dim(1), 1, w.dim(2)}); }

}  // namespace

Network::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  validate(spec_);
  shapes_ = infer_shapes(spec_);
  param_index_.assign(spec_.layers.size(), -1);
  Shape in = spec_.input_shape;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (l.has_parameters()) {
      param_index_[i] = static_cast<int>(state_.params.size());
      auto [ws, bs] = param_shapes(l, in);
      state_.params.emplace_back(ws);
      state_.params.emplace_back(bs);
    }
    in = shapes_[i];
  }
  for (const Tensor& p : state_.params) {
    state_.grad_accum.emplace_back(p.shape());
    state_.update_accum.emplace_back(p.shape());
  }
}

Network::Network(NetworkSpec spec, NetworkState state) : Network(std::move(spec)) {
  if (state.params.size() != state_.params.size()) {
    throw StateError("state holds " + std::to_string(state.params.size()) + " parameter tensors, spec needs " +
                     std::to_string(state_.params.size()));
  }
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    if (state.params[i].shape() != state_.params[i].shape()) {
      throw StateError("parameter " + std::to_string(i) + " has shape " + to_string(state.params[i].shape()) +
                       ", spec needs " + to_string(state_.params[i].shape()));
    }
    if (!state.params[i].all_finite()) throw StateError("parameter " + std::to_string(i) + " is not finite");
  }
  auto fix_accum = [&](std::vector<Tensor>& acc) {
    if (acc.size() != state.params.size()) {
      acc.clear();
      for (const Tensor& p : state.params) acc.emplace_back(p.shape());
    }
  };
  fix_accum(state.grad_accum);
  fix_accum(state.update_accum);
  state_ = std::move(state);
}

void Network::initialize(SeededRng& rng) {
  Shape in = spec_.input_shape;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    if (l.has_parameters()) {
      Tensor& w = state_.params[param_index_[i]];
      Tensor& b = state_.params[param_index_[i] + 1];
      double fan_in = 0, fan_out = 0;
      if (l.kind == LayerKind::dense) {
        fan_in = static_cast<double>(in[0]);
        fan_out = static_cast<double>(l.units);
      } else {
        const double receptive = static_cast<double>(w.size() / (w.dim(0) * w.dim(1)));
        fan_in = static_cast<double>(w.dim(1)) * receptive;
        fan_out = static_cast<double>(w.dim(0)) * receptive;
      }
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (double& v : w.values()) v = rng.uniform(-bound, bound);
      b.fill(0.0);
    }
    in = shapes_[i];
  }
  for (Tensor& t : state_.grad_accum) t.fill(0.0);
  for (Tensor& t : state_.update_accum) t.fill(0.0);
  ++state_.version;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const Tensor& p : state_.params) n += p.size();
  return n;
}

std::size_t Network::micro_batch_size() const {
  constexpr std::size_t kBudget = std::size_t{48} << 20;  // doubles (384 MB)
  std::size_t per_sample = shape_size(spec_.input_shape);
  for (const Shape& s : shapes_) per_sample += shape_size(s);
  return std::max<std::size_t>(1, kBudget / std::max<std::size_t>(per_sample, 1));
}

namespace {

bool writes_fresh_output(LayerKind kind) {
  return kind == LayerKind::dense || kind == LayerKind::conv1d || kind == LayerKind::conv2d;
}

}  // namespace

ForwardTrace Network::forward(const Tensor& batch, Mode mode, SeededRng* dropout_rng) const {
  if (batch.rank() != spec_.input_shape.size() + 1 ||
      !std::equal(spec_.input_shape.begin(), spec_.input_shape.end(), batch.shape().begin() + 1)) {
    throw ShapeError("batch shape " + to_string(batch.shape()) + " does not match network input " +
                     to_string(spec_.input_shape));
  }
  ForwardTrace trace;
  trace.mode = mode;
  trace.version = state_.version;
  trace.activations.reserve(spec_.layers.size() + 1);
  trace.activations.push_back(batch);
  trace.argmax.resize(spec_.layers.size());
  trace.masks.resize(spec_.layers.size());
  run_layers(trace, 0, dropout_rng);
  return trace;
}

ForwardTrace Network::forward_from(const ForwardTrace& base, std::size_t layer) const {
  if (base.mode != Mode::eval || base.activations.size() != spec_.layers.size() + 1 ||
      layer >= spec_.layers.size() || base.activations[layer].size() == 0) {
    throw StateError("cannot resume forward pass from this trace");
  }
  ForwardTrace trace;
  trace.mode = Mode::eval;
  trace.version = state_.version;
  trace.first_layer = layer;
  trace.activations.resize(layer);
  trace.activations.reserve(spec_.layers.size() + 1);
  trace.activations.push_back(base.activations[layer]);
  trace.argmax.resize(spec_.layers.size());
  trace.masks.resize(spec_.layers.size());
  run_layers(trace, layer, nullptr);
  return trace;
}

void Network::run_layers(ForwardTrace& trace, std::size_t first, SeededRng* dropout_rng) const {
  const Mode mode = trace.mode;
  const std::size_t n = trace.activations.back().dim(0);
  for (std::size_t i = first; i < spec_.layers.size(); ++i) {
    const LayerSpec& l = spec_.layers[i];
    const Tensor& x = trace.activations.back();
    Tensor y;
    switch (l.kind) {
      case LayerKind::dense: {
        const Tensor& w = state_.params[param_index_[i]];
        const Tensor& b = state_.params[param_index_[i] + 1];
        const std::size_t in = w.dim(0), out = w.dim(1);
        y = Tensor({n, out});
        for (std::size_t s = 0; s < n; ++s) std::memcpy(y.data() + s * out, b.data(), out * sizeof(double));
        gemm(false, false, n, out, in, 1.0, x.data(), in, w.data(), out, 1.0, y.data(), out);
        break;
      }
      case LayerKind::conv1d: {
        const Tensor& w = state_.params[param_index_[i]];
        const Tensor& b = state_.params[param_index_[i] + 1];
        Tensor out = conv2d_forward(as_conv2d_input(x), as_conv2d_weights(w), b.values());
        y = out.reshaped(with_batch(n, shapes_[i]));
        break;
      }
      case LayerKind::conv2d: {
        const Tensor& w = state_.params[param_index_[i]];
        const Tensor& b = state_.params[param_index_[i] + 1];
        y = conv2d_forward(x, w, b.values());
        break;
      }
      case LayerKind::maxpool1d: {
        PoolResult r = maxpool1d_forward(x);
        y = std::move(r.output);
        trace.argmax[i] = std::move(r.argmax);
        break;
      }
      case LayerKind::maxpool2d: {
        PoolResult r = maxpool2d_forward(x);
        y = std::move(r.output);
        trace.argmax[i] = std::move(r.argmax);
        break;
      }
      case LayerKind::dropout: {
        y = x;
        if (mode == Mode::train && l.rate > 0.0) {
          if (!dropout_rng) throw StateError("train-mode dropout needs a random stream");
          const double keep_scale = 1.0 / (1.0 - l.rate);
          auto& mask = trace.masks[i];
          mask.resize(x.size());
          for (std::size_t k = 0; k < x.size(); ++k) {
            mask[k] = dropout_rng->uniform() < l.rate ? 0.0 : keep_scale;
            y[k] *= mask[k];
          }
        }
        break;
      }
      case LayerKind::flatten:
        y = x.reshaped(with_batch(n, shapes_[i]));
        break;
      case LayerKind::activation:
        if (l.activation == Activation::relu && i > first && writes_fresh_output(spec_.layers[i - 1].kind)) {
          // The pre-activation of a dense/conv layer is not needed by the
          // backward pass (relu's derivative reads the output sign), so reuse it.
          y = std::move(trace.activations.back());
          trace.activations.back() = Tensor();
        } else {
          y = x;
        }
        if (l.activation == Activation::relu) {
          relu_inplace(y.values());
        } else if (l.activation == Activation::sigmoid) {
          sigmoid_inplace(y.values());
        } else {
          softmax_rows_inplace(y.values(), shapes_[i][0]);
        }
        break;
    }
    trace.activations.push_back(std::move(y));
  }
  if (!trace.output().all_finite()) throw StateError("network produced non-finite outputs");
}

Gradients Network::backward(const ForwardTrace& trace, const Tensor& one_hot_targets) const {
  if (trace.version != state_.version || trace.first_layer != 0 ||
      trace.activations.size() != spec_.layers.size() + 1) {
    throw StateError("forward trace is stale or belongs to a different network");
  }
  const Tensor& probs = trace.output();
  if (one_hot_targets.shape() != probs.shape()) {
    throw ShapeError("targets " + to_string(one_hot_targets.shape()) + " do not match outputs " +
                     to_string(probs.shape()));
  }
  const std::size_t n = probs.dim(0);
  Gradients grads;
  grads.reserve(state_.params.size());
  for (const Tensor& p : state_.params) grads.emplace_back(p.shape());

  // Softmax + cross-entropy: d loss / d logits = (p - y) / n.
  Tensor g = probs;
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = (g[k] - one_hot_targets[k]) / static_cast<double>(n);

  for (std::size_t li = spec_.layers.size() - 1; li-- > 0;) {
    const LayerSpec& l = spec_.layers[li];
    const Tensor& x = trace.activations[li];
    const Tensor& y = trace.activations[li + 1];
    const bool need_input_grad = li > 0;
    switch (l.kind) {
      case LayerKind::dense: {
        const Tensor& w = state_.params[param_index_[li]];
        const std::size_t in = w.dim(0), out = w.dim(1);
        Tensor& gw = grads[param_index_[li]];
        Tensor& gb = grads[param_index_[li] + 1];
        gemm(true, false, in, out, n, 1.0, x.data(), in, g.data(), out, 0.0, gw.data(), out);
        for (std::size_t s = 0; s < n; ++s)
          for (std::size_t j = 0; j < out; ++j) gb[j] += g[s * out + j];
        if (need_input_grad) {
          Tensor gx(x.shape());
          gemm(false, true, n, in, out, 1.0, g.data(), out, w.data(), out, 0.0, gx.data(), in);
          g = std::move(gx);
        }
        break;
      }
      case LayerKind::conv1d: {
        const Tensor w4 = as_conv2d_weights(state_.params[param_index_[li]]);
        Tensor gw4(w4.shape());
        Tensor& gb = grads[param_index_[li] + 1];
        Tensor gx4;
        const Tensor x4 = as_conv2d_input(x);
        const Tensor g4 = g.reshaped({n, g.dim(1), 1, g.dim(2)});
        conv2d_backward(x4, w4, g4, gw4, gb, need_input_grad ? &gx4 : nullptr);
        grads[param_index_[li]] = gw4.reshaped(state_.params[param_index_[li]].shape());
        if (need_input_grad) g = gx4.reshaped(x.shape());
        break;
      }
      case LayerKind::conv2d: {
        Tensor gx;
        conv2d_backward(x, state_.params[param_index_[li]], g, grads[param_index_[li]],
                        grads[param_index_[li] + 1], need_input_grad ? &gx : nullptr);
        if (need_input_grad) g = std::move(gx);
        break;
      }
      case LayerKind::maxpool1d:
      case LayerKind::maxpool2d:
        g = maxpool_backward(g, trace.argmax[li], with_batch(n, li == 0 ? spec_.input_shape : shapes_[li - 1]));
        break;
      case LayerKind::dropout: {
        const auto& mask = trace.masks[li];
        if (!mask.empty()) {
          for (std::size_t k = 0; k < g.size(); ++k) g[k] *= mask[k];
        }
        break;
      }
      case LayerKind::flatten:
        g = g.reshaped(with_batch(n, li == 0 ? spec_.input_shape : shapes_[li - 1]));
        break;
      case LayerKind::activation:
        if (l.activation == Activation::relu) {
          for (std::size_t k = 0; k < g.size(); ++k)
            if (!(y[k] > 0.0)) g[k] = 0.0;
        } else if (l.activation == Activation::sigmoid) {
          for (std::size_t k = 0; k < g.size(); ++k) g[k] *= y[k] * (1.0 - y[k]);
        } else {
          const std::size_t k_len = y.dim(1);
          for (std::size_t s = 0; s < n; ++s) {
            double dot = 0.0;
            for (std::size_t j = 0; j < k_len; ++j) dot += g[s * k_len + j] * y[s * k_len + j];
            for (std::size_t j = 0; j < k_len; ++j) g[s * k_len + j] = y[s * k_len + j] * (g[s * k_len + j] - dot);
          }
        }
        break;
    }
  }
  return grads;
}

Tensor Network::predict_proba(const Tensor& inputs) const {
  if (inputs.rank() == 0) throw ShapeError("empty input tensor");
  const std::size_t n = inputs.dim(0);
  const std::size_t classes = shapes_.back()[0];
  Tensor probs({n, classes});
  const std::size_t chunk = micro_batch_size();
  std::vector<std::size_t> rows;
  for (std::size_t s0 = 0; s0 < n; s0 += chunk) {
    const std::size_t count = std::min(chunk, n - s0);
    rows.resize(count);
    for (std::size_t k = 0; k < count; ++k) rows[k] = s0 + k;
    const ForwardTrace t = forward(gather_rows(inputs, rows), Mode::eval);
    std::memcpy(probs.data() + s0 * classes, t.output().data(), count * classes * sizeof(double));
  }
  return probs;
}

// ----- losses and optimizers ------------------------------------------------

Tensor one_hot(std::span<const int> labels, std::size_t classes) {
  Tensor t({labels.size(), classes});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw LabelError("label " + std::to_string(labels[i]) + " outside [0, " + std::to_string(classes) + ")");
    }
    t.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return t;
}

double cross_entropy(const Tensor& probs, const Tensor& targets) {
  if (probs.rank() != 2 || probs.shape() != targets.shape()) {
    throw ShapeError("cross_entropy: probabilities " + to_string(probs.shape()) + " vs targets " +
                     to_string(targets.shape()));
  }
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t j = 0; j < k; ++j) {
      const double t = targets.at(s, j);
      if (t != 0.0) loss -= t * std::log(std::max(probs.at(s, j), 1e-12));
    }
  }
  return loss / static_cast<double>(n);
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = j;
  return best;
}

namespace {

void check_gradients(const NetworkState& state, const Gradients& grads) {
  if (grads.size() != state.params.size()) throw StateError("gradient count does not match parameters");
  for (std::size_t i = 0; i < grads.size(); ++i)
    if (grads[i].shape() != state.params[i].shape()) throw StateError("gradient shape mismatch");
}

}  // namespace

void adadelta_step(NetworkState& state, const Gradients& grads, const AdadeltaConfig& cfg) {
  check_gradients(state, grads);
  if (state.grad_accum.size() != state.params.size() || state.update_accum.size() != state.params.size()) {
    throw StateError("optimizer accumulators missing");
  }
  const double rho = cfg.rho, eps = cfg.epsilon;
  for (std::size_t p = 0; p < state.params.size(); ++p) {
    double* w = state.params[p].data();
    double* eg = state.grad_accum[p].data();
    double* ed = state.update_accum[p].data();
    const double* g = grads[p].data();
    for (std::size_t k = 0; k < state.params[p].size(); ++k) {
      eg[k] = rho * eg[k] + (1.0 - rho) * g[k] * g[k];
      const double delta = -(std::sqrt(ed[k] + eps) / std::sqrt(eg[k] + eps)) * g[k];
      ed[k] = rho * ed[k] + (1.0 - rho) * delta * delta;
      w[k] += cfg.learning_rate * delta;
    }
  }
  ++state.version;
}

void sgd_step(NetworkState& state, const Gradients& grads, double eta) {
  check_gradients(state, grads);
  for (std::size_t p = 0; p < state.params.size(); ++p) {
    double* w = state.params[p].data();
    const double* g = grads[p].data();
    for (std::size_t k = 0; k < state.params[p].size(); ++k) w[k] -= eta * g[k];
  }
  ++state.version;
}

}  // namespace terradeep
