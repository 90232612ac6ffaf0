#include "terradeep/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Core>

#include "terradeep/error.hpp"

namespace terradeep {

namespace {

struct ConvGeometry {
  std::size_t n, c, h, w;  // input
  std::size_t f, kh, kw;   // kernels
  std::size_t oh() const { return h - kh + 1; }
  std::size_t ow() const { return w - kw + 1; }
  std::size_t patch() const { return c * kh * kw; }
  std::size_t positions() const { return oh() * ow(); }
};

// A block of output positions: samples [s0, s0 + count) when whole samples
// are small, else output rows [y0, y0 + rows) of the single sample s0.
struct ConvTile {
  std::size_t s0, count, y0, rows;
  std::size_t cols(const ConvGeometry& g) const { return count * rows * g.ow(); }
};

// Column buffers stay near 1 MB so the GEMM operands remain cache resident.
std::vector<ConvTile> conv_tiles(const ConvGeometry& g) {
  const std::size_t budget = std::size_t{1} << 17;
  const std::size_t K = g.patch(), ow = g.ow(), oh = g.oh();
  std::vector<ConvTile> tiles;
  if (K * g.positions() <= budget) {
    const std::size_t chunk = std::clamp<std::size_t>(budget / (K * g.positions()), 1, g.n);
    for (std::size_t s0 = 0; s0 < g.n; s0 += chunk) tiles.push_back({s0, std::min(chunk, g.n - s0), 0, oh});
    return tiles;
  }
  const std::size_t rows = std::clamp<std::size_t>(budget / (K * ow), 1, oh);
  for (std::size_t s = 0; s < g.n; ++s) {
    for (std::size_t y0 = 0; y0 < oh; y0 += rows) tiles.push_back({s, 1, y0, std::min(rows, oh - y0)});
  }
  return tiles;
}

// Row r = (ci, ki, kj) of the tile's columns; column (s - s0) * rows * ow +
// (oy - y0) * ow + ox.
void im2col(const double* input, const ConvGeometry& g, const ConvTile& t, double* col) {
  const std::size_t ow = g.ow(), span = t.rows * ow, ldc = t.cols(g);
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        double* row = col + ((ci * g.kh + ki) * g.kw + kj) * ldc;
        for (std::size_t s = 0; s < t.count; ++s) {
          const double* plane = input + ((t.s0 + s) * g.c + ci) * g.h * g.w;
          double* dst = row + s * span;
          for (std::size_t r = 0; r < t.rows; ++r) {
            std::memcpy(dst + r * ow, plane + (t.y0 + r + ki) * g.w + kj, ow * sizeof(double));
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, const ConvTile& t, double* grad_input) {
  const std::size_t ow = g.ow(), span = t.rows * ow, ldc = t.cols(g);
  for (std::size_t ci = 0; ci < g.c; ++ci) {
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const double* row = col + ((ci * g.kh + ki) * g.kw + kj) * ldc;
        for (std::size_t s = 0; s < t.count; ++s) {
          double* plane = grad_input + ((t.s0 + s) * g.c + ci) * g.h * g.w;
          const double* src = row + s * span;
          for (std::size_t r = 0; r < t.rows; ++r) {
            double* dst = plane + (t.y0 + r + ki) * g.w + kj;
            const double* s_row = src + r * ow;
            for (std::size_t ox = 0; ox < ow; ++ox) dst[ox] += s_row[ox];
          }
        }
      }
    }
  }
}

ConvGeometry geometry(const Tensor& input, const Tensor& weights) {
  if (input.rank() != 4 || weights.rank() != 4) {
    throw ShapeError("conv2d expects input [n x c x h x w] and kernels [f x c x kh x kw], got " +
                     to_string(input.shape()) + " and " + to_string(weights.shape()));
  }
  ConvGeometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3),
                 weights.dim(0), weights.dim(2), weights.dim(3)};
  if (weights.dim(1) != g.c) {
    throw ShapeError("kernel channels " + std::to_string(weights.dim(1)) +
                     " do not match input channels " + std::to_string(g.c));
  }
  if (g.kh > g.h || g.kw > g.w || g.kh == 0 || g.kw == 0) {
    throw ShapeError("kernel " + std::to_string(g.kh) + "x" + std::to_string(g.kw) +
                     " does not fit input " + std::to_string(g.h) + "x" + std::to_string(g.w));
  }
  return g;
}

}  // namespace

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc) {
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using ConstView = Eigen::Map<const Mat, 0, Eigen::OuterStride<>>;
  using View = Eigen::Map<Mat, 0, Eigen::OuterStride<>>;
  if (m == 0 || n == 0) return;
  const auto rows = [](bool t, std::size_t r, std::size_t cl) { return static_cast<Eigen::Index>(t ? cl : r); };
  const auto cols = [](bool t, std::size_t r, std::size_t cl) { return static_cast<Eigen::Index>(t ? r : cl); };
  View C(c, static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n), Eigen::OuterStride<>(ldc));
  if (beta == 0.0) {
    C.setZero();
  } else if (beta != 1.0) {
    C *= beta;
  }
  if (k == 0) return;
  ConstView A(a, rows(trans_a, m, k), cols(trans_a, m, k), Eigen::OuterStride<>(lda));
  ConstView B(b, rows(trans_b, k, n), cols(trans_b, k, n), Eigen::OuterStride<>(ldb));
  if (trans_a && trans_b) {
    C.noalias() += alpha * A.transpose() * B.transpose();
  } else if (trans_a) {
    C.noalias() += alpha * A.transpose() * B;
  } else if (trans_b) {
    C.noalias() += alpha * A * B.transpose();
  } else {
    C.noalias() += alpha * A * B;
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("dimension error: cannot multiply " + to_string(a.shape()) + " by " +
                     to_string(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor c({m, n});
  gemm(false, false, m, n, k, 1.0, a.data(), k, b.data(), n, 0.0, c.data(), n);
  return c;
}

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias) {
  const ConvGeometry g = geometry(input, weights);
  if (!bias.empty() && bias.size() != g.f) throw ShapeError("conv bias length mismatch");
  const std::size_t P = g.positions(), K = g.patch();
  Tensor out({g.n, g.f, g.oh(), g.ow()});
  for (std::size_t s = 0; s < g.n; ++s) {
    for (std::size_t fi = 0; fi < g.f; ++fi) {
      double* dst = out.data() + (s * g.f + fi) * P;
      std::fill(dst, dst + P, bias.empty() ? 0.0 : bias[fi]);
    }
  }
  const std::vector<ConvTile> tiles = conv_tiles(g);
  std::vector<double> col, y;
  for (const ConvTile& t : tiles) {
    const std::size_t cols = t.cols(g);
    col.resize(K * cols);
    im2col(input.data(), g, t, col.data());
    if (t.count == 1) {
      double* dst = out.data() + t.s0 * g.f * P + t.y0 * g.ow();
      gemm(false, false, g.f, cols, K, 1.0, weights.data(), K, col.data(), cols, 1.0, dst, P);
      continue;
    }
    y.resize(g.f * cols);
    gemm(false, false, g.f, cols, K, 1.0, weights.data(), K, col.data(), cols, 0.0, y.data(), cols);
    for (std::size_t s = 0; s < t.count; ++s) {
      for (std::size_t fi = 0; fi < g.f; ++fi) {
        double* dst = out.data() + ((t.s0 + s) * g.f + fi) * P;
        const double* src = y.data() + fi * cols + s * P;
        for (std::size_t p = 0; p < P; ++p) dst[p] += src[p];
      }
    }
  }
  return out;
}

void conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                     Tensor& grad_weights, Tensor& grad_bias, Tensor* grad_input) {
  const ConvGeometry g = geometry(input, weights);
  const std::size_t P = g.positions(), K = g.patch();
  if (grad_output.shape() != Shape{g.n, g.f, g.oh(), g.ow()}) {
    throw ShapeError("conv gradient shape " + to_string(grad_output.shape()) + " does not match output");
  }
  if (grad_weights.shape() != weights.shape()) grad_weights = Tensor(weights.shape());
  if (grad_bias.shape() != Shape{g.f}) grad_bias = Tensor({g.f});
  if (grad_input) *grad_input = Tensor(input.shape());

  for (std::size_t s = 0; s < g.n; ++s) {
    for (std::size_t fi = 0; fi < g.f; ++fi) {
      const double* row = grad_output.data() + (s * g.f + fi) * P;
      double acc = 0.0;
      for (std::size_t p = 0; p < P; ++p) acc += row[p];
      grad_bias[fi] += acc;
    }
  }
  const std::vector<ConvTile> tiles = conv_tiles(g);
  std::vector<double> col, dy, dcol;
  for (const ConvTile& t : tiles) {
    const std::size_t cols = t.cols(g);
    const double* dy_ptr = nullptr;
    std::size_t ld_dy = cols;
    if (t.count == 1) {
      dy_ptr = grad_output.data() + t.s0 * g.f * P + t.y0 * g.ow();
      ld_dy = P;
    } else {
      dy.resize(g.f * cols);
      for (std::size_t s = 0; s < t.count; ++s) {
        for (std::size_t fi = 0; fi < g.f; ++fi) {
          const double* src = grad_output.data() + ((t.s0 + s) * g.f + fi) * P;
          std::memcpy(dy.data() + fi * cols + s * P, src, P * sizeof(double));
        }
      }
      dy_ptr = dy.data();
    }
    col.resize(K * cols);
    im2col(input.data(), g, t, col.data());
    gemm(false, true, g.f, K, cols, 1.0, dy_ptr, ld_dy, col.data(), cols, 1.0, grad_weights.data(), K);
    if (grad_input) {
      dcol.resize(K * cols);
      gemm(true, false, K, cols, g.f, 1.0, weights.data(), K, dy_ptr, ld_dy, 0.0, dcol.data(), cols);
      col2im_add(dcol.data(), g, t, grad_input->data());
    }
  }
}

Tensor conv2d_valid(const Tensor& image, const Tensor& kernels) {
  if (image.rank() != 3 || kernels.rank() != 4) {
    throw ShapeError("conv2d_valid expects image [c x h x w] and kernels [f x c x kh x kw], got " +
                     to_string(image.shape()) + " and " + to_string(kernels.shape()));
  }
  Tensor batched = image.reshaped({1, image.dim(0), image.dim(1), image.dim(2)});
  Tensor out = conv2d_forward(batched, kernels, {});
  return out.reshaped({out.dim(1), out.dim(2), out.dim(3)});
}

Tensor conv1d_valid(const Tensor& signal, const Tensor& kernels) {
  if (signal.rank() != 2 || kernels.rank() != 3) {
    throw ShapeError("conv1d_valid expects signal [c x length] and kernels [f x c x width], got " +
                     to_string(signal.shape()) + " and " + to_string(kernels.shape()));
  }
  if (kernels.dim(2) > signal.dim(1)) {
    throw ShapeError("kernel width " + std::to_string(kernels.dim(2)) + " exceeds signal length " +
                     std::to_string(signal.dim(1)));
  }
  Tensor batched = signal.reshaped({1, signal.dim(0), 1, signal.dim(1)});
  Tensor k4 = kernels.reshaped({kernels.dim(0), kernels.dim(1), 1, kernels.dim(2)});
  Tensor out = conv2d_forward(batched, k4, {});
  return out.reshaped({out.dim(1), out.dim(3)});
}

PoolResult maxpool2d_forward(const Tensor& input) {
  if (input.rank() != 4) throw ShapeError("maxpool2d expects [n x c x h x w], got " + to_string(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
  if (h < 2 || w < 2) throw ShapeError("maxpool2d needs h >= 2 and w >= 2, got " + to_string(input.shape()));
  const std::size_t oh = h / 2, ow = w / 2;
  PoolResult r{Tensor({n, c, oh, ow}), std::vector<std::size_t>(n * c * oh * ow)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * h * w;
    const double* x = input.data() + base;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = (2 * oy) * w + 2 * ox;
        const std::size_t candidates[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t cand : candidates)
          if (x[cand] > x[best]) best = cand;
        r.output[o] = x[best];
        r.argmax[o] = base + best;
      }
    }
  }
  return r;
}

PoolResult maxpool1d_forward(const Tensor& input) {
  if (input.rank() != 3) throw ShapeError("maxpool1d expects [n x c x length], got " + to_string(input.shape()));
  const std::size_t n = input.dim(0), c = input.dim(1), len = input.dim(2);
  if (len < 2) throw ShapeError("maxpool1d needs length >= 2, got " + to_string(input.shape()));
  const std::size_t ol = len / 2;
  PoolResult r{Tensor({n, c, ol}), std::vector<std::size_t>(n * c * ol)};
  std::size_t o = 0;
  for (std::size_t plane = 0; plane < n * c; ++plane) {
    const std::size_t base = plane * len;
    for (std::size_t i = 0; i < ol; ++i, ++o) {
      std::size_t best = base + 2 * i;
      if (input[best + 1] > input[best]) ++best;
      r.output[o] = input[best];
      r.argmax[o] = best;
    }
  }
  return r;
}

PoolResult maxpool2d(const Tensor& input) {
  if (input.rank() != 3) throw ShapeError("maxpool2d expects [c x h x w], got " + to_string(input.shape()));
  PoolResult r = maxpool2d_forward(input.reshaped({1, input.dim(0), input.dim(1), input.dim(2)}));
  r.output = r.output.reshaped({r.output.dim(1), r.output.dim(2), r.output.dim(3)});
  return r;
}

PoolResult maxpool1d(const Tensor& input) {
  if (input.rank() != 2) throw ShapeError("maxpool1d expects [c x length], got " + to_string(input.shape()));
  PoolResult r = maxpool1d_forward(input.reshaped({1, input.dim(0), input.dim(1)}));
  r.output = r.output.reshaped({r.output.dim(1), r.output.dim(2)});
  return r;
}

Tensor maxpool_backward(const Tensor& grad_output, std::span<const std::size_t> argmax,
                        const Shape& input_shape) {
  if (grad_output.size() != argmax.size()) throw ShapeError("pool gradient / argmax length mismatch");
  Tensor grad(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    if (argmax[i] >= grad.size()) throw ShapeError("argmax index outside pooled input");
    grad[argmax[i]] += grad_output[i];
  }
  return grad;
}

void relu_inplace(std::span<double> x) {
  for (double& v : x) v = v > 0.0 ? v : 0.0;
}

void sigmoid_inplace(std::span<double> x) {
  for (double& v : x) {
    if (v >= 0.0) {
      v = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      v = e / (1.0 + e);
    }
  }
}

void softmax_rows_inplace(std::span<double> x, std::size_t row_length) {
  if (row_length == 0 || x.size() % row_length != 0) throw ShapeError("softmax row length mismatch");
  for (std::size_t r = 0; r < x.size(); r += row_length) {
    double* row = x.data() + r;
    const double mx = *std::max_element(row, row + row_length);
    double sum = 0.0;
    for (std::size_t j = 0; j < row_length; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (std::size_t j = 0; j < row_length; ++j) row[j] /= sum;
  }
}

Tensor relu(const Tensor& x) {
  Tensor y = x;
  relu_inplace(y.values());
  return y;
}

Tensor sigmoid(const Tensor& x) {
  Tensor y = x;
  sigmoid_inplace(y.values());
  return y;
}

Tensor softmax(const Tensor& x) {
  if (x.rank() != 1 && x.rank() != 2) throw ShapeError("softmax expects a vector or one row per sample");
  Tensor y = x;
  softmax_rows_inplace(y.values(), x.shape().back());
  return y;
}

}  // namespace terradeep
