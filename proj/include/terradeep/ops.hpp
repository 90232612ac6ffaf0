#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "terradeep/tensor.hpp"

namespace terradeep {

// ---------------------------------------------------------------------------
// Single-sample operations
// ---------------------------------------------------------------------------

// c[i][j] = sum_p a[i][p] * b[p][j]. Throws ShapeError naming both shapes.
Tensor matmul(const Tensor& a, const Tensor& b);

// Valid cross-correlation (no flip, stride 1, no padding).
// signal [channels x length], kernels [filters x channels x width]
Tensor conv1d_valid(const Tensor& signal, const Tensor& kernels);
// image [channels x h x w], kernels [filters x channels x kh x kw]
Tensor conv2d_valid(const Tensor& image, const Tensor& kernels);

struct PoolResult {
  Tensor output;
  // Flat index into the pooled input of the winning element of each output
  // cell. Ties go to the first element in row-major window order.
  std::vector<std::size_t> argmax;
};

// 2x2 windows, stride 2; a trailing odd row/column is dropped.
PoolResult maxpool2d(const Tensor& input);  // [channels x h x w]
// width-2 windows, stride 2.
PoolResult maxpool1d(const Tensor& input);  // [channels x length]

// Scatters grad_output into a zero tensor of input_shape at the argmax sites.
Tensor maxpool_backward(const Tensor& grad_output, std::span<const std::size_t> argmax,
                        const Shape& input_shape);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
// Row-wise softmax over the last axis of a rank-1 or rank-2 tensor.
Tensor softmax(const Tensor& x);

// ---------------------------------------------------------------------------
// Batched kernels used by the network engine (leading axis = sample)
// ---------------------------------------------------------------------------

// Row-major C = alpha * op(A) * op(B) + beta * C.
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, double alpha,
          const double* a, std::size_t lda, const double* b, std::size_t ldb, double beta, double* c,
          std::size_t ldc);

// input [n x c x h x w], weights [f x c x kh x kw], bias [f] (may be empty).
Tensor conv2d_forward(const Tensor& input, const Tensor& weights, std::span<const double> bias);

// Accumulates into grad_weights / grad_bias; writes grad_input when non-null.
void conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_output,
                     Tensor& grad_weights, Tensor& grad_bias, Tensor* grad_input);

// input [n x c x h x w] -> [n x c x h/2 x w/2]
PoolResult maxpool2d_forward(const Tensor& input);
// input [n x c x length] -> [n x c x length/2]
PoolResult maxpool1d_forward(const Tensor& input);

void relu_inplace(std::span<double> x);
void sigmoid_inplace(std::span<double> x);
void softmax_rows_inplace(std::span<double> x, std::size_t row_length);

}  // namespace terradeep
