#pragma once

#include <cstddef>
#include <vector>

namespace terradeep {

// Row-major grayscale image with intensities in [0, 255].
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  GrayImage() = default;
  GrayImage(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w, fill) {}

  double& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  double at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
  bool empty() const { return pixels.empty(); }
};

struct HogConfig {
  std::size_t cell_size = 8;     // pixels
  std::size_t bins = 9;          // unsigned orientations over [0, 180)
  std::size_t block = 2;         // cells per block side
  std::size_t block_stride = 1;  // cells
  double norm_epsilon = 1e-6;

  void validate() const;
};

// 0.299 R + 0.587 G + 0.114 B, clamped to [0, 255].
GrayImage to_grayscale(const GrayImage& r, const GrayImage& g, const GrayImage& b);

// Bilinear interpolation with corner-aligned sample grids: output row i reads
// source row i * (h - 1) / (out_h - 1).
GrayImage resize_bilinear(const GrayImage& image, std::size_t out_h, std::size_t out_w);

std::size_t hog_length(std::size_t height, std::size_t width, const HogConfig& cfg);

// Orientation histogram of one cell whose top-left pixel is (y0, x0).
// Bin b is centred on b * 180 / bins degrees; votes are magnitude-weighted
// and split linearly between the two nearest centres.
std::vector<double> hog_cell_histogram(const GrayImage& image, std::size_t y0, std::size_t x0,
                                       const HogConfig& cfg);

std::vector<double> hog_descriptor(const GrayImage& image, const HogConfig& cfg = {});

}  // namespace terradeep
