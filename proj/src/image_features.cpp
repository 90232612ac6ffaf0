#include "terradeep/image_features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "terradeep/error.hpp"

namespace terradeep {

void HogConfig::validate() const {
  if (cell_size < 2) throw ParameterError("HOG cell_size must be >= 2");
  if (bins < 2) throw ParameterError("HOG bins must be >= 2");
  if (block < 1) throw ParameterError("HOG block must be >= 1");
  if (block_stride < 1) throw ParameterError("HOG block_stride must be >= 1");
  if (!(norm_epsilon > 0.0)) throw ParameterError("HOG norm_epsilon must be > 0");
}

GrayImage to_grayscale(const GrayImage& r, const GrayImage& g, const GrayImage& b) {
  if (r.height != g.height || r.height != b.height || r.width != g.width || r.width != b.width ||
      r.pixels.size() != g.pixels.size() || r.pixels.size() != b.pixels.size()) {
    throw ShapeError("to_grayscale: channel shapes differ");
  }
  GrayImage out(r.height, r.width);
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    const double v = 0.299 * r.pixels[i] + 0.587 * g.pixels[i] + 0.114 * b.pixels[i];
    out.pixels[i] = std::clamp(v, 0.0, 255.0);
  }
  return out;
}

namespace {

struct Sample {
  std::size_t lo, hi;
  double frac;
};

std::vector<Sample> sample_grid(std::size_t in, std::size_t out) {
  std::vector<Sample> grid(out);
  for (std::size_t i = 0; i < out; ++i) {
    const double src = out == 1 ? 0.5 * static_cast<double>(in - 1)
                                : static_cast<double>(i) * static_cast<double>(in - 1) /
                                      static_cast<double>(out - 1);
    const std::size_t lo = std::min(static_cast<std::size_t>(std::floor(src)), in - 1);
    const std::size_t hi = std::min(lo + 1, in - 1);
    grid[i] = {lo, hi, src - static_cast<double>(lo)};
  }
  return grid;
}

}  // namespace

GrayImage resize_bilinear(const GrayImage& image, std::size_t out_h, std::size_t out_w) {
  if (image.empty() || image.height * image.width != image.pixels.size()) {
    throw ParameterError("resize_bilinear: empty or inconsistent source image");
  }
  if (out_h == 0 || out_w == 0) throw ParameterError("resize_bilinear: target size must be >= 1");
  if (out_h == image.height && out_w == image.width) return image;
  const auto ys = sample_grid(image.height, out_h);
  const auto xs = sample_grid(image.width, out_w);
  GrayImage out(out_h, out_w);
  for (std::size_t i = 0; i < out_h; ++i) {
    const Sample& sy = ys[i];
    for (std::size_t j = 0; j < out_w; ++j) {
      const Sample& sx = xs[j];
      const double top = image.at(sy.lo, sx.lo) * (1.0 - sx.frac) + image.at(sy.lo, sx.hi) * sx.frac;
      const double bot = image.at(sy.hi, sx.lo) * (1.0 - sx.frac) + image.at(sy.hi, sx.hi) * sx.frac;
      out.at(i, j) = top * (1.0 - sy.frac) + bot * sy.frac;
    }
  }
  return out;
}

namespace {

struct Geometry {
  std::size_t cells_y, cells_x, blocks_y, blocks_x;
};

Geometry hog_geometry(std::size_t height, std::size_t width, const HogConfig& cfg) {
  cfg.validate();
  Geometry g{height / cfg.cell_size, width / cfg.cell_size, 0, 0};
  if (g.cells_y < cfg.block || g.cells_x < cfg.block) {
    throw ShapeError("image " + std::to_string(height) + "x" + std::to_string(width) +
                     " is smaller than one HOG block of " + std::to_string(cfg.block) + "x" +
                     std::to_string(cfg.block) + " cells of " + std::to_string(cfg.cell_size) + " px");
  }
  g.blocks_y = (g.cells_y - cfg.block) / cfg.block_stride + 1;
  g.blocks_x = (g.cells_x - cfg.block) / cfg.block_stride + 1;
  return g;
}

void vote(const GrayImage& image, std::size_t y, std::size_t x, const HogConfig& cfg, double* hist) {
  const std::size_t h = image.height, w = image.width;
  const double gx = image.at(y, std::min(x + 1, w - 1)) - image.at(y, x > 0 ? x - 1 : 0);
  const double gy = image.at(std::min(y + 1, h - 1), x) - image.at(y > 0 ? y - 1 : 0, x);
  const double mag = std::hypot(gx, gy);
  if (mag == 0.0) return;
  double angle = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
  if (angle < 0.0) angle += 180.0;
  if (angle >= 180.0) angle -= 180.0;
  const double pos = angle * static_cast<double>(cfg.bins) / 180.0;
  const double base = std::floor(pos);
  const double frac = pos - base;
  const std::size_t lo = static_cast<std::size_t>(base) % cfg.bins;
  const std::size_t hi = (lo + 1) % cfg.bins;
  hist[lo] += mag * (1.0 - frac);
  hist[hi] += mag * frac;
}

}  // namespace

std::size_t hog_length(std::size_t height, std::size_t width, const HogConfig& cfg) {
  const Geometry g = hog_geometry(height, width, cfg);
  return g.blocks_y * g.blocks_x * cfg.block * cfg.block * cfg.bins;
}

std::vector<double> hog_cell_histogram(const GrayImage& image, std::size_t y0, std::size_t x0,
                                       const HogConfig& cfg) {
  cfg.validate();
  if (y0 + cfg.cell_size > image.height || x0 + cfg.cell_size > image.width) {
    throw ShapeError("HOG cell lies outside the image");
  }
  std::vector<double> hist(cfg.bins, 0.0);
  for (std::size_t y = y0; y < y0 + cfg.cell_size; ++y)
    for (std::size_t x = x0; x < x0 + cfg.cell_size; ++x) vote(image, y, x, cfg, hist.data());
  return hist;
}

std::vector<double> hog_descriptor(const GrayImage& image, const HogConfig& cfg) {
  if (image.height * image.width != image.pixels.size()) throw ShapeError("inconsistent image");
  const Geometry g = hog_geometry(image.height, image.width, cfg);
  const std::size_t bins = cfg.bins;

  std::vector<double> cells(g.cells_y * g.cells_x * bins, 0.0);
  for (std::size_t cy = 0; cy < g.cells_y; ++cy) {
    for (std::size_t cx = 0; cx < g.cells_x; ++cx) {
      double* hist = cells.data() + (cy * g.cells_x + cx) * bins;
      for (std::size_t y = cy * cfg.cell_size; y < (cy + 1) * cfg.cell_size; ++y)
        for (std::size_t x = cx * cfg.cell_size; x < (cx + 1) * cfg.cell_size; ++x)
          vote(image, y, x, cfg, hist);
    }
  }

  const std::size_t block_len = cfg.block * cfg.block * bins;
  std::vector<double> out;
  out.reserve(g.blocks_y * g.blocks_x * block_len);
  std::vector<double> block(block_len);
  for (std::size_t by = 0; by < g.blocks_y; ++by) {
    for (std::size_t bx = 0; bx < g.blocks_x; ++bx) {
      std::size_t k = 0;
      for (std::size_t dy = 0; dy < cfg.block; ++dy) {
        for (std::size_t dx = 0; dx < cfg.block; ++dx) {
          const std::size_t cy = by * cfg.block_stride + dy, cx = bx * cfg.block_stride + dx;
          const double* hist = cells.data() + (cy * g.cells_x + cx) * bins;
          for (std::size_t b = 0; b < bins; ++b) block[k++] = hist[b];
        }
      }
      double norm = 0.0;
      for (double v : block) norm += v * v;
      const double scale = 1.0 / (std::sqrt(norm) + cfg.norm_epsilon);
      for (double v : block) out.push_back(v * scale);
    }
  }
  return out;
}

}  // namespace terradeep
