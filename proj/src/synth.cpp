#include <algorithm>
#include <cmath>
#include <numbers>

#include "terradeep/datasets.hpp"
#include "terradeep/error.hpp"
#include "terradeep/rng.hpp"

namespace terradeep {

// ----- slip telemetry -------------------------------------------------------

namespace {

struct SlipRegime {
  double slip_lo, slip_hi;
  double torque_mean;
  double imu_variance;
};

constexpr SlipRegime kRegimes[3] = {
    {5.0, 25.0, 2.0, 0.01},
    {35.0, 55.0, 5.0, 0.25},
    {65.0, 95.0, 9.0, 1.0},
};
constexpr double kTorqueNoiseSd = 0.5;
constexpr double kSampleRateHz = 100.0;
constexpr std::uint64_t kTraverseMin = 100, kTraverseMax = 300;

std::uint64_t channel_stream(std::uint64_t channel) {
  return (static_cast<std::uint64_t>(Stream::data) << 8) | channel;
}

}  // namespace

std::vector<SensorFrame> synth_slip(std::size_t n_per_class, std::size_t nw, std::uint64_t seed) {
  if (nw == 0) throw ParameterError("synth_slip: window size must be >= 1");
  if (n_per_class < nw) {
    throw ParameterError("synth_slip: n_per_class (" + std::to_string(n_per_class) +
                         ") must be >= window size (" + std::to_string(nw) + ")");
  }
  SeededRng slip_rng(seed, channel_stream(0));
  SeededRng torque_rng(seed, channel_stream(1));
  SeededRng ax_rng(seed, channel_stream(2));
  SeededRng pitch_rng(seed, channel_stream(3));
  SeededRng az_rng(seed, channel_stream(4));
  SeededRng drive_rng(seed, channel_stream(5));

  std::vector<SensorFrame> frames;
  frames.reserve(3 * n_per_class);
  double direction = drive_rng.bernoulli(0.5) ? 1.0 : -1.0;
  std::uint64_t traverse_left = kTraverseMin + drive_rng.below(kTraverseMax - kTraverseMin + 1);
  for (const SlipRegime& regime : kRegimes) {
    const double imu_sd = std::sqrt(regime.imu_variance);
    for (std::size_t k = 0; k < n_per_class; ++k) {
      if (traverse_left == 0) {
        direction = -direction;
        traverse_left = kTraverseMin + drive_rng.below(kTraverseMax - kTraverseMin + 1);
      }
      --traverse_left;
      SensorFrame f;
      f.t = static_cast<double>(frames.size()) / kSampleRateHz;
      f.slip = slip_rng.uniform(regime.slip_lo, regime.slip_hi);
      f.torque = direction * torque_rng.normal(regime.torque_mean, kTorqueNoiseSd);
      f.acc_x = ax_rng.normal(0.0, imu_sd);
      f.pitch = pitch_rng.normal(0.0, imu_sd);
      f.acc_z = az_rng.normal(0.0, imu_sd);
      frames.push_back(f);
    }
  }
  return frames;
}

// ----- terrain textures -----------------------------------------------------

const std::vector<std::string>& terrain_class_names() {
  static const std::vector<std::string> names{"flat", "rocks", "boulders", "gravel",
                                              "sand", "grass", "pavement", "asphalt"};
  return names;
}

namespace {

using Canvas = GrayImage;

void add_gaussian_noise(Canvas& img, SeededRng& rng, double sd) {
  for (double& p : img.pixels) p += rng.normal(0.0, sd);
}

// Smooth noise: a coarse lattice of N(0, 1) values every `step` pixels,
// bilinearly interpolated.
void add_value_noise(Canvas& img, SeededRng& rng, double step, double amplitude) {
  const std::size_t gh = static_cast<std::size_t>(std::ceil(img.height / step)) + 2;
  const std::size_t gw = static_cast<std::size_t>(std::ceil(img.width / step)) + 2;
  std::vector<double> lattice(gh * gw);
  for (double& v : lattice) v = rng.normal();
  for (std::size_t y = 0; y < img.height; ++y) {
    const double fy = y / step;
    const auto y0 = static_cast<std::size_t>(fy);
    const double ty = fy - y0;
    for (std::size_t x = 0; x < img.width; ++x) {
      const double fx = x / step;
      const auto x0 = static_cast<std::size_t>(fx);
      const double tx = fx - x0;
      const double a = lattice[y0 * gw + x0], b = lattice[y0 * gw + x0 + 1];
      const double c = lattice[(y0 + 1) * gw + x0], d = lattice[(y0 + 1) * gw + x0 + 1];
      const double top = a + (b - a) * tx, bot = c + (d - c) * tx;
      img.at(y, x) += amplitude * (top + (bot - top) * ty);
    }
  }
}

void fill_ellipse(Canvas& img, double cy, double cx, double ry, double rx, double angle, double value) {
  const double r = std::max(rx, ry);
  const double ca = std::cos(angle), sa = std::sin(angle);
  const auto y_lo = static_cast<long>(std::floor(cy - r)), y_hi = static_cast<long>(std::ceil(cy + r));
  const auto x_lo = static_cast<long>(std::floor(cx - r)), x_hi = static_cast<long>(std::ceil(cx + r));
  for (long y = std::max(0L, y_lo); y <= std::min<long>(y_hi, static_cast<long>(img.height) - 1); ++y) {
    for (long x = std::max(0L, x_lo); x <= std::min<long>(x_hi, static_cast<long>(img.width) - 1); ++x) {
      const double dy = y - cy, dx = x - cx;
      const double u = (dx * ca + dy * sa) / rx, v = (-dx * sa + dy * ca) / ry;
      const double d2 = u * u + v * v;
      if (d2 <= 1.0) {
        // Dome shading: brighter toward the centre.
        img.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = value * (0.75 + 0.25 * (1.0 - d2));
      }
    }
  }
}

void draw_stroke(Canvas& img, double y, double x, double length, double angle, double delta) {
  const double dy = std::sin(angle), dx = std::cos(angle);
  const auto steps = static_cast<int>(std::ceil(length));
  for (int s = 0; s <= steps; ++s) {
    const auto py = static_cast<long>(std::lround(y + s * dy));
    const auto px = static_cast<long>(std::lround(x + s * dx));
    if (py < 0 || px < 0 || py >= static_cast<long>(img.height) || px >= static_cast<long>(img.width)) continue;
    img.at(static_cast<std::size_t>(py), static_cast<std::size_t>(px)) += delta;
  }
}

// Scattered domes over a mottled background. With shadows, each dome first
// drops a dark copy of itself toward the lower right (sun from the upper left).
void ellipse_field(Canvas& img, SeededRng& rng, double scale, std::size_t count, double r_lo, double r_hi,
                   double background, bool shadows) {
  for (double& p : img.pixels) p = background;
  add_value_noise(img, rng, 8.0 * scale, 8.0);
  for (std::size_t i = 0; i < count; ++i) {
    const double cy = rng.uniform(0.0, static_cast<double>(img.height));
    const double cx = rng.uniform(0.0, static_cast<double>(img.width));
    const double ry = rng.uniform(r_lo, r_hi) * scale, rx = rng.uniform(r_lo, r_hi) * scale;
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const double value = rng.uniform(150.0, 200.0);
    if (shadows) fill_ellipse(img, cy + 0.4 * ry, cx + 0.4 * rx, ry, rx, angle, 40.0);
    fill_ellipse(img, cy, cx, ry, rx, angle, value);
  }
  add_gaussian_noise(img, rng, 3.0);
}

Canvas render(const std::string& cls, std::size_t size, SeededRng& rng) {
  const double scale = static_cast<double>(size) / 64.0;
  const double area = scale * scale;
  Canvas img(size, size, 128.0);
  if (cls == "flat") {
    add_gaussian_noise(img, rng, 4.0);
  } else if (cls == "rocks") {
    ellipse_field(img, rng, scale, static_cast<std::size_t>(45 * area), 1.5, 4.0, 100.0, false);
  } else if (cls == "boulders") {
    ellipse_field(img, rng, scale, static_cast<std::size_t>(4 * area), 9.0, 16.0, 100.0, true);
  } else if (cls == "gravel") {
    // Speckle: isolated light and dark grains on a lightly noisy base.
    add_gaussian_noise(img, rng, 4.0);
    for (double& p : img.pixels)
      if (rng.bernoulli(0.08)) p += rng.bernoulli(0.5) ? rng.uniform(60.0, 110.0) : -rng.uniform(60.0, 110.0);
  } else if (cls == "sand") {
    add_value_noise(img, rng, 16.0 * scale, 30.0);
    add_gaussian_noise(img, rng, 2.0);
  } else if (cls == "grass") {
    for (double& p : img.pixels) p = 90.0;
    add_gaussian_noise(img, rng, 5.0);
    const auto strokes = static_cast<std::size_t>(220 * area);
    for (std::size_t i = 0; i < strokes; ++i) {
      const double angle = std::numbers::pi / 2.0 + rng.uniform(-0.35, 0.35);
      const double delta = rng.bernoulli(0.6) ? rng.uniform(40.0, 70.0) : -rng.uniform(25.0, 45.0);
      draw_stroke(img, rng.uniform(0.0, size), rng.uniform(0.0, size), rng.uniform(4.0, 9.0) * scale, angle, delta);
    }
  } else if (cls == "pavement") {
    for (double& p : img.pixels) p = 150.0;
    add_gaussian_noise(img, rng, 5.0);
    // Bricks keep their pixel size at any resolution.
    const std::size_t row_period = 16, col_period = 24, line = 2;
    const std::size_t row_phase = rng.below(row_period), col_phase = rng.below(col_period);
    for (std::size_t y = 0; y < size; ++y) {
      const std::size_t course = (y + row_phase) / row_period;
      const bool joint_row = (y + row_phase) % row_period < line;
      // Running bond: alternate courses shift the vertical joints by half a brick.
      const std::size_t shift = (course % 2) * (col_period / 2);
      for (std::size_t x = 0; x < size; ++x) {
        const bool joint_col = (x + col_phase + shift) % col_period < line;
        if (joint_row || joint_col) img.at(y, x) -= 70.0;
      }
    }
  } else if (cls == "asphalt") {
    for (double& p : img.pixels) p = 80.0;
    add_value_noise(img, rng, 4.0 * scale, 18.0);
    for (double& p : img.pixels)
      if (rng.bernoulli(0.006)) p = 230.0;
  } else {
    throw ParameterError("unknown terrain class '" + cls + "'");
  }

  // Per-image exposure: contrast jitter about the image mean plus a
  // brightness offset.
  double mean = 0.0;
  for (double p : img.pixels) mean += p;
  mean /= static_cast<double>(img.pixels.size());
  const double contrast = rng.uniform(0.85, 1.15);
  const double offset = rng.uniform(-20.0, 20.0);
  for (double& p : img.pixels) p = std::clamp(mean + (p - mean) * contrast + offset, 0.0, 255.0);
  return img;
}

}  // namespace

LabeledDataset synth_terrain(const std::vector<std::string>& classes, std::size_t images_per_class,
                             std::size_t size, std::uint64_t seed) {
  if (size != 64 && size != 128) throw ParameterError("synth_terrain: size must be 64 or 128");
  if (classes.empty()) throw ParameterError("synth_terrain: no classes requested");
  if (images_per_class == 0) throw ParameterError("synth_terrain: images_per_class must be >= 1");
  const auto& known = terrain_class_names();
  for (const auto& c : classes) {
    if (std::find(known.begin(), known.end(), c) == known.end()) {
      throw ParameterError("unknown terrain class '" + c + "'");
    }
  }
  const std::size_t n = classes.size() * images_per_class;
  LabeledDataset ds;
  ds.features = Tensor({n, 1, size, size});
  ds.labels.reserve(n);
  ds.class_names = classes;
  SeededRng rng(seed, Stream::data);
  std::size_t i = 0;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t k = 0; k < images_per_class; ++k, ++i) {
      const Canvas img = render(classes[c], size, rng);
      double* dst = ds.features.data() + i * size * size;
      for (std::size_t p = 0; p < img.pixels.size(); ++p) dst[p] = img.pixels[p] / 255.0;
      ds.labels.push_back(static_cast<int>(c));
    }
  }
  return ds;
}

}  // namespace terradeep
