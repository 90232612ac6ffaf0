#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "terradeep/dataset.hpp"
#include "terradeep/image_features.hpp"
#include "terradeep/signal_features.hpp"

namespace terradeep {

// ---------------------------------------------------------------------------
// Sensor logs
//
// CSV header `t,torque,acc_x,pitch,acc_z,slip` (columns matched by name),
// decimal floats, LF or CRLF line endings, every line newline-terminated.
// ---------------------------------------------------------------------------

struct SensorLog {
  std::vector<SensorFrame> frames;
  std::size_t dropped_count = 0;  // rows with slip outside [0, 100]
};

SensorLog parse_sensor_csv(std::string_view text, const std::string& source = "<memory>");
SensorLog load_sensor_csv(const std::filesystem::path& path);
std::string format_sensor_csv(std::span<const SensorFrame> frames);
void write_sensor_csv(const std::filesystem::path& path, std::span<const SensorFrame> frames);

// ---------------------------------------------------------------------------
// Images: binary PGM (P5, maxval <= 255) and `<root>/<class>/*.pgm` corpora
// ---------------------------------------------------------------------------

GrayImage parse_pgm(std::string_view bytes, const std::string& source = "<memory>");
GrayImage read_pgm(const std::filesystem::path& path);
std::string encode_pgm(const GrayImage& image);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

inline constexpr std::size_t kDefaultImageSize = 128;

// Class names are the sorted subdirectory names. Images are resized to
// size x size and scaled to [0, 1]; features are [n x 1 x size x size].
LabeledDataset load_image_dir(const std::filesystem::path& root, std::size_t size = kDefaultImageSize);
void export_image_dataset(const LabeledDataset& images, const std::filesystem::path& root);

// Views over an image dataset ([n x 1 x h x w], intensities in [0, 1]).
GrayImage image_at(const LabeledDataset& images, std::size_t index);  // back in [0, 255]
LabeledDataset hog_dataset(const LabeledDataset& images, const HogConfig& cfg = {});
LabeledDataset flatten_images(const LabeledDataset& images);

// ---------------------------------------------------------------------------
// Synthetic stand-ins
// ---------------------------------------------------------------------------

// Three contiguous regimes (low, moderate, high slip) of n_per_class frames
// at 100 Hz. Per regime: slip ~ U[5,25] / U[35,55] / U[65,95]; IMU channels
// ~ N(0, 0.01 / 0.25 / 1.0); torque = direction * (2 / 5 / 9 + N(0, 0.5^2))
// where the drive direction flips between traverses of 100-300 frames.
std::vector<SensorFrame> synth_slip(std::size_t n_per_class, std::size_t nw, std::uint64_t seed);

// flat, rocks, boulders, gravel, sand, grass, pavement, asphalt
const std::vector<std::string>& terrain_class_names();

LabeledDataset synth_terrain(const std::vector<std::string>& classes, std::size_t images_per_class,
                             std::size_t size, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Hold-out splits
// ---------------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded permutation; the first floor(ratio * n) indices train.
Split holdout_split(std::size_t n, double train_ratio, std::uint64_t seed);

struct SplitRun {
  double train_ratio = 0.7;
  std::uint64_t seed = 0;
};

struct SplitPlan {
  std::vector<SplitRun> runs;

  // Ratios 0.7 / 0.6 / 0.5 in consecutive blocks (4 / 3 / 3 for ten runs),
  // seeds base_seed + run index.
  static SplitPlan standard(std::uint64_t base_seed, std::size_t run_count = 10);
  void validate() const;
};

}  // namespace terradeep
