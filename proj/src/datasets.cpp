#include "terradeep/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <fstream>
#include <map>
#include <sstream>

#include "terradeep/error.hpp"
#include "terradeep/rng.hpp"

namespace terradeep {

// ----- shared dataset type --------------------------------------------------

const char* to_string(Task task) { return task == Task::slip ? "slip" : "image"; }
const char* to_string(InputMode mode) { return mode == InputMode::raw ? "raw" : "filtered"; }

Task parse_task(const std::string& text) {
  if (text == "slip") return Task::slip;
  if (text == "image") return Task::image;
  throw ParameterError("unknown task '" + text + "' (expected slip or image)");
}

InputMode parse_input_mode(const std::string& text) {
  if (text == "raw") return InputMode::raw;
  if (text == "filtered") return InputMode::filtered;
  throw ParameterError("unknown input mode '" + text + "' (expected raw or filtered)");
}

Shape LabeledDataset::sample_shape() const {
  return Shape(features.shape().begin() + (features.rank() ? 1 : 0), features.shape().end());
}

void LabeledDataset::validate() const {
  if (labels.empty()) throw DatasetError("dataset is empty");
  if (class_names.empty()) throw DatasetError("dataset has no class names");
  if (features.rank() < 2 || features.dim(0) != labels.size()) {
    throw DatasetError("feature tensor " + to_string(features.shape()) + " does not hold " +
                       std::to_string(labels.size()) + " samples");
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= class_names.size()) {
      throw DatasetError("label " + std::to_string(labels[i]) + " at sample " + std::to_string(i) +
                         " outside [0, " + std::to_string(class_names.size()) + ")");
    }
  }
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> indices) const {
  LabeledDataset out;
  out.features = gather_rows(features, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(labels.at(i));
  out.class_names = class_names;
  return out;
}

std::vector<std::size_t> LabeledDataset::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (int l : labels)
    if (l >= 0 && static_cast<std::size_t>(l) < counts.size()) ++counts[l];
  return counts;
}

// ----- sensor CSV -----------------------------------------------------------

namespace {

constexpr const char* kSensorColumns[] = {"t", "torque", "acc_x", "pitch", "acc_z", "slip"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

void append_double(std::string& out, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

SensorLog parse_sensor_csv(std::string_view text, const std::string& source) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      throw FormatError(source + ": line " + std::to_string(lines.size() + 1) +
                        " is not newline-terminated (truncated file?)");
    }
    lines.push_back(text.substr(pos, nl - pos));
    pos = nl + 1;
  }
  if (lines.empty()) throw FormatError(source + ": empty file, expected header t,torque,acc_x,pitch,acc_z,slip");

  const auto header = split_commas(lines[0]);
  std::map<std::string, std::size_t, std::less<>> column_of;
  for (std::size_t i = 0; i < header.size(); ++i) column_of.emplace(std::string(header[i]), i);
  std::size_t index[6];
  for (std::size_t c = 0; c < 6; ++c) {
    auto it = column_of.find(kSensorColumns[c]);
    if (it == column_of.end()) {
      throw FormatError(source + ": missing column '" + kSensorColumns[c] + "'");
    }
    index[c] = it->second;
  }

  SensorLog log;
  double previous_t = -std::numeric_limits<double>::infinity();
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    const std::string_view line = trim(lines[ln]);
    if (line.empty()) continue;
    const auto fields = split_commas(line);
    const std::string where = source + ": line " + std::to_string(ln + 1);
    if (fields.size() != header.size()) {
      throw FormatError(where + ": expected " + std::to_string(header.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    double v[6];
    for (std::size_t c = 0; c < 6; ++c) {
      const std::string_view f = fields[index[c]];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v[c]);
      if (f.empty() || ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v[c])) {
        throw FormatError(where + ": column '" + kSensorColumns[c] + "' value '" + std::string(f) +
                          "' is not a finite number");
      }
    }
    if (!(v[0] > previous_t)) throw DatasetError(where + ": time is not strictly increasing");
    previous_t = v[0];
    if (!(v[5] >= 0.0 && v[5] <= 100.0)) {
      ++log.dropped_count;
      continue;
    }
    log.frames.push_back({v[0], v[1], v[2], v[3], v[4], v[5]});
  }
  return log;
}

SensorLog load_sensor_csv(const std::filesystem::path& path) {
  return parse_sensor_csv(read_file(path), path.string());
}

std::string format_sensor_csv(std::span<const SensorFrame> frames) {
  std::string out = "t,torque,acc_x,pitch,acc_z,slip\n";
  for (const SensorFrame& f : frames) {
    const double v[6] = {f.t, f.torque, f.acc_x, f.pitch, f.acc_z, f.slip};
    for (int c = 0; c < 6; ++c) {
      if (c) out.push_back(',');
      append_double(out, v[c]);
    }
    out.push_back('\n');
  }
  return out;
}

void write_sensor_csv(const std::filesystem::path& path, std::span<const SensorFrame> frames) {
  write_file(path, format_sensor_csv(frames));
}

// ----- image corpora --------------------------------------------------------

GrayImage read_pgm(const std::filesystem::path& path) { return parse_pgm(read_file(path), path.string()); }

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  write_file(path, encode_pgm(image));
}

LabeledDataset load_image_dir(const std::filesystem::path& root, std::size_t size) {
  namespace fs = std::filesystem;
  if (size == 0) throw ParameterError("image size must be >= 1");
  if (!fs::is_directory(root)) throw DatasetError(root.string() + " is not a directory");
  std::vector<std::string> classes;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) classes.push_back(entry.path().filename().string());
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw DatasetError(root.string() + " has no class subdirectories");

  std::vector<std::vector<double>> images;
  std::vector<int> labels;
  for (std::size_t c = 0; c < classes.size(); ++c) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(root / classes[c]))
      if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw DatasetError("class directory " + (root / classes[c]).string() + " has no .pgm files");
    for (const auto& file : files) {
      GrayImage img = resize_bilinear(read_pgm(file), size, size);
      for (double& p : img.pixels) p /= 255.0;
      images.push_back(std::move(img.pixels));
      labels.push_back(static_cast<int>(c));
    }
  }
  LabeledDataset ds;
  ds.features = Tensor({images.size(), 1, size, size});
  for (std::size_t i = 0; i < images.size(); ++i)
    std::copy(images[i].begin(), images[i].end(), ds.features.data() + i * size * size);
  ds.labels = std::move(labels);
  ds.class_names = std::move(classes);
  return ds;
}

GrayImage image_at(const LabeledDataset& images, std::size_t index) {
  const Shape s = images.sample_shape();
  if (s.size() != 3 || s[0] != 1) throw ShapeError("expected [n x 1 x h x w] images, got " + to_string(images.features.shape()));
  GrayImage img(s[1], s[2]);
  const auto src = images.features.slice0(index);
  for (std::size_t i = 0; i < src.size(); ++i) img.pixels[i] = src[i] * 255.0;
  return img;
}

void export_image_dataset(const LabeledDataset& images, const std::filesystem::path& root) {
  images.validate();
  std::vector<std::size_t> seen(images.class_count(), 0);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto label = static_cast<std::size_t>(images.labels[i]);
    char name[32];
    std::snprintf(name, sizeof(name), "%05zu.pgm", seen[label]++);
    write_pgm(root / images.class_names[label] / name, image_at(images, i));
  }
}

LabeledDataset hog_dataset(const LabeledDataset& images, const HogConfig& cfg) {
  images.validate();
  const Shape s = images.sample_shape();
  if (s.size() != 3 || s[0] != 1) throw ShapeError("HOG needs [n x 1 x h x w] images");
  const std::size_t d = hog_length(s[1], s[2], cfg);
  LabeledDataset out;
  out.features = Tensor({images.size(), d});
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto desc = hog_descriptor(image_at(images, i), cfg);
    std::copy(desc.begin(), desc.end(), out.features.data() + i * d);
  }
  out.labels = images.labels;
  out.class_names = images.class_names;
  return out;
}

LabeledDataset flatten_images(const LabeledDataset& images) {
  LabeledDataset out = images;
  out.features = images.features.reshaped({images.features.dim(0), images.features.stride0()});
  return out;
}

// ----- splits ---------------------------------------------------------------

Split holdout_split(std::size_t n, double train_ratio, std::uint64_t seed) {
  if (n < 2) throw ParameterError("holdout_split needs n >= 2");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw ParameterError("train ratio must lie in (0, 1)");
  const auto n_train = static_cast<std::size_t>(std::floor(train_ratio * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw ParameterError("degenerate split: ratio " + std::to_string(train_ratio) + " of " +
                         std::to_string(n) + " samples leaves one side empty");
  }
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  SeededRng rng(seed, Stream::split);
  rng.shuffle(perm);
  Split s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train), perm.end());
  return s;
}

SplitPlan SplitPlan::standard(std::uint64_t base_seed, std::size_t run_count) {
  static constexpr double kRatios[3] = {0.7, 0.6, 0.5};
  SplitPlan plan;
  for (std::size_t r = 0; r < run_count; ++r) {
    plan.runs.push_back({kRatios[(r * 3) / run_count], base_seed + r});
  }
  return plan;
}

void SplitPlan::validate() const {
  if (runs.empty()) throw ParameterError("split plan has no runs");
  for (const SplitRun& r : runs)
    if (!(r.train_ratio > 0.0 && r.train_ratio < 1.0)) throw ParameterError("split ratio outside (0, 1)");
}

}  // namespace terradeep
