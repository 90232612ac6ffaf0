#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "terradeep/datasets.hpp"
#include "terradeep/error.hpp"

namespace terradeep {

namespace {

class HeaderReader {
 public:
  HeaderReader(std::string_view bytes, const std::string& source) : bytes_(bytes), source_(source) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const unsigned char c = static_cast<unsigned char>(bytes_[pos_]);
      if (std::isspace(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t number(const char* what) {
    skip_space_and_comments();
    std::size_t value = 0, digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(static_cast<unsigned char>(bytes_[pos_]))) {
      value = value * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (++digits > 9) fail(std::string(what) + " is too large");
      ++pos_;
    }
    if (digits == 0) fail(std::string("missing ") + what);
    return value;
  }

  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError(source_ + ": malformed PGM: " + why);
  }

  std::string_view bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage parse_pgm(std::string_view bytes, const std::string& source) {
  HeaderReader r(bytes, source);
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') r.fail("expected binary 'P5' magic");
  r.pos_ = 2;
  const std::size_t width = r.number("width");
  const std::size_t height = r.number("height");
  const std::size_t maxval = r.number("maxval");
  if (width == 0 || height == 0) r.fail("zero image dimension");
  if (maxval == 0 || maxval > 255) {
    r.fail("maxval " + std::to_string(maxval) + " unsupported (only 8-bit, maxval <= 255)");
  }
  if (r.pos_ >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[r.pos_]))) {
    r.fail("missing whitespace after maxval");
  }
  ++r.pos_;
  const std::size_t count = width * height;
  if (bytes.size() - r.pos_ < count) {
    r.fail("raster truncated: need " + std::to_string(count) + " bytes, have " +
           std::to_string(bytes.size() - r.pos_));
  }
  GrayImage img(height, width);
  const double scale = 255.0 / static_cast<double>(maxval);
  for (std::size_t i = 0; i < count; ++i) {
    const auto v = static_cast<unsigned char>(bytes[r.pos_ + i]);
    if (v > maxval) r.fail("sample exceeds maxval");
    img.pixels[i] = static_cast<double>(v) * scale;
  }
  return img;
}

std::string encode_pgm(const GrayImage& image) {
  if (image.empty() || image.height * image.width != image.pixels.size()) {
    throw ShapeError("cannot encode an empty or inconsistent image");
  }
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.reserve(out.size() + image.pixels.size());
  for (double p : image.pixels) {
    const double c = std::clamp(std::round(p), 0.0, 255.0);
    out.push_back(static_cast<char>(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace terradeep
