#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace terradeep {

// Stream identifiers fanned out from a single experiment seed.
enum class Stream : std::uint64_t {
  data = 1,
  init = 2,
  shuffle = 3,
  dropout = 4,
  split = 5,
};

// Seeded generator. The engine and std::seed_seq are fully specified by the
// standard, and the real-valued transforms below are written out here rather
// than taken from <random> distributions (whose algorithms are
// implementation-defined), so sequences match across platforms.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, std::uint64_t stream_id);
  SeededRng(std::uint64_t seed, Stream stream)
      : SeededRng(seed, static_cast<std::uint64_t>(stream)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Standard normal (Marsaglia polar method).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

  void shuffle(std::span<std::size_t> items);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace terradeep
