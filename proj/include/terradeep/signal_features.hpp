#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "terradeep/dataset.hpp"

namespace terradeep {

// One timestep of single-wheel testbed telemetry.
struct SensorFrame {
  double t = 0.0;       // s
  double torque = 0.0;  // N m
  double acc_x = 0.0;   // m/s^2, longitudinal
  double pitch = 0.0;   // pitch channel, taken as supplied
  double acc_z = 0.0;   // m/s^2, vertical
  double slip = 0.0;    // percent
};

struct SlipFeatureVector {
  double q1 = 0.0;  // |torque|
  double q2 = 0.0;  // var(acc_x) over the window
  double q3 = 0.0;  // var(pitch) over the window
  double q4 = 0.0;  // var(acc_z) over the window
};

enum class SlipClass : int { low = 0, moderate = 1, high = 2 };

inline constexpr std::size_t kDefaultVarianceWindow = 50;  // 0.5 s at 100 Hz
inline constexpr std::size_t kSlipChannels = 4;
inline constexpr std::size_t kSlipSequenceLength = 64;

const std::vector<std::string>& slip_class_names();

// Population variance of the causal window ending at each index. The first
// nw - 1 outputs use the shorter prefix windows.
std::vector<double> sliding_variance(std::span<const double> series, std::size_t nw);

double torque_feature(double torque);

// s <= 30 low, 30 < s <= 60 moderate, s > 60 high. Throws OutlierError
// outside [0, 100].
SlipClass discretize_slip(double slip_percent);

std::vector<SlipFeatureVector> slip_features(std::span<const SensorFrame> frames, std::size_t nw);

// One row per frame: raw [T, acc_x, pitch, acc_z] or filtered [q1..q4].
LabeledDataset assemble_slip_dataset(std::span<const SensorFrame> frames, InputMode mode,
                                     std::size_t nw);

// Sequences of `length` consecutive per-frame rows laid out as
// [4 channels x length]; a window ending at frame i is taken every `stride`
// frames and labelled with frame i's slip class.
LabeledDataset assemble_slip_windows(std::span<const SensorFrame> frames, InputMode mode,
                                     std::size_t nw, std::size_t length, std::size_t stride);

}  // namespace terradeep
