#include "terradeep/signal_features.hpp"

#include <cmath>

#include "terradeep/error.hpp"

namespace terradeep {

const std::vector<std::string>& slip_class_names() {
  static const std::vector<std::string> names{"low", "moderate", "high"};
  return names;
}

std::vector<double> sliding_variance(std::span<const double> series, std::size_t nw) {
  if (nw == 0) throw ParameterError("sliding_variance: window size must be >= 1");
  if (series.empty()) throw ParameterError("sliding_variance: empty series");
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t begin = i + 1 >= nw ? i + 1 - nw : 0;
    const std::size_t count = i + 1 - begin;
    // Two passes over offsets from the newest sample: constant windows give
    // exactly zero and large offsets cost no precision.
    const double ref = series[i];
    double mean = 0.0;
    for (std::size_t j = begin; j <= i; ++j) mean += series[j] - ref;
    mean /= static_cast<double>(count);
    double acc = 0.0;
    for (std::size_t j = begin; j <= i; ++j) {
      const double d = (series[j] - ref) - mean;
      acc += d * d;
    }
    out[i] = acc / static_cast<double>(count);
  }
  return out;
}

double torque_feature(double torque) { return std::fabs(torque); }

SlipClass discretize_slip(double s) {
  if (!(s >= 0.0 && s <= 100.0)) {
    throw OutlierError("slip " + std::to_string(s) + " outside [0, 100]");
  }
  if (s <= 30.0) return SlipClass::low;
  if (s <= 60.0) return SlipClass::moderate;
  return SlipClass::high;
}

std::vector<SlipFeatureVector> slip_features(std::span<const SensorFrame> frames, std::size_t nw) {
  if (frames.empty()) throw DatasetError("no sensor frames");
  std::vector<double> ax(frames.size()), ph(frames.size()), az(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    ax[i] = frames[i].acc_x;
    ph[i] = frames[i].pitch;
    az[i] = frames[i].acc_z;
  }
  const auto vx = sliding_variance(ax, nw);
  const auto vp = sliding_variance(ph, nw);
  const auto vz = sliding_variance(az, nw);
  std::vector<SlipFeatureVector> q(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    q[i] = {torque_feature(frames[i].torque), vx[i], vp[i], vz[i]};
  }
  return q;
}

LabeledDataset assemble_slip_dataset(std::span<const SensorFrame> frames, InputMode mode,
                                     std::size_t nw) {
  if (frames.empty()) throw DatasetError("assemble_slip_dataset: empty frame list");
  if (mode == InputMode::filtered && nw == 0) throw ParameterError("window size must be >= 1");
  const std::size_t n = frames.size();
  LabeledDataset ds;
  ds.features = Tensor({n, kSlipChannels});
  ds.labels.resize(n);
  ds.class_names = slip_class_names();
  if (mode == InputMode::raw) {
    for (std::size_t i = 0; i < n; ++i) {
      const SensorFrame& f = frames[i];
      double* row = ds.features.data() + i * kSlipChannels;
      row[0] = f.torque;
      row[1] = f.acc_x;
      row[2] = f.pitch;
      row[3] = f.acc_z;
    }
  } else {
    const auto q = slip_features(frames, nw);
    for (std::size_t i = 0; i < n; ++i) {
      double* row = ds.features.data() + i * kSlipChannels;
      row[0] = q[i].q1;
      row[1] = q[i].q2;
      row[2] = q[i].q3;
      row[3] = q[i].q4;
    }
  }
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(discretize_slip(frames[i].slip));
  return ds;
}

LabeledDataset assemble_slip_windows(std::span<const SensorFrame> frames, InputMode mode,
                                     std::size_t nw, std::size_t length, std::size_t stride) {
  if (length == 0 || stride == 0) throw ParameterError("window length and stride must be >= 1");
  if (frames.size() < length) {
    throw DatasetError("need at least " + std::to_string(length) + " frames for one window, got " +
                       std::to_string(frames.size()));
  }
  const LabeledDataset rows = assemble_slip_dataset(frames, mode, nw);
  const std::size_t count = (frames.size() - length) / stride + 1;
  LabeledDataset ds;
  ds.features = Tensor({count, kSlipChannels, length});
  ds.labels.resize(count);
  ds.class_names = rows.class_names;
  for (std::size_t w = 0; w < count; ++w) {
    const std::size_t end = length - 1 + w * stride;
    const std::size_t begin = end + 1 - length;
    double* dst = ds.features.data() + w * kSlipChannels * length;
    for (std::size_t ch = 0; ch < kSlipChannels; ++ch) {
      for (std::size_t p = 0; p < length; ++p) {
        dst[ch * length + p] = rows.features.at(begin + p, ch);
      }
    }
    ds.labels[w] = rows.labels[end];
  }
  return ds;
}

}  // namespace terradeep
