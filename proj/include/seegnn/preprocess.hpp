#pragma once

#include "seegnn/dataset_io.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <span>
#include <vector>

namespace seegnn {

inline constexpr double kTargetRateHz = 128.0;
inline constexpr std::size_t kFeatureLength = 5000;

// Standard deviation below which a channel counts as constant.
inline constexpr double kConstantSdThreshold = 1e-8;

using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Linear interpolation on the uniform time grid. Output length is
// round(n * to_hz / from_hz); instants past the last input sample hold its value.
std::vector<double> resample(std::span<const double> signal, double from_hz,
                             double to_hz = kTargetRateHz);

struct Standardized {
  std::vector<double> values;
  bool constant = false;
};

// Subtract the mean, divide by the population standard deviation.
Standardized zscore(std::span<const double> signal);

// Keep the first `target` samples, or zero-pad at the end.
std::vector<double> fit_length(std::span<const double> signal, std::size_t target = kFeatureLength);

struct PreprocessOptions {
  double target_rate_hz = kTargetRateHz;
  std::size_t target_length = kFeatureLength;
};

struct ProcessedSample {
  std::string seizure_id;
  std::string patient_id;
  Engel engel = Engel::I;
  std::vector<ChannelInfo> channels;
  FeatureMatrix features;
  std::vector<bool> constant_channel;
};

// resample -> zscore -> fit_length, per channel.
ProcessedSample preprocess_recording(const SeizureRecording& rec,
                                     const PreprocessOptions& options = {});

std::vector<ProcessedSample> preprocess_dataset(const Dataset& dataset,
                                                const PreprocessOptions& options = {});

// Cache layout: a regular dataset manifest at target rate/length with f32le
// signals, plus preprocess.json listing constant-channel flags.
std::filesystem::path save_processed(std::span<const ProcessedSample> samples,
                                     const std::filesystem::path& dir,
                                     const PreprocessOptions& options = {});

}  // namespace seegnn
