#include "seegnn/preprocess.hpp"

#include "seegnn/error.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>

namespace seegnn {

std::vector<double> resample(std::span<const double> signal, double from_hz, double to_hz) {
  if (signal.size() < 2) throw Error(ErrorKind::EmptySignal, "resample needs >= 2 samples");
  if (!(from_hz > 0.0) || !(to_hz > 0.0)) {
    throw Error(ErrorKind::NonPositiveRate, "resample rates must be positive");
  }
  if (from_hz == to_hz) return {signal.begin(), signal.end()};

  const std::size_t n = signal.size();
  const auto n_out =
      static_cast<std::size_t>(std::llround(static_cast<double>(n) * to_hz / from_hz));
  const double step = from_hz / to_hz;
  std::vector<double> out(n_out);
  for (std::size_t k = 0; k < n_out; ++k) {
    const double pos = static_cast<double>(k) * step;
    const auto left = static_cast<std::size_t>(pos);
    if (left >= n - 1) {
      out[k] = signal[n - 1];
      continue;
    }
    const double frac = pos - static_cast<double>(left);
    out[k] = signal[left] + frac * (signal[left + 1] - signal[left]);
  }
  return out;
}

Standardized zscore(std::span<const double> signal) {
  if (signal.size() < 2) throw Error(ErrorKind::EmptySignal, "zscore needs >= 2 samples");
  const double n = static_cast<double>(signal.size());
  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : signal) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / n);

  Standardized out;
  out.values.resize(signal.size());
  if (!(sd >= kConstantSdThreshold)) {
    out.constant = true;
    return out;
  }
  for (std::size_t i = 0; i < signal.size(); ++i) out.values[i] = (signal[i] - mean) / sd;
  return out;
}

std::vector<double> fit_length(std::span<const double> signal, std::size_t target) {
  if (target < 1) throw Error(ErrorKind::InvalidConfig, "fit_length target must be >= 1");
  std::vector<double> out(target, 0.0);
  const std::size_t keep = std::min(target, signal.size());
  std::copy_n(signal.begin(), keep, out.begin());
  return out;
}

ProcessedSample preprocess_recording(const SeizureRecording& rec, const PreprocessOptions& options) {
  validate(rec);
  ProcessedSample out;
  out.seizure_id = rec.seizure_id;
  out.patient_id = rec.patient_id;
  out.engel = rec.engel;
  out.channels = rec.channels;
  out.features.resize(static_cast<Eigen::Index>(rec.n_channels()),
                      static_cast<Eigen::Index>(options.target_length));
  out.constant_channel.resize(rec.n_channels());

  std::vector<double> row(rec.n_samples());
  for (Eigen::Index c = 0; c < rec.signal.rows(); ++c) {
    for (Eigen::Index t = 0; t < rec.signal.cols(); ++t) row[static_cast<std::size_t>(t)] = rec.signal(c, t);
    const auto resampled = resample(row, rec.sampling_rate_hz, options.target_rate_hz);
    const auto standardized = zscore(resampled);
    const auto fitted = fit_length(standardized.values, options.target_length);
    out.constant_channel[static_cast<std::size_t>(c)] = standardized.constant;
    std::copy(fitted.begin(), fitted.end(), out.features.row(c).data());
  }
  return out;
}

std::vector<ProcessedSample> preprocess_dataset(const Dataset& dataset,
                                                const PreprocessOptions& options) {
  std::vector<ProcessedSample> out;
  out.reserve(dataset.recordings.size());
  for (const auto& rec : dataset.recordings) out.push_back(preprocess_recording(rec, options));
  return out;
}

std::filesystem::path save_processed(std::span<const ProcessedSample> samples,
                                     const std::filesystem::path& dir,
                                     const PreprocessOptions& options) {
  Dataset ds;
  ds.provenance = "preprocessed";
  nlohmann::json flags = nlohmann::json::object();
  for (const auto& s : samples) {
    SeizureRecording rec;
    rec.seizure_id = s.seizure_id;
    rec.patient_id = s.patient_id;
    rec.engel = s.engel;
    rec.sampling_rate_hz = options.target_rate_hz;
    rec.channels = s.channels;
    rec.signal = s.features.cast<float>();
    ds.recordings.push_back(std::move(rec));
    nlohmann::json constant = nlohmann::json::array();
    for (std::size_t c = 0; c < s.channels.size(); ++c) {
      if (s.constant_channel[c]) constant.push_back(s.channels[c].label);
    }
    flags[s.seizure_id] = std::move(constant);
  }
  const auto manifest = save_dataset(ds, dir);
  const auto sidecar = dir / "preprocess.json";
  std::ofstream out(sidecar, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, sidecar.string() + ": cannot open for writing");
  nlohmann::json doc = {{"target_rate_hz", options.target_rate_hz},
                        {"target_length", options.target_length},
                        {"constant_channels", std::move(flags)}};
  out << doc.dump(2) << '\n';
  return manifest;
}

}  // namespace seegnn
