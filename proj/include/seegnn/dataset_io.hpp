#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace seegnn {

// Four-class surgical outcome scale, I = seizure free.
enum class Engel { I = 0, II = 1, III = 2, IV = 3 };

std::string_view to_string(Engel engel);
// Throws SchemaViolation for anything other than "I".."IV".
Engel parse_engel(std::string_view text);

struct ChannelInfo {
  std::string label;
  std::string region;
  bool is_thalamic = false;
  bool is_soz = false;

  bool operator==(const ChannelInfo&) const = default;
};

// Raw amplitudes, one row per channel (channel-major, rows contiguous).
using SignalMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SeizureRecording {
  std::string seizure_id;
  std::string patient_id;
  Engel engel = Engel::I;
  double sampling_rate_hz = 0.0;
  std::vector<ChannelInfo> channels;
  SignalMatrix signal;

  std::size_t n_channels() const { return channels.size(); }
  std::size_t n_samples() const { return static_cast<std::size_t>(signal.cols()); }
};

bool operator==(const SeizureRecording& a, const SeizureRecording& b);

struct Dataset {
  std::vector<SeizureRecording> recordings;
  std::string provenance;
};

bool operator==(const Dataset& a, const Dataset& b);

// Throws SchemaViolation / ShapeMismatch / DuplicateSeizureId on the first
// broken invariant.
void validate(const SeizureRecording& rec);
void validate(const Dataset& dataset);

enum class SignalFormat { F32LE, Csv };

std::string_view to_string(SignalFormat format);

SignalMatrix load_signal(const std::filesystem::path& path, std::size_t n_channels,
                         std::size_t n_samples, SignalFormat format = SignalFormat::F32LE);
void save_signal(const SignalMatrix& signal, const std::filesystem::path& path,
                 SignalFormat format = SignalFormat::F32LE);

// Reads a manifest (see README for the schema). Signal paths are resolved
// relative to the manifest's directory.
Dataset load_manifest(const std::filesystem::path& manifest_path);

// Writes <dir>/manifest.json plus one f32le file per recording under
// <dir>/signals/. Recordings are grouped by patient in order of first
// appearance. Returns the manifest path.
std::filesystem::path save_dataset(const Dataset& dataset, const std::filesystem::path& dir,
                                   SignalFormat format = SignalFormat::F32LE);

// ---------------------------------------------------------------------------
// Synthetic cohorts

struct IntRange {
  int lo = 0;
  int hi = 0;
};

// Which outcome grouping the generator's coupling profile separates.
enum class ClassScheme { Binary, ThreeClass, Engel4 };

std::string_view to_string(ClassScheme scheme);
ClassScheme parse_class_scheme(std::string_view text);

struct RegionDef {
  std::string name;
  std::string abbrev;
  bool thalamic = false;
};

// Anatomical vocabulary the generator draws contacts from.
const std::vector<RegionDef>& region_vocabulary();
std::vector<std::string> default_planted_regions();

struct SynthConfig {
  int n_patients = 15;
  IntRange seizures_per_patient{3, 20};
  IntRange channels_per_patient{58, 127};
  ClassScheme class_scheme = ClassScheme::ThreeClass;
  std::vector<std::string> planted_important_regions = default_planted_regions();
  double coupling_strength = 0.9;
  double noise_sd = 0.1;
  std::uint64_t seed = 0;
  // Patients per Engel class I..IV. All zero means Table-1-like proportions
  // 1/2/8/4 scaled to n_patients.
  std::array<int, 4> patients_per_engel{0, 0, 0, 0};
  // Frequency of the shared rhythmic latent driving planted channels.
  double latent_frequency_hz = 6.0;
  // Latent rhythm starts at phase 0 at recording onset; otherwise each
  // recording draws a uniform random phase.
  bool onset_locked = true;
  IntRange duration_s{32, 46};
  std::vector<double> sampling_rates_hz{128.0, 256.0};
};

void validate(const SynthConfig& config);

// Mixing weight given to planted channels of a recording with this outcome.
// The worst-outcome group receives the full coupling_strength.
double class_coupling(Engel engel, ClassScheme scheme, double coupling_strength);

// Patient counts per Engel class for the given config.
std::array<int, 4> engel_allocation(const SynthConfig& config);

Dataset generate_synthetic(const SynthConfig& config);

}  // namespace seegnn
