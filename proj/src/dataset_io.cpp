#include "seegnn/dataset_io.hpp"

#include "seegnn/error.hpp"
#include "seegnn/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_set>

namespace seegnn {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Engel engel) {
  switch (engel) {
    case Engel::I: return "I";
    case Engel::II: return "II";
    case Engel::III: return "III";
    case Engel::IV: return "IV";
  }
  return "?";
}

Engel parse_engel(std::string_view text) {
  if (text == "I") return Engel::I;
  if (text == "II") return Engel::II;
  if (text == "III") return Engel::III;
  if (text == "IV") return Engel::IV;
  throw Error(ErrorKind::SchemaViolation,
              "engel: expected one of I, II, III, IV, got \"" + std::string(text) + "\"");
}

std::string_view to_string(SignalFormat format) {
  return format == SignalFormat::F32LE ? "f32le" : "csv";
}

std::string_view to_string(ClassScheme scheme) {
  switch (scheme) {
    case ClassScheme::Binary: return "binary";
    case ClassScheme::ThreeClass: return "three_class";
    case ClassScheme::Engel4: return "engel4";
  }
  return "?";
}

ClassScheme parse_class_scheme(std::string_view text) {
  if (text == "binary") return ClassScheme::Binary;
  if (text == "three_class") return ClassScheme::ThreeClass;
  if (text == "engel4") return ClassScheme::Engel4;
  throw Error(ErrorKind::InvalidConfig, "unknown class scheme \"" + std::string(text) + "\"");
}

bool operator==(const SeizureRecording& a, const SeizureRecording& b) {
  if (a.seizure_id != b.seizure_id || a.patient_id != b.patient_id || a.engel != b.engel ||
      a.sampling_rate_hz != b.sampling_rate_hz || a.channels != b.channels) {
    return false;
  }
  if (a.signal.rows() != b.signal.rows() || a.signal.cols() != b.signal.cols()) return false;
  // Bitwise comparison so NaN payloads and signed zeros count too.
  return std::memcmp(a.signal.data(), b.signal.data(),
                     sizeof(float) * static_cast<std::size_t>(a.signal.size())) == 0;
}

bool operator==(const Dataset& a, const Dataset& b) {
  return a.provenance == b.provenance && a.recordings == b.recordings;
}

void validate(const SeizureRecording& rec) {
  const std::string where = "seizure " + rec.seizure_id;
  if (rec.seizure_id.empty()) throw Error(ErrorKind::SchemaViolation, "seizure_id: empty");
  if (rec.patient_id.empty()) throw Error(ErrorKind::SchemaViolation, where + ": patient_id empty");
  if (!(rec.sampling_rate_hz > 0.0) || !std::isfinite(rec.sampling_rate_hz)) {
    throw Error(ErrorKind::SchemaViolation, where + ": sampling_rate_hz must be positive");
  }
  if (static_cast<std::size_t>(rec.signal.rows()) != rec.channels.size()) {
    throw Error(ErrorKind::ShapeMismatch, where + ": signal has " +
                                              std::to_string(rec.signal.rows()) + " rows for " +
                                              std::to_string(rec.channels.size()) + " channels");
  }
  if (rec.signal.cols() < 2) {
    throw Error(ErrorKind::SchemaViolation, where + ": n_samples must be >= 2");
  }
  std::unordered_set<std::string> labels;
  for (const auto& ch : rec.channels) {
    if (ch.label.empty()) throw Error(ErrorKind::SchemaViolation, where + ": empty channel label");
    if (ch.region.empty()) {
      throw Error(ErrorKind::SchemaViolation, where + ": channel " + ch.label + " has empty region");
    }
    if (!labels.insert(ch.label).second) {
      throw Error(ErrorKind::SchemaViolation, where + ": duplicate channel label " + ch.label);
    }
  }
}

void validate(const Dataset& dataset) {
  if (dataset.recordings.empty()) throw Error(ErrorKind::SchemaViolation, "dataset is empty");
  std::unordered_set<std::string> ids;
  std::map<std::string, Engel> patient_engel;
  for (const auto& rec : dataset.recordings) {
    validate(rec);
    if (!ids.insert(rec.seizure_id).second) {
      throw Error(ErrorKind::DuplicateSeizureId, "seizure_id " + rec.seizure_id + " repeated");
    }
    auto [it, inserted] = patient_engel.emplace(rec.patient_id, rec.engel);
    if (!inserted && it->second != rec.engel) {
      throw Error(ErrorKind::SchemaViolation,
                  "patient " + rec.patient_id + ": seizures disagree on engel");
    }
  }
}

// ---------------------------------------------------------------------------
// Signal files

namespace {

std::uint32_t byteswap32(std::uint32_t v) {
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
}

SignalMatrix load_f32le(const fs::path& path, std::size_t n_channels, std::size_t n_samples) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec) throw Error(ErrorKind::UnreadableFile, path.string() + ": " + ec.message());
  const std::uintmax_t expected = static_cast<std::uintmax_t>(n_channels) * n_samples * 4u;
  if (size != expected) {
    throw Error(ErrorKind::ShapeMismatch, path.string() + ": " + std::to_string(size) +
                                              " bytes, expected " + std::to_string(expected) +
                                              " for " + std::to_string(n_channels) + "x" +
                                              std::to_string(n_samples) + " f32le");
  }
  SignalMatrix out(static_cast<Eigen::Index>(n_channels), static_cast<Eigen::Index>(n_samples));
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableFile, path.string() + ": cannot open");
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(expected));
  if (!in) throw Error(ErrorKind::UnreadableFile, path.string() + ": short read");
  if constexpr (std::endian::native == std::endian::big) {
    auto* words = reinterpret_cast<std::uint32_t*>(out.data());
    for (Eigen::Index i = 0; i < out.size(); ++i) words[i] = byteswap32(words[i]);
  }
  return out;
}

SignalMatrix load_csv(const fs::path& path, std::size_t n_channels, std::size_t n_samples) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::UnreadableFile, path.string() + ": cannot open");
  std::vector<std::vector<float>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<float> row;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    while (p <= end) {
      const char* comma = std::find(p, end, ',');
      const char* a = p;
      const char* b = comma;
      while (a < b && (*a == ' ' || *a == '\t')) ++a;
      while (b > a && (b[-1] == ' ' || b[-1] == '\t')) --b;
      float value = 0.0f;
      auto [ptr, err] = std::from_chars(a, b, value);
      if (err != std::errc() || ptr != b) {
        throw Error(ErrorKind::UnreadableFile, path.string() + ": line " +
                                                   std::to_string(rows.size() + 1) +
                                                   ": not a number: \"" + std::string(a, b) + "\"");
      }
      row.push_back(value);
      if (comma == end) break;
      p = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() != n_channels) {
    throw Error(ErrorKind::ShapeMismatch, path.string() + ": " + std::to_string(rows.size()) +
                                              " rows, expected " + std::to_string(n_channels));
  }
  SignalMatrix out(static_cast<Eigen::Index>(n_channels), static_cast<Eigen::Index>(n_samples));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != n_samples) {
      throw Error(ErrorKind::ShapeMismatch, path.string() + ": row " + std::to_string(r) + " has " +
                                                std::to_string(rows[r].size()) +
                                                " values, expected " + std::to_string(n_samples));
    }
    for (std::size_t c = 0; c < n_samples; ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return out;
}

}  // namespace

SignalMatrix load_signal(const fs::path& path, std::size_t n_channels, std::size_t n_samples,
                         SignalFormat format) {
  if (!fs::exists(path)) throw Error(ErrorKind::MissingFile, path.string() + ": no such file");
  return format == SignalFormat::F32LE ? load_f32le(path, n_channels, n_samples)
                                       : load_csv(path, n_channels, n_samples);
}

void save_signal(const SignalMatrix& signal, const fs::path& path, SignalFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, path.string() + ": cannot open for writing");
  if (format == SignalFormat::F32LE) {
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(signal.data()),
                static_cast<std::streamsize>(sizeof(float) * signal.size()));
    } else {
      for (Eigen::Index i = 0; i < signal.size(); ++i) {
        std::uint32_t w = std::bit_cast<std::uint32_t>(signal.data()[i]);
        w = byteswap32(w);
        out.write(reinterpret_cast<const char*>(&w), 4);
      }
    }
  } else {
    out << std::setprecision(std::numeric_limits<float>::max_digits10);
    for (Eigen::Index r = 0; r < signal.rows(); ++r) {
      for (Eigen::Index c = 0; c < signal.cols(); ++c) {
        if (c) out << ',';
        out << signal(r, c);
      }
      out << '\n';
    }
  }
  if (!out) throw Error(ErrorKind::IoFailure, path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// Manifest

namespace {

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw Error(ErrorKind::SchemaViolation, where + ": expected object");
  auto it = obj.find(key);
  if (it == obj.end()) throw Error(ErrorKind::SchemaViolation, where + "." + key + ": missing");
  return *it;
}

std::string string_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_string()) {
    throw Error(ErrorKind::SchemaViolation, where + "." + key + ": expected string");
  }
  return v.get<std::string>();
}

bool bool_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_boolean()) {
    throw Error(ErrorKind::SchemaViolation, where + "." + key + ": expected boolean");
  }
  return v.get<bool>();
}

std::size_t count_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw Error(ErrorKind::SchemaViolation, where + "." + key + ": expected non-negative integer");
  }
  return v.get<std::size_t>();
}

const json& array_field(const json& obj, const char* key, const std::string& where) {
  const json& v = field(obj, key, where);
  if (!v.is_array()) throw Error(ErrorKind::SchemaViolation, where + "." + key + ": expected array");
  return v;
}

std::string safe_file_stem(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out.push_back(ok ? c : '_');
  }
  return out;
}

}  // namespace

Dataset load_manifest(const fs::path& manifest_path) {
  if (!fs::exists(manifest_path)) {
    throw Error(ErrorKind::MissingFile, manifest_path.string() + ": no such file");
  }
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorKind::UnreadableFile, manifest_path.string() + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, manifest_path.string() + ": invalid JSON: " + e.what());
  }

  const std::string root = "manifest";
  const json& version = field(doc, "version", root);
  if (!version.is_number_integer() || version.get<int>() != 1) {
    throw Error(ErrorKind::SchemaViolation, "manifest.version: expected 1");
  }
  const fs::path base = manifest_path.parent_path();

  Dataset dataset;
  dataset.provenance = manifest_path.string();
  if (auto it = doc.find("provenance"); it != doc.end() && it->is_string()) {
    dataset.provenance = it->get<std::string>();
  }

  std::unordered_set<std::string> seen_ids;
  std::map<std::string, Engel> patient_engel;
  const json& patients = array_field(doc, "patients", root);
  for (std::size_t p = 0; p < patients.size(); ++p) {
    const std::string pw = "patients[" + std::to_string(p) + "]";
    const json& patient = patients[p];
    const std::string patient_id = string_field(patient, "patient_id", pw);
    Engel engel;
    try {
      engel = parse_engel(string_field(patient, "engel", pw));
    } catch (const Error& e) {
      throw Error(ErrorKind::SchemaViolation, pw + "." + e.detail());
    }
    auto [pit, fresh] = patient_engel.emplace(patient_id, engel);
    if (!fresh && pit->second != engel) {
      throw Error(ErrorKind::SchemaViolation, pw + ": patient " + patient_id +
                                                  " listed again with a different engel");
    }

    const json& seizures = array_field(patient, "seizures", pw);
    for (std::size_t s = 0; s < seizures.size(); ++s) {
      const std::string sw = pw + ".seizures[" + std::to_string(s) + "]";
      const json& sz = seizures[s];
      SeizureRecording rec;
      rec.patient_id = patient_id;
      rec.engel = engel;
      rec.seizure_id = string_field(sz, "seizure_id", sw);
      const json& rate = field(sz, "sampling_rate_hz", sw);
      if (!rate.is_number() || !(rate.get<double>() > 0.0)) {
        throw Error(ErrorKind::SchemaViolation, sw + ".sampling_rate_hz: expected positive number");
      }
      rec.sampling_rate_hz = rate.get<double>();
      const std::size_t n_channels = count_field(sz, "n_channels", sw);
      const std::size_t n_samples = count_field(sz, "n_samples", sw);
      if (n_samples < 2) throw Error(ErrorKind::SchemaViolation, sw + ".n_samples: must be >= 2");
      const std::string signal_path = string_field(sz, "signal_path", sw);
      const std::string format_text = string_field(sz, "signal_format", sw);
      SignalFormat format;
      if (format_text == "f32le") {
        format = SignalFormat::F32LE;
      } else if (format_text == "csv") {
        format = SignalFormat::Csv;
      } else {
        throw Error(ErrorKind::SchemaViolation, sw + ".signal_format: expected f32le or csv");
      }
      const json& channels = array_field(sz, "channels", sw);
      if (channels.size() != n_channels) {
        throw Error(ErrorKind::SchemaViolation,
                    sw + ".channels: " + std::to_string(channels.size()) +
                        " entries but n_channels = " + std::to_string(n_channels));
      }
      for (std::size_t c = 0; c < channels.size(); ++c) {
        const std::string cw = sw + ".channels[" + std::to_string(c) + "]";
        ChannelInfo ch;
        ch.label = string_field(channels[c], "label", cw);
        ch.region = string_field(channels[c], "region", cw);
        ch.is_thalamic = bool_field(channels[c], "is_thalamic", cw);
        ch.is_soz = bool_field(channels[c], "is_soz", cw);
        rec.channels.push_back(std::move(ch));
      }
      if (!seen_ids.insert(rec.seizure_id).second) {
        throw Error(ErrorKind::DuplicateSeizureId, sw + ": seizure_id " + rec.seizure_id +
                                                       " repeated");
      }
      rec.signal = load_signal(base / signal_path, n_channels, n_samples, format);
      validate(rec);
      dataset.recordings.push_back(std::move(rec));
    }
  }
  validate(dataset);
  return dataset;
}

fs::path save_dataset(const Dataset& dataset, const fs::path& dir, SignalFormat format) {
  std::error_code ec;
  fs::create_directories(dir / "signals", ec);
  if (ec) throw Error(ErrorKind::IoFailure, dir.string() + ": " + ec.message());

  // Group by patient, keeping first-appearance order.
  std::vector<std::string> patient_order;
  std::map<std::string, std::vector<const SeizureRecording*>> by_patient;
  for (const auto& rec : dataset.recordings) {
    auto& bucket = by_patient[rec.patient_id];
    if (bucket.empty()) patient_order.push_back(rec.patient_id);
    bucket.push_back(&rec);
  }

  json patients = json::array();
  std::size_t index = 0;
  for (const auto& pid : patient_order) {
    const auto& recs = by_patient[pid];
    json seizures = json::array();
    for (const SeizureRecording* rec : recs) {
      const std::string ext = format == SignalFormat::F32LE ? ".f32" : ".csv";
      char prefix[16];
      std::snprintf(prefix, sizeof prefix, "%04zu_", index++);
      const std::string rel = "signals/" + std::string(prefix) + safe_file_stem(rec->seizure_id) + ext;
      save_signal(rec->signal, dir / rel, format);
      json channels = json::array();
      for (const auto& ch : rec->channels) {
        channels.push_back({{"label", ch.label},
                            {"region", ch.region},
                            {"is_thalamic", ch.is_thalamic},
                            {"is_soz", ch.is_soz}});
      }
      seizures.push_back({{"seizure_id", rec->seizure_id},
                          {"sampling_rate_hz", rec->sampling_rate_hz},
                          {"n_channels", rec->n_channels()},
                          {"n_samples", rec->n_samples()},
                          {"signal_path", rel},
                          {"signal_format", std::string(to_string(format))},
                          {"channels", std::move(channels)}});
    }
    patients.push_back({{"patient_id", pid},
                        {"engel", std::string(to_string(recs.front()->engel))},
                        {"seizures", std::move(seizures)}});
  }
  json doc = {{"version", 1}, {"provenance", dataset.provenance}, {"patients", std::move(patients)}};

  const fs::path manifest = dir / "manifest.json";
  std::ofstream out(manifest, std::ios::trunc);
  if (!out) throw Error(ErrorKind::IoFailure, manifest.string() + ": cannot open for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, manifest.string() + ": write failed");
  return manifest;
}

// ---------------------------------------------------------------------------
// Synthetic cohorts

const std::vector<RegionDef>& region_vocabulary() {
  static const std::vector<RegionDef> vocab{
      {"anterior cingulate", "ACC", false},
      {"frontal pole", "FP", false},
      {"orbitofrontal", "OF", false},
      {"anterior insula", "AIN", false},
      {"posterior insula", "PIN", false},
      {"precentral motor", "MCM", false},
      {"supplementary motor", "SMA", false},
      {"superior temporal", "STG", false},
      {"superior frontal", "SFG", false},
      {"middle frontal", "MFG", false},
      {"inferior frontal", "IFG", false},
      {"frontal operculum", "FOP", false},
      {"postcentral", "POC", false},
      {"superior parietal", "SPL", false},
      {"inferior parietal", "IPL", false},
      {"precuneus", "PCU", false},
      {"posterior cingulate", "PCC", false},
      {"middle temporal", "MTG", false},
      {"inferior temporal", "ITG", false},
      {"temporal pole", "TP", false},
      {"hippocampus", "HIP", false},
      {"amygdala", "AMY", false},
      {"entorhinal", "ENT", false},
      {"fusiform", "FUS", false},
      {"lateral occipital", "LOC", false},
      {"cuneus", "CUN", false},
      {"left centromedian thalamus", "LCM", true},
      {"right centromedian thalamus", "RCM", true},
      {"anterior thalamic nucleus", "ANT", true},
      {"pulvinar", "PUL", true},
  };
  return vocab;
}

std::vector<std::string> default_planted_regions() {
  return {"anterior cingulate",  "frontal pole",      "orbitofrontal",
          "anterior insula",     "posterior insula",  "precentral motor",
          "supplementary motor", "superior temporal", "left centromedian thalamus",
          "right centromedian thalamus"};
}

void validate(const SynthConfig& config) {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (config.n_patients < 1) fail("n_patients must be >= 1");
  if (config.seizures_per_patient.lo < 1 ||
      config.seizures_per_patient.hi < config.seizures_per_patient.lo) {
    fail("seizures_per_patient must be a range with lo >= 1");
  }
  if (config.channels_per_patient.lo < 2 || config.channels_per_patient.hi > 1024 ||
      config.channels_per_patient.hi < config.channels_per_patient.lo) {
    fail("channels_per_patient must lie within [2, 1024]");
  }
  if (!(config.coupling_strength >= 0.0 && config.coupling_strength <= 1.0)) {
    fail("coupling_strength must lie in [0, 1]");
  }
  if (!(config.noise_sd > 0.0) || !std::isfinite(config.noise_sd)) fail("noise_sd must be positive");
  if (!(config.latent_frequency_hz > 0.0)) fail("latent_frequency_hz must be positive");
  if (config.duration_s.lo < 1 || config.duration_s.hi < config.duration_s.lo) {
    fail("duration_s must be a range with lo >= 1");
  }
  if (config.sampling_rates_hz.empty()) fail("sampling_rates_hz is empty");
  for (double r : config.sampling_rates_hz) {
    if (!(r > 0.0)) fail("sampling rates must be positive");
  }
  int total = 0;
  for (int c : config.patients_per_engel) {
    if (c < 0) fail("patients_per_engel entries must be non-negative");
    total += c;
  }
  if (total != 0 && total != config.n_patients) {
    fail("patients_per_engel must sum to n_patients");
  }
  for (const auto& region : config.planted_important_regions) {
    if (region.empty()) fail("planted region names must be non-empty");
  }
}

double class_coupling(Engel engel, ClassScheme scheme, double coupling_strength) {
  double factor = 1.0;
  switch (scheme) {
    case ClassScheme::Binary:
      factor = (engel == Engel::I || engel == Engel::II) ? 0.1 : 1.0;
      break;
    case ClassScheme::ThreeClass:
      factor = engel == Engel::I ? 0.25 : engel == Engel::II ? 0.5 : 1.0;
      break;
    case ClassScheme::Engel4:
      factor = 0.25 * (static_cast<int>(engel) + 1);
      break;
  }
  return factor * coupling_strength;
}

std::array<int, 4> engel_allocation(const SynthConfig& config) {
  int total = 0;
  for (int c : config.patients_per_engel) total += c;
  if (total > 0) return config.patients_per_engel;

  // Largest-remainder apportionment of 1/2/8/4 (of 15).
  constexpr std::array<int, 4> weights{1, 2, 8, 4};
  std::array<int, 4> counts{};
  std::array<double, 4> remainder{};
  int assigned = 0;
  for (int k = 0; k < 4; ++k) {
    const double exact = static_cast<double>(config.n_patients) * weights[k] / 15.0;
    counts[k] = static_cast<int>(std::floor(exact));
    remainder[k] = exact - counts[k];
    assigned += counts[k];
  }
  while (assigned < config.n_patients) {
    int best = 0;
    for (int k = 1; k < 4; ++k) {
      if (remainder[k] > remainder[best]) best = k;
    }
    ++counts[best];
    remainder[best] = -1.0;
    ++assigned;
  }
  return counts;
}

namespace {

struct PatientLayout {
  std::vector<ChannelInfo> channels;
  std::vector<bool> planted;
  double sampling_rate_hz = 0.0;
};

PatientLayout make_layout(const SynthConfig& config, const std::vector<RegionDef>& vocab,
                          const std::set<std::string>& planted, Rng& rng) {
  PatientLayout layout;
  const int n_channels = rng.between(config.channels_per_patient.lo, config.channels_per_patient.hi);
  layout.sampling_rate_hz =
      config.sampling_rates_hz[rng.below(config.sampling_rates_hz.size())];

  // Region coverage: each region with probability 0.8, plus one thalamic
  // region (a planted one when available) so every patient has a thalamic contact.
  std::vector<std::size_t> thalamic_choices;
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    if (vocab[r].thalamic && planted.count(vocab[r].name)) thalamic_choices.push_back(r);
  }
  if (thalamic_choices.empty()) {
    for (std::size_t r = 0; r < vocab.size(); ++r) {
      if (vocab[r].thalamic) thalamic_choices.push_back(r);
    }
  }
  const std::size_t forced = thalamic_choices[rng.below(thalamic_choices.size())];

  std::vector<std::size_t> chosen;
  for (std::size_t r = 0; r < vocab.size(); ++r) {
    const bool keep = rng.uniform() < 0.8;
    if (keep || r == forced) chosen.push_back(r);
  }
  // Keep the forced thalamic region if the channel budget is smaller than
  // the region list.
  if (chosen.size() > static_cast<std::size_t>(n_channels)) {
    std::vector<std::size_t> others;
    for (std::size_t r : chosen) {
      if (r != forced) others.push_back(r);
    }
    rng.shuffle(std::span<std::size_t>(others));
    others.resize(static_cast<std::size_t>(n_channels) - 1);
    others.push_back(forced);
    std::sort(others.begin(), others.end());
    chosen = std::move(others);
  }

  std::vector<int> contacts(chosen.size(), 1);
  for (int extra = n_channels - static_cast<int>(chosen.size()); extra > 0; --extra) {
    ++contacts[rng.below(chosen.size())];
  }

  // SOZ: one or two planted cortical regions, else any cortical region.
  std::vector<std::size_t> soz_pool;
  for (std::size_t k = 0; k < chosen.size(); ++k) {
    const auto& def = vocab[chosen[k]];
    if (!def.thalamic && planted.count(def.name)) soz_pool.push_back(k);
  }
  if (soz_pool.empty()) {
    for (std::size_t k = 0; k < chosen.size(); ++k) {
      if (!vocab[chosen[k]].thalamic) soz_pool.push_back(k);
    }
  }
  if (soz_pool.empty()) soz_pool.push_back(0);
  rng.shuffle(std::span<std::size_t>(soz_pool));
  const std::size_t n_soz = std::min<std::size_t>(soz_pool.size(), 1 + rng.below(2));
  std::set<std::size_t> soz(soz_pool.begin(), soz_pool.begin() + static_cast<long>(n_soz));

  for (std::size_t k = 0; k < chosen.size(); ++k) {
    const auto& def = vocab[chosen[k]];
    for (int c = 1; c <= contacts[k]; ++c) {
      ChannelInfo ch;
      ch.label = def.abbrev + std::to_string(c);
      ch.region = def.name;
      ch.is_thalamic = def.thalamic;
      ch.is_soz = soz.count(k) > 0;
      layout.channels.push_back(std::move(ch));
      layout.planted.push_back(planted.count(def.name) > 0);
    }
  }
  return layout;
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config) {
  validate(config);

  std::vector<RegionDef> vocab = region_vocabulary();
  for (const auto& name : config.planted_important_regions) {
    const bool known = std::any_of(vocab.begin(), vocab.end(),
                                   [&](const RegionDef& d) { return d.name == name; });
    if (!known) {
      std::string abbrev;
      for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
          abbrev.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        }
      }
      vocab.push_back({name, "X" + abbrev.substr(0, 6) + "_",
                       name.find("thalam") != std::string::npos});
    }
  }
  const std::set<std::string> planted(config.planted_important_regions.begin(),
                                      config.planted_important_regions.end());

  Rng rng(config.seed);
  Dataset dataset;
  dataset.provenance = "synthetic:" + std::to_string(config.seed);

  const auto allocation = engel_allocation(config);
  int patient_index = 0;
  for (int e = 0; e < 4; ++e) {
    const auto engel = static_cast<Engel>(e);
    const double coupling = class_coupling(engel, config.class_scheme, config.coupling_strength);
    for (int p = 0; p < allocation[e]; ++p) {
      ++patient_index;
      char pid[16];
      std::snprintf(pid, sizeof pid, "P%02d", patient_index);
      const PatientLayout layout = make_layout(config, vocab, planted, rng);
      const int n_seizures =
          rng.between(config.seizures_per_patient.lo, config.seizures_per_patient.hi);

      for (int s = 1; s <= n_seizures; ++s) {
        SeizureRecording rec;
        char sid[32];
        std::snprintf(sid, sizeof sid, "%s_S%02d", pid, s);
        rec.seizure_id = sid;
        rec.patient_id = pid;
        rec.engel = engel;
        rec.sampling_rate_hz = layout.sampling_rate_hz;
        rec.channels = layout.channels;

        const int duration = rng.between(config.duration_s.lo, config.duration_s.hi);
        const auto n_samples =
            static_cast<Eigen::Index>(std::llround(duration * layout.sampling_rate_hz));
        const auto n_channels = static_cast<Eigen::Index>(layout.channels.size());

        // Unit-variance latent: a rhythmic component with random phase plus a
        // shared broadband part.
        std::vector<double> latent(static_cast<std::size_t>(n_samples));
        const double random_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double phase = config.onset_locked ? 0.0 : random_phase;
        const double omega = 2.0 * std::numbers::pi * config.latent_frequency_hz;
        const double latent_scale = 1.0 / std::sqrt(1.0 + 0.25);
        for (Eigen::Index t = 0; t < n_samples; ++t) {
          const double time = static_cast<double>(t) / layout.sampling_rate_hz;
          latent[static_cast<std::size_t>(t)] =
              latent_scale * (std::numbers::sqrt2 * std::sin(omega * time + phase) +
                              0.5 * rng.normal());
        }

        rec.signal.resize(n_channels, n_samples);
        for (Eigen::Index c = 0; c < n_channels; ++c) {
          const double w = layout.planted[static_cast<std::size_t>(c)] ? coupling : 0.0;
          const double gain = rng.uniform(10.0, 100.0);
          const double offset = rng.uniform(-20.0, 20.0);
          for (Eigen::Index t = 0; t < n_samples; ++t) {
            const double own = rng.normal();
            const double noise = config.noise_sd * rng.normal();
            const double x = w * latent[static_cast<std::size_t>(t)] + (1.0 - w) * own + noise;
            rec.signal(c, t) = static_cast<float>(offset + gain * x);
          }
        }
        dataset.recordings.push_back(std::move(rec));
      }
    }
  }
  validate(dataset);
  return dataset;
}

}  // namespace seegnn
