#include "cli.hpp"

#include "seegnn/braingraph.hpp"
#include "seegnn/dataset_io.hpp"
#include "seegnn/error.hpp"
#include "seegnn/gnn_core.hpp"
#include "seegnn/interpret.hpp"
#include "seegnn/pipeline.hpp"
#include "seegnn/preprocess.hpp"
#include "seegnn/rng.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

namespace seegnn::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kCommands{"synth",       "preprocess", "train",   "evaluate",
                                         "hypersearch", "importance", "reduce",  "connectivity",
                                         "export-graph"};

struct Options {
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> scheme;
  double threshold = 0.5;
  int epochs = 100;
  double split = 0.8;
  bool quiet = false;

  // synth
  int patients = 15;
  double coupling = 0.9;
  double noise_sd = 0.1;
  std::string format = "f32le";
  std::vector<int> seizure_range;
  std::vector<int> channel_range;
  std::vector<int> duration_range;

  // train / hypersearch
  std::optional<double> lr;
  std::optional<int> hidden;
  std::optional<double> weight_decay;
  std::optional<double> dropout;
  std::string config;
  int trials = 20;
  int jobs = 1;

  // evaluate / importance
  std::string checkpoint;
  std::string split_file;
  std::string method = "saliency";
  int k = 10;
  std::optional<std::string> key;

  // reduce
  std::string labels;
  std::string from_importance;

  // connectivity / export-graph
  std::vector<std::string> seizures;
  std::vector<std::string> compare;
  std::string seizure;
  std::string graph_format = "dot";
  bool binary = false;
};

struct Context {
  std::ostream& out;
  const Options& opt;
  json seeds = json::object();
  std::vector<std::string> artifacts;

  void say(const std::string& line) const {
    if (!opt.quiet) out << line << '\n';
  }
};

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorKind::IoFailure, "cannot write " + tmp.string());
    f << content;
    if (!f.flush()) throw Error(ErrorKind::IoFailure, "write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot rename " + tmp.string() + ": " + ec.message());
}

fs::path out_dir(const Options& opt) {
  if (opt.out.empty()) throw Error(ErrorKind::BadFlag, "--out is required");
  std::error_code ec;
  fs::create_directories(opt.out, ec);
  if (ec) throw Error(ErrorKind::IoFailure, "cannot create " + opt.out + ": " + ec.message());
  return opt.out;
}

void emit(Context& ctx, const fs::path& dir, const std::string& name, const std::string& content) {
  write_atomic(dir / name, content);
  ctx.artifacts.push_back(name);
}

void emit_json(Context& ctx, const fs::path& dir, const std::string& name, const json& doc) {
  emit(ctx, dir, name, doc.dump(2) + "\n");
}

std::uint64_t need_seed(const Options& opt) {
  if (!opt.seed) throw Error(ErrorKind::BadFlag, "--seed is required");
  return *opt.seed;
}

const std::string& need(const std::string& value, const char* flag) {
  if (value.empty()) throw Error(ErrorKind::BadFlag, std::string(flag) + " is required");
  return value;
}

json read_json(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, path.string() + ": " + e.what());
  }
}

LabelScheme scheme_or(const Options& opt, LabelScheme fallback) {
  return opt.scheme ? parse_label_scheme(*opt.scheme) : fallback;
}

LabelScheme checkpoint_scheme(const Options& opt, const Checkpoint& ck) {
  const auto it = ck.meta.find("scheme");
  return scheme_or(opt, it == ck.meta.end() ? LabelScheme::Binary : parse_label_scheme(it->second));
}

std::vector<GraphSample> load_samples(const Options& opt, LabelScheme scheme) {
  const Dataset ds = load_manifest(need(opt.manifest, "--manifest"));
  return prepare_dataset(ds, scheme);
}

std::vector<GraphSample> select_ids(const std::vector<GraphSample>& samples,
                                    const std::vector<std::string>& ids) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < samples.size(); ++i) index[samples[i].seizure_id] = i;
  std::vector<GraphSample> out;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorKind::SchemaViolation, "unknown seizure id: " + id);
    out.push_back(samples[it->second]);
  }
  return out;
}

// Restricts to the "test" ids of a split.json when --split-file is given.
std::vector<GraphSample> maybe_test_subset(const Options& opt, std::vector<GraphSample> samples) {
  if (opt.split_file.empty()) return samples;
  const json doc = read_json(opt.split_file);
  std::vector<std::string> ids;
  try {
    ids = doc.at("test").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::SchemaViolation, "split file: " + std::string(e.what()));
  }
  return select_ids(samples, ids);
}

std::vector<std::string> ids_of(std::span<const GraphSample> samples) {
  std::vector<std::string> out;
  for (const auto& s : samples) out.push_back(s.seizure_id);
  return out;
}

json patient_json(std::span<const SamplePrediction> predictions, int classes) {
  json doc = to_json(patient_wise(predictions, classes));
  json votes = json::array();
  for (const auto& v : patient_votes(predictions)) {
    votes.push_back({{"patient_id", v.patient_id}, {"predicted", v.predicted}, {"truth", v.truth}});
  }
  doc["patients"] = std::move(votes);
  return doc;
}

json predictions_json(std::span<const SamplePrediction> predictions) {
  json out = json::array();
  for (const auto& p : predictions) {
    out.push_back({{"seizure_id", p.seizure_id},
                   {"patient_id", p.patient_id},
                   {"predicted", p.predicted},
                   {"truth", p.truth}});
  }
  return out;
}

TrainConfig resolve_train_config(const Options& opt) {
  TrainConfig tc;
  if (!opt.config.empty()) tc = train_config_from_json(read_json(opt.config));
  tc.epochs = opt.epochs;
  tc.split_ratio = opt.split;
  if (opt.lr) tc.lr = *opt.lr;
  if (opt.hidden) tc.hidden = *opt.hidden;
  if (opt.weight_decay) tc.weight_decay = *opt.weight_decay;
  if (opt.dropout) tc.dropout = *opt.dropout;
  tc.seed = need_seed(opt);
  validate(tc);
  return tc;
}

// ---------------------------------------------------------------------------

void cmd_synth(Context& ctx) {
  const Options& opt = ctx.opt;
  SynthConfig cfg;
  cfg.seed = need_seed(opt);
  cfg.n_patients = opt.patients;
  cfg.coupling_strength = opt.coupling;
  cfg.noise_sd = opt.noise_sd;
  if (opt.scheme) cfg.class_scheme = parse_class_scheme(*opt.scheme);
  if (!opt.seizure_range.empty()) cfg.seizures_per_patient = {opt.seizure_range[0], opt.seizure_range[1]};
  if (!opt.channel_range.empty()) cfg.channels_per_patient = {opt.channel_range[0], opt.channel_range[1]};
  if (!opt.duration_range.empty()) cfg.duration_s = {opt.duration_range[0], opt.duration_range[1]};
  const SignalFormat format = opt.format == "csv" ? SignalFormat::Csv : SignalFormat::F32LE;
  const fs::path dir = out_dir(opt);
  const Dataset ds = generate_synthetic(cfg);
  save_dataset(ds, dir, format);
  ctx.artifacts.push_back("manifest.json");
  ctx.artifacts.push_back("signals/");
  ctx.seeds["synth"] = cfg.seed;
  ctx.say("wrote " + std::to_string(ds.recordings.size()) + " recordings to " + dir.string());
}

void cmd_preprocess(Context& ctx) {
  const Options& opt = ctx.opt;
  const Dataset ds = load_manifest(need(opt.manifest, "--manifest"));
  const fs::path dir = out_dir(opt);
  const auto samples = preprocess_dataset(ds);
  save_processed(samples, dir);
  ctx.artifacts.push_back("manifest.json");
  ctx.artifacts.push_back("preprocess.json");
  ctx.artifacts.push_back("signals/");
  ctx.say("preprocessed " + std::to_string(samples.size()) + " recordings");
}

void cmd_train(Context& ctx) {
  const Options& opt = ctx.opt;
  const TrainConfig tc = resolve_train_config(opt);
  const LabelScheme scheme = scheme_or(opt, LabelScheme::Binary);
  const auto samples = load_samples(opt, scheme);
  const fs::path dir = out_dir(opt);

  const Split split = stratified_split(std::span<const GraphSample>(samples), tc.split_ratio, tc.seed);
  const auto train_set = select(std::span<const GraphSample>(samples), std::span<const std::size_t>(split.train));
  const auto test_set = select(std::span<const GraphSample>(samples), std::span<const std::size_t>(split.test));

  TrainResult result = train(train_set, scheme, tc);
  const Evaluation eval = evaluate_detailed(result.model, test_set, scheme);

  Checkpoint ck{result.model, result.adam, {}};
  ck.meta["scheme"] = std::string(to_string(scheme));
  ck.meta["train_config"] = to_json(tc).dump();
  ck.meta["manifest"] = opt.manifest;
  save_checkpoint(ck, dir / "checkpoint.json");
  ctx.artifacts.push_back("checkpoint.json");
  emit(ctx, dir, "history.csv", history_csv(result.history));
  json report = to_json(eval.report);
  report["predictions"] = predictions_json(eval.predictions);
  emit_json(ctx, dir, "report.json", report);
  emit_json(ctx, dir, "patient_report.json", patient_json(eval.predictions, n_classes(scheme)));
  emit_json(ctx, dir, "split.json",
            {{"ratio", tc.split_ratio},
             {"seed", tc.seed},
             {"train", ids_of(train_set)},
             {"test", ids_of(test_set)}});
  ctx.seeds["split"] = tc.seed;
  ctx.seeds["init"] = mix_seed(tc.seed, 1);
  ctx.seeds["shuffle"] = mix_seed(tc.seed, 2);
  ctx.seeds["dropout"] = mix_seed(tc.seed, 3);

  std::ostringstream line;
  line << "trained on " << train_set.size() << " graphs; test accuracy " << eval.report.accuracy << " (n="
       << eval.report.n << ")";
  ctx.say(line.str());
}

void cmd_evaluate(Context& ctx) {
  const Options& opt = ctx.opt;
  const Checkpoint ck = load_checkpoint(need(opt.checkpoint, "--checkpoint"));
  const LabelScheme scheme = checkpoint_scheme(opt, ck);
  if (ck.model.n_classes != n_classes(scheme)) {
    throw Error(ErrorKind::ShapeMismatch, "checkpoint has " + std::to_string(ck.model.n_classes) +
                                              " classes but scheme " + std::string(to_string(scheme)) +
                                              " needs " + std::to_string(n_classes(scheme)));
  }
  const auto samples = maybe_test_subset(opt, load_samples(opt, scheme));
  const fs::path dir = out_dir(opt);
  const Evaluation eval = evaluate_detailed(ck.model, samples, scheme);
  json report = to_json(eval.report);
  report["predictions"] = predictions_json(eval.predictions);
  emit_json(ctx, dir, "report.json", report);
  emit_json(ctx, dir, "patient_report.json", patient_json(eval.predictions, n_classes(scheme)));
  std::ostringstream line;
  line << "accuracy " << eval.report.accuracy << " over " << eval.report.n << " samples";
  ctx.say(line.str());
}

void cmd_hypersearch(Context& ctx) {
  const Options& opt = ctx.opt;
  const std::uint64_t seed = need_seed(opt);
  const LabelScheme scheme = scheme_or(opt, LabelScheme::Binary);
  TrainConfig base;
  base.epochs = opt.epochs;
  base.split_ratio = opt.split;
  base.seed = seed;
  validate(base);
  if (opt.trials < 1) throw Error(ErrorKind::BadFlag, "--trials must be >= 1");
  if (opt.jobs < 1) throw Error(ErrorKind::BadFlag, "--jobs must be >= 1");
  const auto samples = load_samples(opt, scheme);
  const fs::path dir = out_dir(opt);

  // The search only ever sees the outer training partition.
  const Split split = stratified_split(std::span<const GraphSample>(samples), opt.split, seed);
  const auto train_set = select(std::span<const GraphSample>(samples), std::span<const std::size_t>(split.train));
  const SearchResult result = hyper_search(train_set, scheme, SearchSpace{}, opt.trials, seed, base, opt.jobs);

  emit_json(ctx, dir, "search.json", to_json(result));
  emit_json(ctx, dir, "best_config.json", to_json(result.best));
  ctx.seeds["search"] = seed;
  ctx.seeds["split"] = seed;
  std::ostringstream line;
  line << "best trial " << result.best_index << " val accuracy "
       << result.trials[static_cast<std::size_t>(result.best_index)].val_accuracy;
  ctx.say(line.str());
}

void cmd_importance(Context& ctx) {
  const Options& opt = ctx.opt;
  const Checkpoint ck = load_checkpoint(need(opt.checkpoint, "--checkpoint"));
  const LabelScheme scheme = checkpoint_scheme(opt, ck);
  const ImportanceMethod method = parse_importance_method(opt.method);
  const ImportanceKey key = parse_importance_key(opt.key.value_or("region"));
  if (opt.k < 1) throw Error(ErrorKind::BadFlag, "--k must be >= 1");
  const auto samples = maybe_test_subset(opt, load_samples(opt, scheme));
  const fs::path dir = out_dir(opt);
  const ImportanceReport report = method == ImportanceMethod::Saliency
                                      ? saliency_importance(ck.model, samples, key)
                                      : occlusion_importance(ck.model, samples, key);
  emit_json(ctx, dir, "importance.json", to_json(report, static_cast<std::size_t>(opt.k)));
  std::string line = "top:";
  for (const auto& name : top_k(report, static_cast<std::size_t>(opt.k))) line += " [" + name + "]";
  ctx.say(line);
}

std::vector<std::string> read_label_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw Error(ErrorKind::MissingFile, "cannot open " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

void cmd_reduce(Context& ctx) {
  const Options& opt = ctx.opt;
  if (opt.labels.empty() == opt.from_importance.empty()) {
    throw Error(ErrorKind::BadFlag, "give exactly one of --labels or --from-importance");
  }
  std::vector<std::string> names;
  ImportanceKey match = ImportanceKey::Label;
  if (!opt.labels.empty()) {
    names = read_label_file(opt.labels);
  } else {
    const ImportanceReport report = importance_from_json(read_json(opt.from_importance));
    names = top_k(report, static_cast<std::size_t>(opt.k));
    match = report.key;
  }
  if (opt.key) match = parse_importance_key(*opt.key);
  const Dataset ds = load_manifest(need(opt.manifest, "--manifest"));
  const ReducedDataset reduced = reduce_dataset(ds, names, match);
  const fs::path dir = out_dir(opt);
  save_dataset(reduced.dataset, dir);
  ctx.artifacts.push_back("manifest.json");
  ctx.artifacts.push_back("signals/");
  emit_json(ctx, dir, "reduce.json",
            {{"names", names},
             {"match", std::string(to_string(match))},
             {"dropped", reduced.dropped},
             {"n_recordings", reduced.dataset.recordings.size()}});
  ctx.say("kept " + std::to_string(reduced.dataset.recordings.size()) + " recordings, dropped " +
          std::to_string(reduced.dropped.size()));
}

std::vector<ProcessedSample> processed_subset(const Options& opt, const std::vector<std::string>& ids) {
  const Dataset ds = load_manifest(need(opt.manifest, "--manifest"));
  std::vector<ProcessedSample> out;
  if (ids.empty()) return preprocess_dataset(ds);
  std::map<std::string, const SeizureRecording*> index;
  for (const auto& rec : ds.recordings) index[rec.seizure_id] = &rec;
  for (const auto& id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw Error(ErrorKind::SchemaViolation, "unknown seizure id: " + id);
    out.push_back(preprocess_recording(*it->second));
  }
  return out;
}

void cmd_connectivity(Context& ctx) {
  const Options& opt = ctx.opt;
  if (!opt.compare.empty() && opt.compare.size() != 2) {
    throw Error(ErrorKind::BadFlag, "--compare takes exactly two seizure ids");
  }
  std::vector<std::string> ids = opt.seizures;
  for (const auto& id : opt.compare) {
    if (!ids.empty() && std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
  }
  const auto samples = processed_subset(opt, ids);
  const fs::path dir = out_dir(opt);
  fs::create_directories(dir / "graphs");

  std::map<std::string, ConnectivityReport> reports;
  json docs = json::array();
  std::map<std::string, std::array<double, 3>> by_engel;
  std::map<std::string, int> engel_count;
  for (const auto& s : samples) {
    ConnectivityReport r = connectivity_report(s, opt.threshold);
    docs.push_back(to_json(r));
    emit(ctx, dir, "graphs/" + s.seizure_id + ".dot", export_graph(r.binary, GraphFormat::Dot));
    auto& acc = by_engel[r.engel];
    acc[0] += r.summary.avg_thalamic_strength;
    acc[1] += r.summary.thalamic_centrality;
    acc[2] += r.summary.density;
    ++engel_count[r.engel];
    reports.emplace(s.seizure_id, std::move(r));
  }
  json groups = json::object();
  for (const auto& [engel, acc] : by_engel) {
    const double n = engel_count[engel];
    groups[engel] = {{"n", engel_count[engel]},
                     {"mean_avg_thalamic_strength", acc[0] / n},
                     {"mean_thalamic_centrality", acc[1] / n},
                     {"mean_density", acc[2] / n}};
  }
  emit_json(ctx, dir, "connectivity.json",
            {{"threshold", opt.threshold}, {"reports", std::move(docs)}, {"by_engel", std::move(groups)}});
  if (opt.compare.size() == 2) {
    emit_json(ctx, dir, "comparison.json",
              compare_connectivity(reports.at(opt.compare[0]), reports.at(opt.compare[1])));
  }
  ctx.say("connectivity for " + std::to_string(samples.size()) + " recordings");
}

void cmd_export_graph(Context& ctx) {
  const Options& opt = ctx.opt;
  const GraphFormat format = parse_graph_format(opt.graph_format);
  const auto samples = processed_subset(opt, {need(opt.seizure, "--seizure")});
  const fs::path dir = out_dir(opt);
  const BrainGraph graph = correlation_matrix(samples.front());
  const std::string text =
      opt.binary ? export_graph(binarize(graph, opt.threshold), format) : export_graph(graph, format);
  emit(ctx, dir, opt.seizure + (format == GraphFormat::Dot ? ".dot" : ".json"), text);
  ctx.say("wrote " + (dir / ctx.artifacts.back()).string());
}

// ---------------------------------------------------------------------------

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--manifest", o.manifest, "dataset manifest.json");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--seed", o.seed, "RNG seed");
  sub->add_option("--scheme", o.scheme, "binary | three_class");
  sub->add_option("--threshold", o.threshold, "graph binarization threshold");
  sub->add_option("--epochs", o.epochs, "training epochs");
  sub->add_option("--split", o.split, "train fraction of the stratified split");
  sub->add_flag("--quiet", o.quiet, "suppress progress output");
}

json flag_values(const CLI::App* sub) {
  json flags = json::object();
  for (const CLI::Option* o : sub->get_options()) {
    if (o->get_lnames().empty() || o->get_lnames().front() == "help") continue;
    const std::string& name = o->get_lnames().front();
    if (o->get_type_size() == 0) {
      flags[name] = o->count() > 0;
    } else if (o->count() > 0) {
      const auto& results = o->results();
      flags[name] = results.size() == 1 ? json(results.front()) : json(results);
    } else {
      flags[name] = o->get_default_str().empty() ? json(nullptr) : json(o->get_default_str());
    }
  }
  return flags;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  const auto started = std::chrono::steady_clock::now();
  auto fail = [&](const Error& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  };

  if (args.empty()) return fail(Error(ErrorKind::UnknownCommand, "no command given"));
  const std::string& verb = args.front();
  if (verb.empty() || (verb.front() != '-' &&
                       std::find(kCommands.begin(), kCommands.end(), verb) == kCommands.end())) {
    return fail(Error(ErrorKind::UnknownCommand, "unknown command '" + verb + "'"));
  }

  Options o;
  CLI::App app{"sEEG connectivity graph classifier", "seegnn"};
  app.option_defaults()->always_capture_default();
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  std::map<std::string, std::function<void(Context&)>> handlers;
  std::map<std::string, CLI::App*> subs;
  auto add = [&](const std::string& name, const std::string& help, std::function<void(Context&)> fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_common(sub, o);
    handlers[name] = std::move(fn);
    subs[name] = sub;
    return sub;
  };

  auto* synth = add("synth", "generate a synthetic cohort", cmd_synth);
  synth->add_option("--patients", o.patients, "number of patients");
  synth->add_option("--coupling", o.coupling, "planted-region coupling strength");
  synth->add_option("--noise-sd", o.noise_sd, "additive noise sd");
  synth->add_option("--format", o.format, "signal file format")->check(CLI::IsMember({"f32le", "csv"}));
  synth->add_option("--seizures", o.seizure_range, "seizures per patient, MIN MAX")->expected(2);
  synth->add_option("--channels", o.channel_range, "channels per patient, MIN MAX")->expected(2);
  synth->add_option("--duration", o.duration_range, "recording length in seconds, MIN MAX")->expected(2);

  add("preprocess", "resample, standardize and fit recordings", cmd_preprocess);

  auto* train_cmd = add("train", "train a GCN on a stratified split", cmd_train);
  train_cmd->add_option("--lr", o.lr, "Adam learning rate");
  train_cmd->add_option("--hidden", o.hidden, "hidden width");
  train_cmd->add_option("--weight-decay", o.weight_decay, "L2 weight decay");
  train_cmd->add_option("--dropout", o.dropout, "dropout on the first layer");
  train_cmd->add_option("--config", o.config, "TrainConfig JSON (e.g. best_config.json)");

  auto* eval_cmd = add("evaluate", "evaluate a checkpoint", cmd_evaluate);
  auto* search = add("hypersearch", "seeded random hyperparameter search", cmd_hypersearch);
  search->add_option("--trials", o.trials, "number of trials");
  search->add_option("--jobs", o.jobs, "concurrent trials");

  auto* imp = add("importance", "channel importance scores", cmd_importance);
  imp->add_option("--method", o.method, "saliency | occlusion")->check(CLI::IsMember({"saliency", "occlusion"}));
  imp->add_option("--k", o.k, "size of the top list");
  imp->add_option("--key", o.key, "region | label");
  for (CLI::App* sub : {eval_cmd, imp}) {
    sub->add_option("--checkpoint", o.checkpoint, "checkpoint.json");
    sub->add_option("--split-file", o.split_file, "split.json; restrict to its test ids");
  }

  auto* reduce = add("reduce", "keep only the listed channels", cmd_reduce);
  reduce->add_option("--labels", o.labels, "file with one label per line");
  reduce->add_option("--from-importance", o.from_importance, "importance.json; uses its top --k");
  reduce->add_option("--k", o.k, "entries taken from the importance report");
  reduce->add_option("--key", o.key, "match on region | label");

  auto* conn = add("connectivity", "thalamic connectivity reports", cmd_connectivity);
  conn->add_option("--seizure", o.seizures, "seizure id (repeatable; default all)");
  conn->add_option("--compare", o.compare, "two seizure ids to compare")->expected(2);

  auto* export_cmd = add("export-graph", "export one recording's graph", cmd_export_graph);
  export_cmd->add_option("--seizure", o.seizure, "seizure id");
  export_cmd->add_option("--format", o.graph_format, "dot | json")->check(CLI::IsMember({"dot", "json"}));
  export_cmd->add_flag("--binary", o.binary, "export the thresholded graph");

  std::vector<const char*> argv{"seegnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      std::ostringstream ignored;
      app.exit(e, out, ignored);
      return 0;
    }
    return fail(Error(ErrorKind::BadFlag, e.what()));
  }

  const std::string command = app.get_subcommands().front()->get_name();
  Context ctx{out, o, json::object(), {}};
  try {
    handlers.at(command)(ctx);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json manifest{{"command", command},
                  {"flags", flag_values(subs.at(command))},
                  {"seeds", ctx.seeds},
                  {"artifacts", ctx.artifacts},
                  {"tool_version", std::string(kToolVersion)},
                  {"duration_s", seconds}};
    write_atomic(fs::path(o.out) / "run_manifest.json", manifest.dump(2) + "\n");
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    err << "error: Internal: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

}  // namespace seegnn::cli
