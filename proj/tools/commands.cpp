#include "commands.hpp"

#include <fstream>
#include <iostream>

#include "json.hpp"
#include "manifest.hpp"
#include "monostage/errors.hpp"
#include "monostage/metrics.hpp"
#include "monostage/potentials.hpp"

namespace monostage::cli {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

constexpr const char* kDatasetFile = "dataset.jsonl";
constexpr const char* kSplitsFile = "splits.json";
constexpr const char* kCheckpointFile = "checkpoint.json";
constexpr const char* kLogFile = "train_log.jsonl";
constexpr const char* kPredictionsFile = "predictions.jsonl";

struct DataSource {
  fs::path dataset;
  std::optional<fs::path> splits;
};

DataSource resolve_data(const fs::path& path) {
  if (fs::is_directory(path)) {
    DataSource src{path / kDatasetFile, std::nullopt};
    if (!fs::exists(src.dataset)) throw DataError("no " + std::string(kDatasetFile) + " in " + path.string());
    if (fs::exists(path / kSplitsFile)) src.splits = path / kSplitsFile;
    return src;
  }
  if (!fs::exists(path)) throw DataError("dataset " + path.string() + " does not exist");
  DataSource src{path, std::nullopt};
  if (fs::exists(path.parent_path() / kSplitsFile)) src.splits = path.parent_path() / kSplitsFile;
  return src;
}

Dataset select_split(const Dataset& data, const DataSource& src, std::string which) {
  if (which.empty()) which = src.splits ? "test" : "all";
  if (which == "all") return data;
  if (!src.splits) throw DataError("split '" + which + "' requested but no " + kSplitsFile + " found");
  const Split parts = apply_split(data, load_split_ids(src.splits->string()));
  if (which == "train") return parts.train;
  if (which == "val") return parts.val;
  if (which == "test") return parts.test;
  throw UsageError("unknown split '" + which + "' (expected train, val, test or all)");
}

void prepare_out(const fs::path& out) {
  if (out.empty()) throw UsageError("an output directory is required (-o)");
  fs::create_directories(out);
}

ordered_json train_config_json(const TrainConfig& c) {
  ordered_json j;
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["frames_per_video"] = c.frames_per_video;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["loss_weights"] = {c.weights.nll, c.weights.image, c.weights.transition};
  j["feature_jitter"] = c.feature_jitter;
  j["patience"] = c.patience;
  j["num_classes"] = c.num_classes;
  j["val_mode"] = std::string(to_string(c.val_mode));
  j["val_smooth"] = c.val_smooth;
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void validate_config(const TrainConfig& c) {
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }
}

// Writes checkpoint + log of a finished fit into dir; returns the checkpoint path.
fs::path write_run(const FitResult& result, bool smooth, const fs::path& dir, RunManifest& manifest) {
  fs::create_directories(dir);
  const fs::path ckpt = dir / kCheckpointFile;
  save_checkpoint(ckpt.string(), Checkpoint{result.best_model, smooth});
  const fs::path log = dir / kLogFile;
  std::ofstream out(log, std::ios::binary);
  for (const auto& rec : result.log) out << epoch_record_to_json(rec) << '\n';
  out.close();
  manifest.add_output(ckpt);
  manifest.add_output(log);
  return ckpt;
}

TrainConfig image_only(TrainConfig c) {
  c.weights = {0.0, 1.0, 0.0};
  c.val_mode = DecodeMode::kArgmax;
  c.val_smooth = false;
  return c;
}

}  // namespace

TrainConfig ablation_defaults() {
  TrainConfig c;
  c.learning_rate = 0.01;
  c.epochs = 30;
  c.seed = 42;
  return c;
}

int run_synth(const SynthOptions& opt, const std::vector<std::string>& argv) {
  SynthConfig cfg;
  if (opt.preset == "human") {
    cfg = SynthConfig::human();
  } else if (opt.preset == "mouse") {
    cfg = SynthConfig::mouse();
  } else {
    throw UsageError("unknown preset '" + opt.preset + "' (expected human or mouse)");
  }
  if (opt.videos) cfg.num_videos = *opt.videos;
  if (opt.classes) cfg.num_classes = *opt.classes;
  if (opt.dim) cfg.feature_dim = *opt.dim;
  if (opt.mean_length) cfg.mean_length = *opt.mean_length;
  if (opt.sigma) cfg.noise_sigma = *opt.sigma;
  if (opt.correlation) cfg.noise_correlation = *opt.correlation;
  if (opt.progress) cfg.progress_step = *opt.progress;
  if (opt.confusion) cfg.confusion_rate = *opt.confusion;
  if (opt.dwell_decay) cfg.dwell_decay = *opt.dwell_decay;
  cfg.seed = opt.seed;
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw UsageError(e.what());
  }

  const Dataset data = generate(cfg);
  const SplitIds ids = split_ids(data, {}, cfg.seed);
  prepare_out(opt.out);

  RunManifest manifest("synth", argv);
  manifest.set_seed(cfg.seed);
  auto& c = manifest.config();
  c["preset"] = opt.preset;
  c["num_videos"] = cfg.num_videos;
  c["num_classes"] = cfg.num_classes;
  c["feature_dim"] = cfg.feature_dim;
  c["mean_length"] = cfg.mean_length;
  c["length_spread"] = cfg.length_spread;
  c["dwell_decay"] = cfg.dwell_decay;
  c["noise_sigma"] = cfg.noise_sigma;
  c["noise_correlation"] = cfg.noise_correlation;
  c["confusion_rate"] = cfg.confusion_rate;
  c["progress_step"] = cfg.progress_step;
  c["split"] = {0.8, 0.1, 0.1};

  const fs::path dataset = opt.out / kDatasetFile;
  const fs::path splits = opt.out / kSplitsFile;
  save_dataset(dataset.string(), data);
  save_split_ids(splits.string(), ids);
  manifest.add_output(dataset);
  manifest.add_output(splits);
  manifest.write(opt.out);
  std::cout << "wrote " << data.size() << " videos (train " << ids.train.size() << ", val " << ids.val.size()
            << ", test " << ids.test.size() << ") to " << opt.out.string() << '\n';
  return kSuccess;
}

int run_train(const TrainOptions& opt, const std::vector<std::string>& argv) {
  if (opt.ablation != "none" && opt.ablation != "unary-dp") {
    throw UsageError("unknown --ablation '" + opt.ablation + "' (expected none or unary-dp)");
  }
  TrainConfig config = opt.config;
  if (opt.ablation == "unary-dp") config = image_only(config);
  validate_config(config);

  const DataSource src = resolve_data(opt.data);
  if (!src.splits) throw DataError("training needs a " + std::string(kSplitsFile) + " next to the dataset");
  const Dataset data = load_dataset(src.dataset.string());
  const Split parts = apply_split(data, load_split_ids(src.splits->string()));
  if (config.num_classes == 0) config.num_classes = static_cast<std::size_t>(max_label(data));
  prepare_out(opt.out);

  RunManifest manifest("train", argv);
  manifest.set_seed(config.seed);
  manifest.config() = train_config_json(config);
  manifest.config()["ablation"] = opt.ablation;
  manifest.config()["smooth_at_decode"] = opt.smooth;
  manifest.add_input(src.dataset);
  manifest.add_input(*src.splits);

  const FitResult result = fit(parts.train, parts.val, config);
  write_run(result, opt.smooth, opt.out, manifest);
  manifest.set("best_epoch", result.best_epoch);
  manifest.set("epochs_run", result.log.size());
  manifest.write(opt.out);
  if (!result.log.empty()) {
    const auto& last = result.log.back();
    std::cout << "epochs " << result.log.size() << ", best epoch " << result.best_epoch << ", last train_nll "
              << last.train_nll << ", val_global " << last.val_global << '\n';
  }
  return kSuccess;
}

int run_decode(const DecodeOptions& opt, const std::vector<std::string>& argv) {
  const auto mode = parse_decode_mode(opt.mode);
  if (!mode) throw UsageError("unknown --mode '" + opt.mode + "' (expected argmax, dp-unary or crf)");
  if (opt.smooth != "auto" && opt.smooth != "on" && opt.smooth != "off") {
    throw UsageError("--smooth must be auto, on or off");
  }
  const Checkpoint ckpt = load_checkpoint(opt.checkpoint.string());
  const DataSource src = resolve_data(opt.data);
  const Dataset data = select_split(load_dataset(src.dataset.string()), src, opt.split);
  for (const auto& seq : data) {
    if (seq.labels.back() > static_cast<int>(ckpt.model.num_classes)) {
      throw DataError("video '" + seq.id + "' has stage " + std::to_string(seq.labels.back()) +
                      " but the checkpoint has " + std::to_string(ckpt.model.num_classes) + " classes");
    }
    if (seq.features.cols() != ckpt.model.feature_dim) {
      throw DataError("video '" + seq.id + "' feature dimension does not match the checkpoint");
    }
  }
  bool smooth = opt.smooth == "on";
  if (opt.smooth == "auto") smooth = *mode != DecodeMode::kArgmax && ckpt.smooth_at_decode;

  prepare_out(opt.out);
  RunManifest manifest("decode", argv);
  manifest.config()["mode"] = std::string(to_string(*mode));
  manifest.config()["smooth"] = smooth;
  manifest.config()["split"] = opt.split.empty() ? (src.splits ? "test" : "all") : opt.split;
  manifest.add_input(opt.checkpoint);
  manifest.add_input(src.dataset);
  if (src.splits) manifest.add_input(*src.splits);

  const auto preds = decode_dataset(data, ckpt.model, *mode, smooth);
  const fs::path out = opt.out / kPredictionsFile;
  save_predictions(out.string(), preds);
  manifest.add_output(out);
  manifest.write(opt.out);
  std::cout << "decoded " << preds.size() << " videos with " << to_string(*mode) << (smooth ? " (smoothed)" : "")
            << '\n';
  return kSuccess;
}

int run_eval(const EvalOptions& opt, const std::vector<std::string>& argv) {
  if (opt.predictions.empty() == opt.seeds.empty()) {
    throw UsageError("give either -p PREDICTIONS or --seeds RUN_DIR...");
  }
  const DataSource src = resolve_data(opt.data);
  const Dataset data = select_split(load_dataset(src.dataset.string()), src, opt.split);
  const int classes = max_label(data);
  prepare_out(opt.out);

  RunManifest manifest("eval", argv);
  manifest.add_input(src.dataset);
  if (src.splits) manifest.add_input(*src.splits);

  if (!opt.predictions.empty()) {
    manifest.add_input(opt.predictions);
    const EvalReport report = evaluate(load_predictions(opt.predictions.string()), data);
    const std::string table = format_table({{"model", report}}, classes);
    write_text(opt.out / "report.json", report_to_json(report));
    write_text(opt.out / "report.txt", table);
    manifest.add_output(opt.out / "report.json");
    manifest.add_output(opt.out / "report.txt");
    manifest.write(opt.out);
    std::cout << table;
    return kSuccess;
  }

  std::vector<EvalReport> reports;
  for (const auto& dir : opt.seeds) {
    const fs::path preds = fs::is_directory(dir) ? dir / kPredictionsFile : dir;
    manifest.add_input(preds);
    reports.push_back(evaluate(load_predictions(preds.string()), data));
  }
  const AggregateReport agg = aggregate_seeds(reports);
  const std::string table = format_aggregate_table({{"model", agg}}, classes);
  write_text(opt.out / "aggregate.json", aggregate_to_json(agg));
  write_text(opt.out / "aggregate.txt", table);
  manifest.add_output(opt.out / "aggregate.json");
  manifest.add_output(opt.out / "aggregate.txt");
  manifest.write(opt.out);
  std::cout << table;
  return kSuccess;
}

int run_ablation(const AblationOptions& opt, const std::vector<std::string>& argv) {
  bool want[3] = {false, false, false};
  for (const auto& r : opt.rungs) {
    const auto mode = parse_decode_mode(r);
    if (!mode) throw UsageError("unknown rung '" + r + "' (expected argmax, dp-unary or crf)");
    want[static_cast<int>(*mode)] = true;
  }
  TrainConfig config = opt.config;
  validate_config(config);

  const DataSource src = resolve_data(opt.data);
  if (!src.splits) throw DataError("ablation needs a " + std::string(kSplitsFile) + " next to the dataset");
  const Dataset data = load_dataset(src.dataset.string());
  const Split parts = apply_split(data, load_split_ids(src.splits->string()));
  if (config.num_classes == 0) config.num_classes = static_cast<std::size_t>(max_label(data));
  const int classes = static_cast<int>(config.num_classes);
  prepare_out(opt.out);

  RunManifest manifest("ablation", argv);
  manifest.set_seed(config.seed);
  manifest.config() = train_config_json(config);
  manifest.config()["smooth"] = opt.smooth;
  manifest.config()["rungs"] = opt.rungs;
  manifest.add_input(src.dataset);
  manifest.add_input(*src.splits);

  // Each rung gets its own directory with checkpoint, log and test-split
  // predictions. argmax and dp-unary share one image-only fit.
  std::vector<std::pair<std::string, EvalReport>> rows;
  ordered_json checkpoints = ordered_json::object();
  auto run_rung = [&](DecodeMode mode, const FitResult& fitted, bool smooth) {
    const std::string name(to_string(mode));
    const fs::path dir = opt.out / name;
    const fs::path ckpt = write_run(fitted, smooth, dir, manifest);
    checkpoints[name] = sha256_file(ckpt);
    const auto preds = decode_dataset(parts.test, fitted.best_model, mode, smooth);
    const fs::path path = dir / kPredictionsFile;
    save_predictions(path.string(), preds);
    manifest.add_output(path);
    rows.emplace_back(name, evaluate(preds, parts.test));
  };

  if (want[static_cast<int>(DecodeMode::kArgmax)] || want[static_cast<int>(DecodeMode::kDpUnary)]) {
    const FitResult image = fit(parts.train, parts.val, image_only(config));
    if (want[static_cast<int>(DecodeMode::kArgmax)]) run_rung(DecodeMode::kArgmax, image, false);
    if (want[static_cast<int>(DecodeMode::kDpUnary)]) run_rung(DecodeMode::kDpUnary, image, opt.smooth);
  }
  if (want[static_cast<int>(DecodeMode::kCrf)]) {
    TrainConfig full = config;
    full.val_mode = DecodeMode::kCrf;
    full.val_smooth = opt.smooth;
    run_rung(DecodeMode::kCrf, fit(parts.train, parts.val, full), opt.smooth);
  }
  manifest.set("checkpoints", checkpoints);

  bool ordered = true;
  for (std::size_t i = 1; i < rows.size(); ++i) ordered = ordered && rows[i - 1].second.global <= rows[i].second.global;

  ordered_json j;
  j["rungs"] = ordered_json::array();
  for (const auto& [name, report] : rows) {
    ordered_json r;
    r["rung"] = name;
    r["report"] = ordered_json::parse(report_to_json(report));
    j["rungs"].push_back(std::move(r));
  }
  j["global_non_decreasing"] = ordered;
  const std::string table = format_table(rows, classes);
  write_text(opt.out / "ablation.json", j.dump(2) + "\n");
  write_text(opt.out / "ablation.txt", table);
  manifest.add_output(opt.out / "ablation.json");
  manifest.add_output(opt.out / "ablation.txt");
  manifest.set("global_non_decreasing", ordered);
  manifest.write(opt.out);

  std::cout << table << "check: Global non-decreasing across rungs: " << (ordered ? "yes" : "NO") << '\n';
  return kSuccess;
}

}  // namespace monostage::cli
