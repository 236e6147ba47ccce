#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "commands.hpp"
#include "monostage/errors.hpp"

namespace {

using namespace monostage;
using namespace monostage::cli;

void add_train_flags(CLI::App* cmd, TrainConfig& c) {
  cmd->add_option("--lr", c.learning_rate, "Adam learning rate")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--batch", c.batch_size, "videos per batch")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--frames", c.frames_per_video, "frames subsampled per video")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--epochs", c.epochs, "maximum epochs")->capture_default_str();
  cmd->add_option("--seed", c.seed, "initialization and sampling seed")->capture_default_str();
  cmd->add_option("--w-nll", c.weights.nll, "CRF NLL weight")->capture_default_str();
  cmd->add_option("--w-image", c.weights.image, "image-loss weight")->capture_default_str();
  cmd->add_option("--w-transition", c.weights.transition, "transition-loss weight")->capture_default_str();
  cmd->add_option("--jitter", c.feature_jitter, "feature noise during training")->capture_default_str();
  cmd->add_option("--patience", c.patience, "early stopping patience, 0 = off")->capture_default_str();
  cmd->add_option("--classes", c.num_classes, "number of stages, 0 = from data")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);

  CLI::App app{"Monotone stage labelling with a linear-chain CRF"};
  app.require_subcommand(1);

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset with splits");
  synth_cmd->add_option("--preset", synth.preset, "human or mouse")->capture_default_str();
  synth_cmd->add_option("--videos", synth.videos, "number of videos");
  synth_cmd->add_option("--classes", synth.classes, "number of stages");
  synth_cmd->add_option("--dim", synth.dim, "feature dimension");
  synth_cmd->add_option("--mean-length", synth.mean_length, "mean frames per video");
  synth_cmd->add_option("--sigma", synth.sigma, "feature noise");
  synth_cmd->add_option("--correlation", synth.correlation, "frame-to-frame noise correlation");
  synth_cmd->add_option("--progress", synth.progress, "per-stage offset along a shared direction");
  synth_cmd->add_option("--confusion", synth.confusion, "adjacent-stage confusion rate");
  synth_cmd->add_option("--dwell-decay", synth.dwell_decay, "geometric decay of stage shares");
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->capture_default_str();
  synth_cmd->add_option("-o,--out", synth.out, "output directory")->required();

  TrainOptions train;
  auto* train_cmd = app.add_subcommand("train", "train a two-stream model");
  train_cmd->add_option("-d,--data", train.data, "dataset directory or .jsonl")->required();
  train_cmd->add_option("-o,--out", train.out, "output directory")->required();
  train_cmd->add_option("--ablation", train.ablation, "none or unary-dp")->capture_default_str();
  train_cmd->add_flag("!--no-smooth", train.smooth, "disable decode-time smoothing in the checkpoint");
  add_train_flags(train_cmd, train.config);

  DecodeOptions decode;
  auto* decode_cmd = app.add_subcommand("decode", "label videos with a trained checkpoint");
  decode_cmd->add_option("-c,--checkpoint", decode.checkpoint, "checkpoint.json")->required();
  decode_cmd->add_option("-d,--data", decode.data, "dataset directory or .jsonl")->required();
  decode_cmd->add_option("--split", decode.split, "train, val, test or all");
  decode_cmd->add_option("--mode", decode.mode, "argmax, dp-unary or crf")->capture_default_str();
  decode_cmd->add_option("--smooth", decode.smooth, "auto, on or off")->capture_default_str();
  decode_cmd->add_option("-o,--out", decode.out, "output directory")->required();

  EvalOptions eval;
  auto* eval_cmd = app.add_subcommand("eval", "score predictions against gold labels");
  eval_cmd->add_option("-p,--predictions", eval.predictions, "predictions.jsonl");
  eval_cmd->add_option("--seeds", eval.seeds, "run directories to aggregate");
  eval_cmd->add_option("-d,--data", eval.data, "dataset directory or .jsonl")->required();
  eval_cmd->add_option("--split", eval.split, "train, val, test or all");
  eval_cmd->add_option("-o,--out", eval.out, "output directory")->required();

  AblationOptions ablation;
  ablation.config = ablation_defaults();
  auto* ablation_cmd = app.add_subcommand("ablation", "compare argmax, dp-unary and crf decoding");
  ablation_cmd->add_option("-d,--data", ablation.data, "dataset directory")->required();
  ablation_cmd->add_option("-o,--out", ablation.out, "output directory")->required();
  ablation_cmd->add_option("--rungs", ablation.rungs, "subset of argmax dp-unary crf")->capture_default_str();
  ablation_cmd->add_flag("!--no-smooth", ablation.smooth, "disable decode-time smoothing");
  add_train_flags(ablation_cmd, ablation.config);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kSuccess : kUsage;
  }

  try {
    if (*synth_cmd) return run_synth(synth, args);
    if (*train_cmd) return run_train(train, args);
    if (*decode_cmd) return run_decode(decode, args);
    if (*eval_cmd) return run_eval(eval, args);
    if (*ablation_cmd) return run_ablation(ablation, args);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const InvalidInput& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}
