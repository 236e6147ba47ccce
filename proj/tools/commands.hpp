#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "monostage/dataset.hpp"
#include "monostage/decode.hpp"
#include "monostage/training.hpp"

namespace monostage::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kDataError = 2,
  kNumericFailure = 3,
};

/// Bad flag values detected after parsing. Maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SynthOptions {
  std::string preset = "human";
  std::optional<std::size_t> videos;
  std::optional<std::size_t> classes;
  std::optional<std::size_t> dim;
  std::optional<double> mean_length;
  std::optional<double> sigma;
  std::optional<double> correlation;
  std::optional<double> progress;
  std::optional<double> confusion;
  std::optional<double> dwell_decay;
  std::uint64_t seed = 42;
  std::filesystem::path out;
};

struct TrainOptions {
  std::filesystem::path data;
  std::filesystem::path out;
  TrainConfig config;
  std::string ablation = "none";  // none | unary-dp
  bool smooth = true;
};

struct DecodeOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::string split;  // train | val | test | all; empty = test if splits exist, else all
  std::string mode = "crf";
  std::string smooth = "auto";  // auto | on | off
  std::filesystem::path out;
};

struct EvalOptions {
  std::filesystem::path predictions;
  std::filesystem::path data;
  std::string split;
  std::vector<std::filesystem::path> seeds;  // run directories holding predictions.jsonl
  std::filesystem::path out;
};

struct AblationOptions {
  std::filesystem::path data;
  std::filesystem::path out;
  TrainConfig config;
  std::vector<std::string> rungs{"argmax", "dp-unary", "crf"};
  bool smooth = true;
};

int run_synth(const SynthOptions& opt, const std::vector<std::string>& argv);
int run_train(const TrainOptions& opt, const std::vector<std::string>& argv);
int run_decode(const DecodeOptions& opt, const std::vector<std::string>& argv);
int run_eval(const EvalOptions& opt, const std::vector<std::string>& argv);
int run_ablation(const AblationOptions& opt, const std::vector<std::string>& argv);

/// Training defaults used by the ablation command.
TrainConfig ablation_defaults();

}  // namespace monostage::cli
