#pragma once

// End-to-end training of both heads on
//   w_nll * NLL/T + w_image * L_I + w_transition * L_M
// with Adam, over batches of frame-subsampled videos.

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "monostage/dataset.hpp"
#include "monostage/decode.hpp"
#include "monostage/potentials.hpp"

namespace monostage {

inline constexpr double kLogFloor = 1e-12;

struct LossWeights {
  double nll = 1.0;
  double image = 1.0;
  double transition = 1.0;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 4;
  std::size_t frames_per_video = 50;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  LossWeights weights;
  double feature_jitter = 0.0;  // std of Gaussian noise added to sampled features; 0 = off
  std::size_t patience = 10;    // epochs without val Global improvement before stopping; 0 = never
  std::size_t num_classes = 0;  // 0 = largest label in train/val
  DecodeMode val_mode = DecodeMode::kCrf;
  bool val_smooth = true;

  void validate() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainState {
  TwoStreamModel model;
  TwoStreamModel first_moment;   // shaped like model
  TwoStreamModel second_moment;  // shaped like model
  std::uint64_t step = 0;
  std::mt19937_64 rng;
};

/// Mean over frames of -log max(U(t, y_t), 1e-12).
double image_loss(const Matrix& unary, const LabelSequence& gold);

/// Mean over steps of -log max(rho(t, k*), 1e-12), k* = 1 iff the gold label
/// changes between frames t and t+1.
double transition_loss(const Matrix& rho, const LabelSequence& gold);

struct LossBreakdown {
  double total = 0.0;
  double nll = 0.0;  // CRF NLL divided by T
  double image = 0.0;
  double transition = 0.0;
};

struct LossAndGradient {
  LossBreakdown loss;
  TwoStreamModel gradient;  // same shapes as the model
};

/// Weighted objective for one sequence and its exact parameter gradient.
/// Potentials are not smoothed here.
LossAndGradient total_loss(const Matrix& features, const LabelSequence& gold, const TwoStreamModel& model,
                           const LossWeights& weights);

/// Picks min(frames, T) distinct frames uniformly, keeps them in time order.
StageSequence subsample_frames(const StageSequence& seq, std::size_t frames, std::mt19937_64& rng);

/// min(batch_size, N) distinct random videos, each frame-subsampled.
Dataset sample_batch(const Dataset& data, const TrainConfig& config, std::mt19937_64& rng);

/// One Adam update of state.model along gradient.
void adam_step(TrainState& state, const TwoStreamModel& gradient, double learning_rate,
               const AdamConfig& adam = {});

struct EpochRecord {
  std::size_t epoch = 0;
  double train_nll = 0.0;  // per-frame, over full-length training videos
  double train_image = 0.0;
  double train_transition = 0.0;
  double val_global = 0.0;
  double val_mean_per_stage = 0.0;
};

std::string epoch_record_to_json(const EpochRecord& rec);

struct FitResult {
  TrainState state;            // after the last epoch run
  TwoStreamModel best_model;   // best val Global; the final model when val is empty
  std::size_t best_epoch = 0;  // 0 = initialization
  std::vector<EpochRecord> log;
};

/// Mean loss terms over whole (not subsampled) videos.
LossBreakdown dataset_loss(const Dataset& data, const TwoStreamModel& model, const LossWeights& weights);

/// Initializes from config.seed and trains. ceil(N / batch_size) batches per
/// epoch. Throws NumericError naming the video if a loss turns non-finite.
FitResult fit(const Dataset& train, const Dataset& val, const TrainConfig& config);

/// Same, starting from a given model.
FitResult fit(const Dataset& train, const Dataset& val, const TrainConfig& config, TwoStreamModel init);

}  // namespace monostage
