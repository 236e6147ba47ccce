#pragma once

// Stage sequences, the synthetic time-lapse generator, splits and the
// JSON Lines dataset format.
//
// Dataset file: one record per line,
//   {"id": string, "labels": [int...], "features": [[double...]...]}
// labels are 1-based and non-decreasing; every feature row in a file has the
// same length.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "monostage/array.hpp"
#include "monostage/crf.hpp"

namespace monostage {

struct StageSequence {
  std::string id;
  Matrix features;  // T × D
  LabelSequence labels;

  std::size_t length() const { return labels.size(); }

  friend bool operator==(const StageSequence&, const StageSequence&) = default;
};

using Dataset = std::vector<StageSequence>;

/// Throws InvalidInput naming the sequence if shapes disagree, T < 2, a label
/// is below 1, or labels decrease.
void validate_sequence(const StageSequence& seq);

/// Largest label found in the dataset (0 when empty).
int max_label(const Dataset& data);

struct SynthConfig {
  std::size_t num_videos = 100;
  std::size_t num_classes = 11;
  std::size_t feature_dim = 16;
  double mean_length = 325.0;
  double length_spread = 0.15;  // relative std of video length
  // Stage s gets a share proportional to dwell_decay^(s-1) of each video.
  double dwell_decay = 0.8;
  double noise_sigma = 0.35;
  // AR(1) coefficient of the noise between consecutive frames; the marginal
  // std stays noise_sigma.
  double noise_correlation = 0.8;
  double confusion_rate = 0.01;
  // Offset per stage along a shared direction, giving embeddings an ordinal
  // trend on top of their random part.
  double progress_step = 1.5;
  std::uint64_t seed = 42;

  /// C=11, mean length 325.
  static SynthConfig human();
  /// C=8, median length 314.
  static SynthConfig mouse();

  void validate() const;
};

/// Stage embeddings drawn from the config seed, one row per stage: a random
/// unit vector plus (s-1) * progress_step along a shared unit direction.
Matrix stage_embeddings(const SynthConfig& config);

/// Synthetic monotone videos. Each video draws a length, geometric per-stage
/// dwell times, and emits features as its stage embedding plus Gaussian
/// noise that is correlated across consecutive frames; with probability confusion_rate a frame uses an adjacent stage's
/// embedding instead.
Dataset generate(const SynthConfig& config);

struct Split {
  Dataset train;
  Dataset val;
  Dataset test;
};

struct SplitFractions {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Video ids per split.
struct SplitIds {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;

  friend bool operator==(const SplitIds&, const SplitIds&) = default;
};

/// Seeded shuffle, then cut by whole videos. val and test get
/// round(N * fraction) videos; train gets the rest.
SplitIds split_ids(const Dataset& data, SplitFractions fractions, std::uint64_t seed);
Split split(const Dataset& data, SplitFractions fractions, std::uint64_t seed);

/// Resolves ids against data; throws DataError on unknown ids.
Split apply_split(const Dataset& data, const SplitIds& ids);

std::string sequence_to_jsonl(const StageSequence& seq);
void save_dataset(const std::string& path, const Dataset& data);
/// Empty file gives an empty dataset. Errors name the line number and field,
/// or the video id for monotonicity violations.
Dataset load_dataset(const std::string& path);
Dataset parse_dataset(const std::string& text);

void save_split_ids(const std::string& path, const SplitIds& ids);
SplitIds load_split_ids(const std::string& path);

}  // namespace monostage
