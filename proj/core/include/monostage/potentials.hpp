#pragma once

// Two-stream heads that parameterize the CRF.
//
// The image head maps each frame's feature vector to softmax class scores
// (the unary potentials). The transition head maps the concatenation of two
// consecutive feature vectors to a softmax over {no change, change}; its two
// probabilities fill the diagonal and the strict upper triangle of each
// pairwise slice. Downward transitions are masked.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "monostage/array.hpp"
#include "monostage/crf.hpp"

namespace monostage {

struct TwoStreamModel {
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  Matrix unary_weight;                  // C × D
  std::vector<double> unary_bias;       // C
  Matrix transition_weight;             // 2 × 2D
  std::vector<double> transition_bias;  // 2

  /// Weights uniform in ±1/sqrt(fan_in), biases zero.
  static TwoStreamModel initialize(std::size_t num_classes, std::size_t feature_dim, std::uint64_t seed);

  /// Zero weights and biases of the right shapes.
  static TwoStreamModel zeros(std::size_t num_classes, std::size_t feature_dim);

  /// Throws InvalidInput on inconsistent shapes or non-finite entries.
  void validate() const;

  friend bool operator==(const TwoStreamModel&, const TwoStreamModel&) = default;
};

/// In-place softmax of one row of logits.
void softmax_inplace(std::span<double> logits);

/// T×C: row t = softmax(W_I f_t + b_I).
Matrix unary_potentials(const Matrix& features, const TwoStreamModel& model);

/// (T-1)×2: row t = softmax(W_M [f_t ; f_{t+1}] + b_M). Column 0 is
/// "no change", column 1 is "change". Requires T >= 2.
Matrix transition_probs(const Matrix& features, const TwoStreamModel& model);

struct PairwiseBlock {
  SliceStack pairwise;
  TransitionMask mask;
};

/// Case assembly: (c,c) <- rho_0, (c,c') for c<c' <- rho_1, c>c' masked.
/// Masked entries are left at 0 and never read.
PairwiseBlock assemble_pairwise(const Matrix& rho, std::size_t num_classes);

/// Ordinal smoothing over classes with kernel (1,3,5,3,1)/13, zero padded
/// at both ends. Not renormalized.
Matrix smooth_unary(const Matrix& unary);

inline constexpr double kSmoothingKernel[5] = {1.0 / 13.0, 3.0 / 13.0, 5.0 / 13.0, 3.0 / 13.0, 1.0 / 13.0};

/// Full CRF inputs for one sequence. smooth applies smooth_unary to the
/// unary matrix, which is meant for decoding only.
PotentialTable build_potentials(const Matrix& features, const TwoStreamModel& model, bool smooth);

/// Unary-only table: same unary as build_potentials, every allowed
/// transition scored 0 under the monotone mask.
PotentialTable unary_only_potentials(const Matrix& features, const TwoStreamModel& model, bool smooth);

/// Model parameters plus the decode-time smoothing flag.
struct Checkpoint {
  TwoStreamModel model;
  bool smooth_at_decode = true;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// JSON text of a checkpoint: C, D, row-major arrays, smoothing flag.
std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace monostage
