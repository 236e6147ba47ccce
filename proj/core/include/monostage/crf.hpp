#pragma once

// Exact inference for a linear-chain CRF whose transitions are restricted by a
// boolean mask. Scores are combined additively inside exp{}; the first frame
// carries its unary score only (there is no start state).
//
// Masked transitions are skipped by every reduction. They are never encoded as
// -inf, so values stored at masked positions are ignored entirely.

#include <cstddef>
#include <vector>

#include "monostage/array.hpp"

namespace monostage {

/// Stage labels are 1-based: 1..C.
using LabelSequence = std::vector<int>;

/// C×C table of allowed transitions c -> c'.
class TransitionMask {
 public:
  TransitionMask() = default;
  explicit TransitionMask(std::size_t classes, bool allowed = true)
      : classes_(classes), allowed_(classes * classes, allowed ? 1 : 0) {}

  /// Allows c -> c' iff c <= c'.
  static TransitionMask monotone(std::size_t classes);

  std::size_t classes() const { return classes_; }

  // 0-based class indices.
  bool allowed(std::size_t from, std::size_t to) const { return allowed_[from * classes_ + to] != 0; }
  void set(std::size_t from, std::size_t to, bool allowed) { allowed_[from * classes_ + to] = allowed ? 1 : 0; }

  friend bool operator==(const TransitionMask&, const TransitionMask&) = default;

 private:
  std::size_t classes_ = 0;
  std::vector<unsigned char> allowed_;
};

/// Inputs of the CRF. unary is T×C; pairwise holds T-1 slices of C×C.
struct PotentialTable {
  Matrix unary;
  SliceStack pairwise;
  TransitionMask mask;

  std::size_t length() const { return unary.rows(); }
  std::size_t num_classes() const { return unary.cols(); }

  /// Throws InvalidInput on empty or inconsistent shapes and on non-finite
  /// entries (pairwise entries are checked only where the mask allows them).
  void validate() const;
};

struct CrfInference {
  double log_partition = 0.0;
  Matrix unary_marginals;
  SliceStack pairwise_marginals;
};

struct PotentialGradient {
  Matrix unary;
  SliceStack pairwise;
};

/// log Z, computed with a max-shifted log-sum-exp forward recursion.
double log_partition(const PotentialTable& pot);

/// Forward-backward: log Z plus unary and pairwise posterior marginals.
CrfInference marginals(const PotentialTable& pot);

/// Score of one labelling: sum of its unary and pairwise entries. Throws
/// ForbiddenTransition if the sequence uses a masked transition.
double sequence_score(const PotentialTable& pot, const LabelSequence& labels);

/// -log p(gold | X) = log Z - score(gold).
double nll(const PotentialTable& pot, const LabelSequence& gold);

/// Gradient of nll with respect to every potential entry: marginal minus
/// the gold indicator. Zero at masked positions.
PotentialGradient nll_gradient(const PotentialTable& pot, const LabelSequence& gold);

/// Highest-scoring allowed labelling. Ties go to the smaller class index,
/// both when choosing the final label and at every backtracking step.
LabelSequence viterbi(const PotentialTable& pot);

/// Throws InvalidInput unless labels has pot.length() entries in 1..C.
void check_labels(const PotentialTable& pot, const LabelSequence& labels);

}  // namespace monostage
