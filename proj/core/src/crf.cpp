#include "monostage/crf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "monostage/errors.hpp"

namespace monostage {

namespace {

// Running log-sum-exp over a stream of values. Tracks whether any value has
// been seen so that "no term" is distinct from any finite result.
class LogSumExp {
 public:
  void add(double v) {
    if (!any_) {
      max_ = v;
      sum_ = 1.0;
      any_ = true;
    } else if (v <= max_) {
      sum_ += std::exp(v - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - v) + 1.0;
      max_ = v;
    }
  }
  bool any() const { return any_; }
  double value() const { return max_ + std::log(sum_); }

 private:
  bool any_ = false;
  double max_ = 0.0;
  double sum_ = 0.0;
};

// Forward (or backward) log-messages with a reachability flag per cell.
struct Messages {
  Matrix value;
  std::vector<unsigned char> reachable;

  Messages(std::size_t T, std::size_t C) : value(T, C), reachable(T * C, 0) {}
  bool ok(std::size_t t, std::size_t c) const { return reachable[t * value.cols() + c] != 0; }
  void set(std::size_t t, std::size_t c, double v) {
    value(t, c) = v;
    reachable[t * value.cols() + c] = 1;
  }
};

Messages forward(const PotentialTable& pot) {
  const std::size_t T = pot.length();
  const std::size_t C = pot.num_classes();
  Messages alpha(T, C);
  for (std::size_t c = 0; c < C; ++c) alpha.set(0, c, pot.unary(0, c));
  for (std::size_t t = 1; t < T; ++t) {
    bool frame_reached = false;
    for (std::size_t to = 0; to < C; ++to) {
      LogSumExp acc;
      for (std::size_t from = 0; from < C; ++from) {
        if (!alpha.ok(t - 1, from) || !pot.mask.allowed(from, to)) continue;
        acc.add(alpha.value(t - 1, from) + pot.pairwise(t - 1, from, to));
      }
      if (acc.any()) {
        alpha.set(t, to, pot.unary(t, to) + acc.value());
        frame_reached = true;
      }
    }
    if (!frame_reached) {
      throw InvalidInput("no allowed label path reaches frame " + std::to_string(t));
    }
  }
  return alpha;
}

Messages backward(const PotentialTable& pot) {
  const std::size_t T = pot.length();
  const std::size_t C = pot.num_classes();
  Messages beta(T, C);
  for (std::size_t c = 0; c < C; ++c) beta.set(T - 1, c, 0.0);
  for (std::size_t t = T - 1; t-- > 0;) {
    for (std::size_t from = 0; from < C; ++from) {
      LogSumExp acc;
      for (std::size_t to = 0; to < C; ++to) {
        if (!beta.ok(t + 1, to) || !pot.mask.allowed(from, to)) continue;
        acc.add(pot.pairwise(t, from, to) + pot.unary(t + 1, to) + beta.value(t + 1, to));
      }
      if (acc.any()) beta.set(t, from, acc.value());
    }
  }
  return beta;
}

double final_log_sum(const Messages& alpha) {
  const std::size_t last = alpha.value.rows() - 1;
  LogSumExp acc;
  for (std::size_t c = 0; c < alpha.value.cols(); ++c) {
    if (alpha.ok(last, c)) acc.add(alpha.value(last, c));
  }
  return acc.value();
}

}  // namespace

TransitionMask TransitionMask::monotone(std::size_t classes) {
  TransitionMask mask(classes, false);
  for (std::size_t from = 0; from < classes; ++from) {
    for (std::size_t to = from; to < classes; ++to) mask.set(from, to, true);
  }
  return mask;
}

void PotentialTable::validate() const {
  const std::size_t T = length();
  const std::size_t C = num_classes();
  if (T == 0 || C == 0) throw InvalidInput("potential table needs T >= 1 and C >= 1");
  if (mask.classes() != C) throw InvalidInput("transition mask size does not match class count");
  if (pairwise.steps() != T - 1 || (T > 1 && pairwise.classes() != C)) {
    throw InvalidInput("pairwise table must hold T-1 slices of CxC");
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      if (!std::isfinite(unary(t, c))) {
        throw InvalidInput("non-finite unary potential at frame " + std::to_string(t));
      }
    }
  }
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t i = 0; i < C; ++i) {
      for (std::size_t j = 0; j < C; ++j) {
        if (mask.allowed(i, j) && !std::isfinite(pairwise(t, i, j))) {
          throw InvalidInput("non-finite pairwise potential at step " + std::to_string(t));
        }
      }
    }
  }
}

void check_labels(const PotentialTable& pot, const LabelSequence& labels) {
  if (labels.size() != pot.length()) {
    throw InvalidInput("label sequence has length " + std::to_string(labels.size()) + ", expected " +
                       std::to_string(pot.length()));
  }
  const int C = static_cast<int>(pot.num_classes());
  for (int y : labels) {
    if (y < 1 || y > C) throw InvalidInput("label " + std::to_string(y) + " outside 1.." + std::to_string(C));
  }
}

double log_partition(const PotentialTable& pot) {
  pot.validate();
  return final_log_sum(forward(pot));
}

CrfInference marginals(const PotentialTable& pot) {
  pot.validate();
  const std::size_t T = pot.length();
  const std::size_t C = pot.num_classes();
  const Messages alpha = forward(pot);
  const Messages beta = backward(pot);

  CrfInference out;
  out.log_partition = final_log_sum(alpha);
  const double logz = out.log_partition;

  out.unary_marginals = Matrix(T, C);
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t c = 0; c < C; ++c) {
      if (alpha.ok(t, c) && beta.ok(t, c)) {
        out.unary_marginals(t, c) = std::exp(alpha.value(t, c) + beta.value(t, c) - logz);
      }
    }
  }

  out.pairwise_marginals = SliceStack(T - 1, C);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    for (std::size_t i = 0; i < C; ++i) {
      if (!alpha.ok(t, i)) continue;
      for (std::size_t j = 0; j < C; ++j) {
        if (!pot.mask.allowed(i, j) || !beta.ok(t + 1, j)) continue;
        out.pairwise_marginals(t, i, j) = std::exp(alpha.value(t, i) + pot.pairwise(t, i, j) +
                                                   pot.unary(t + 1, j) + beta.value(t + 1, j) - logz);
      }
    }
  }
  return out;
}

double sequence_score(const PotentialTable& pot, const LabelSequence& labels) {
  check_labels(pot, labels);
  double score = pot.unary(0, static_cast<std::size_t>(labels[0] - 1));
  for (std::size_t t = 1; t < labels.size(); ++t) {
    const auto from = static_cast<std::size_t>(labels[t - 1] - 1);
    const auto to = static_cast<std::size_t>(labels[t] - 1);
    if (!pot.mask.allowed(from, to)) throw ForbiddenTransition(t - 1, labels[t - 1], labels[t]);
    score = score + pot.pairwise(t - 1, from, to) + pot.unary(t, to);
  }
  return score;
}

double nll(const PotentialTable& pot, const LabelSequence& gold) {
  pot.validate();
  const double score = sequence_score(pot, gold);
  return log_partition(pot) - score;
}

PotentialGradient nll_gradient(const PotentialTable& pot, const LabelSequence& gold) {
  pot.validate();
  // Validates the gold path before doing any inference work.
  sequence_score(pot, gold);
  CrfInference inf = marginals(pot);
  PotentialGradient grad{std::move(inf.unary_marginals), std::move(inf.pairwise_marginals)};
  for (std::size_t t = 0; t < gold.size(); ++t) {
    grad.unary(t, static_cast<std::size_t>(gold[t] - 1)) -= 1.0;
    if (t > 0) {
      grad.pairwise(t - 1, static_cast<std::size_t>(gold[t - 1] - 1), static_cast<std::size_t>(gold[t] - 1)) -= 1.0;
    }
  }
  return grad;
}

LabelSequence viterbi(const PotentialTable& pot) {
  pot.validate();
  const std::size_t T = pot.length();
  const std::size_t C = pot.num_classes();

  Messages best(T, C);
  std::vector<std::size_t> backptr(T * C, 0);
  for (std::size_t c = 0; c < C; ++c) best.set(0, c, pot.unary(0, c));

  for (std::size_t t = 1; t < T; ++t) {
    bool frame_reached = false;
    for (std::size_t to = 0; to < C; ++to) {
      bool found = false;
      double top = 0.0;
      std::size_t arg = 0;
      for (std::size_t from = 0; from < C; ++from) {
        if (!best.ok(t - 1, from) || !pot.mask.allowed(from, to)) continue;
        const double s = best.value(t - 1, from) + pot.pairwise(t - 1, from, to);
        // Strict comparison keeps the smallest index on ties.
        if (!found || s > top) {
          top = s;
          arg = from;
          found = true;
        }
      }
      if (found) {
        best.set(t, to, top + pot.unary(t, to));
        backptr[t * C + to] = arg;
        frame_reached = true;
      }
    }
    if (!frame_reached) {
      throw InvalidInput("no allowed label path reaches frame " + std::to_string(t));
    }
  }

  bool found = false;
  double top = 0.0;
  std::size_t state = 0;
  for (std::size_t c = 0; c < C; ++c) {
    if (best.ok(T - 1, c) && (!found || best.value(T - 1, c) > top)) {
      top = best.value(T - 1, c);
      state = c;
      found = true;
    }
  }

  LabelSequence labels(T);
  for (std::size_t t = T; t-- > 0;) {
    labels[t] = static_cast<int>(state) + 1;
    if (t > 0) state = backptr[t * C + state];
  }
  return labels;
}

}  // namespace monostage
