#include "monostage/decode.hpp"

#include <algorithm>
#include <exception>
#include <thread>

#include "monostage/errors.hpp"

namespace monostage {

std::string_view to_string(DecodeMode mode) {
  switch (mode) {
    case DecodeMode::kArgmax:
      return "argmax";
    case DecodeMode::kDpUnary:
      return "dp-unary";
    case DecodeMode::kCrf:
      return "crf";
  }
  return "unknown";
}

std::optional<DecodeMode> parse_decode_mode(std::string_view name) {
  if (name == "argmax") return DecodeMode::kArgmax;
  if (name == "dp-unary") return DecodeMode::kDpUnary;
  if (name == "crf") return DecodeMode::kCrf;
  return std::nullopt;
}

LabelSequence argmax_labels(const Matrix& scores) {
  LabelSequence labels(scores.rows());
  for (std::size_t t = 0; t < scores.rows(); ++t) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.cols(); ++c) {
      if (scores(t, c) > scores(t, best)) best = c;
    }
    labels[t] = static_cast<int>(best) + 1;
  }
  return labels;
}

LabelSequence decode(const Matrix& features, const TwoStreamModel& model, DecodeMode mode, bool smooth) {
  switch (mode) {
    case DecodeMode::kArgmax: {
      Matrix unary = unary_potentials(features, model);
      return argmax_labels(smooth ? smooth_unary(unary) : unary);
    }
    case DecodeMode::kDpUnary:
      return viterbi(unary_only_potentials(features, model, smooth));
    case DecodeMode::kCrf:
      return viterbi(build_potentials(features, model, smooth));
  }
  throw InvalidInput("unknown decode mode");
}

std::vector<Prediction> decode_dataset(const Dataset& data, const TwoStreamModel& model, DecodeMode mode,
                                       bool smooth) {
  std::vector<Prediction> out(data.size());
  // Videos are independent; each worker fills its own slots, so the result
  // does not depend on scheduling.
  const std::size_t workers =
      std::min<std::size_t>(data.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::exception_ptr> errors(workers);
  auto work = [&](std::size_t w) {
    try {
      for (std::size_t i = w; i < data.size(); i += workers) {
        out[i] = {data[i].id, decode(data[i].features, model, mode, smooth)};
      }
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers <= 1) {
    if (workers == 1) work(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work, w);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

}  // namespace monostage
