#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "monostage/dataset.hpp"
#include "monostage/metrics.hpp"
#include "monostage/potentials.hpp"

namespace monostage {

enum class DecodeMode {
  kArgmax,   // per-frame argmax of the unary scores, no ordering constraint
  kDpUnary,  // Viterbi over the monotone mask, every allowed transition scores 0
  kCrf,      // Viterbi over the full two-stream potentials
};

std::string_view to_string(DecodeMode mode);
std::optional<DecodeMode> parse_decode_mode(std::string_view name);

/// Per-row argmax, smallest index on ties. Labels are 1-based.
LabelSequence argmax_labels(const Matrix& scores);

LabelSequence decode(const Matrix& features, const TwoStreamModel& model, DecodeMode mode, bool smooth);

std::vector<Prediction> decode_dataset(const Dataset& data, const TwoStreamModel& model, DecodeMode mode,
                                       bool smooth);

}  // namespace monostage
