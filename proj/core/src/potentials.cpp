#include "monostage/potentials.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "json.hpp"
#include "monostage/errors.hpp"

namespace monostage {

namespace {

using ordered_json = nlohmann::ordered_json;

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

void check_features(const Matrix& features, const TwoStreamModel& model) {
  if (features.rows() == 0) throw InvalidInput("feature matrix has no frames");
  if (features.cols() != model.feature_dim) {
    throw InvalidInput("feature dimension " + std::to_string(features.cols()) + " does not match model dimension " +
                       std::to_string(model.feature_dim));
  }
  if (!all_finite(features.values())) throw InvalidInput("non-finite feature value");
}

ordered_json matrix_to_json(const Matrix& m) {
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back(std::vector<double>(m.row(r).begin(), m.row(r).end()));
  }
  return rows;
}

Matrix matrix_from_json(const ordered_json& j, std::size_t rows, std::size_t cols, const char* field) {
  if (!j.is_array() || j.size() != rows) {
    throw DataError(std::string("checkpoint field '") + field + "' must have " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto& row = j[r];
    if (!row.is_array() || row.size() != cols) {
      throw DataError(std::string("checkpoint field '") + field + "' row " + std::to_string(r) + " must have " +
                      std::to_string(cols) + " entries");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!row[c].is_number()) throw DataError(std::string("checkpoint field '") + field + "' has a non-number");
      m(r, c) = row[c].get<double>();
    }
  }
  return m;
}

std::vector<double> vector_from_json(const ordered_json& j, std::size_t size, const char* field) {
  if (!j.is_array() || j.size() != size) {
    throw DataError(std::string("checkpoint field '") + field + "' must have " + std::to_string(size) + " entries");
  }
  std::vector<double> v(size);
  for (std::size_t i = 0; i < size; ++i) {
    if (!j[i].is_number()) throw DataError(std::string("checkpoint field '") + field + "' has a non-number");
    v[i] = j[i].get<double>();
  }
  return v;
}

}  // namespace

TwoStreamModel TwoStreamModel::zeros(std::size_t num_classes, std::size_t feature_dim) {
  TwoStreamModel m;
  m.num_classes = num_classes;
  m.feature_dim = feature_dim;
  m.unary_weight = Matrix(num_classes, feature_dim);
  m.unary_bias.assign(num_classes, 0.0);
  m.transition_weight = Matrix(2, 2 * feature_dim);
  m.transition_bias.assign(2, 0.0);
  return m;
}

TwoStreamModel TwoStreamModel::initialize(std::size_t num_classes, std::size_t feature_dim, std::uint64_t seed) {
  if (num_classes == 0 || feature_dim == 0) throw InvalidInput("model needs C >= 1 and D >= 1");
  TwoStreamModel m = zeros(num_classes, feature_dim);
  std::mt19937_64 rng(seed);
  const double unary_bound = 1.0 / std::sqrt(static_cast<double>(feature_dim));
  const double transition_bound = 1.0 / std::sqrt(static_cast<double>(2 * feature_dim));
  std::uniform_real_distribution<double> unary_dist(-unary_bound, unary_bound);
  std::uniform_real_distribution<double> transition_dist(-transition_bound, transition_bound);
  for (double& w : m.unary_weight.values()) w = unary_dist(rng);
  for (double& w : m.transition_weight.values()) w = transition_dist(rng);
  return m;
}

void TwoStreamModel::validate() const {
  if (num_classes == 0 || feature_dim == 0) throw InvalidInput("model needs C >= 1 and D >= 1");
  if (unary_weight.rows() != num_classes || unary_weight.cols() != feature_dim ||
      unary_bias.size() != num_classes) {
    throw InvalidInput("unary head shape does not match C x D");
  }
  if (transition_weight.rows() != 2 || transition_weight.cols() != 2 * feature_dim ||
      transition_bias.size() != 2) {
    throw InvalidInput("transition head shape does not match 2 x 2D");
  }
  if (!all_finite(unary_weight.values()) || !all_finite(unary_bias) || !all_finite(transition_weight.values()) ||
      !all_finite(transition_bias)) {
    throw InvalidInput("model has non-finite parameters");
  }
}

void softmax_inplace(std::span<double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& z : logits) {
    z = std::exp(z - top);
    sum += z;
  }
  for (double& z : logits) z /= sum;
}

Matrix unary_potentials(const Matrix& features, const TwoStreamModel& model) {
  model.validate();
  check_features(features, model);
  const std::size_t T = features.rows();
  const std::size_t C = model.num_classes;
  const std::size_t D = model.feature_dim;
  Matrix out(T, C);
  for (std::size_t t = 0; t < T; ++t) {
    auto f = features.row(t);
    auto z = out.row(t);
    for (std::size_t c = 0; c < C; ++c) {
      double acc = model.unary_bias[c];
      for (std::size_t d = 0; d < D; ++d) acc += model.unary_weight(c, d) * f[d];
      z[c] = acc;
    }
    softmax_inplace(z);
  }
  return out;
}

Matrix transition_probs(const Matrix& features, const TwoStreamModel& model) {
  model.validate();
  check_features(features, model);
  const std::size_t T = features.rows();
  if (T < 2) throw InvalidInput("transition probabilities need at least two frames");
  const std::size_t D = model.feature_dim;
  Matrix out(T - 1, 2);
  for (std::size_t t = 0; t + 1 < T; ++t) {
    auto prev = features.row(t);
    auto cur = features.row(t + 1);
    auto z = out.row(t);
    for (std::size_t k = 0; k < 2; ++k) {
      double acc = model.transition_bias[k];
      for (std::size_t d = 0; d < D; ++d) {
        acc += model.transition_weight(k, d) * prev[d] + model.transition_weight(k, D + d) * cur[d];
      }
      z[k] = acc;
    }
    softmax_inplace(z);
  }
  return out;
}

PairwiseBlock assemble_pairwise(const Matrix& rho, std::size_t num_classes) {
  if (num_classes < 1) throw InvalidInput("pairwise assembly needs C >= 1");
  if (rho.rows() > 0 && rho.cols() != 2) throw InvalidInput("transition probabilities must have two columns");
  PairwiseBlock block{SliceStack(rho.rows(), num_classes), TransitionMask::monotone(num_classes)};
  for (std::size_t t = 0; t < rho.rows(); ++t) {
    for (std::size_t i = 0; i < num_classes; ++i) {
      block.pairwise(t, i, i) = rho(t, 0);
      for (std::size_t j = i + 1; j < num_classes; ++j) block.pairwise(t, i, j) = rho(t, 1);
    }
  }
  return block;
}

Matrix smooth_unary(const Matrix& unary) {
  const std::size_t C = unary.cols();
  Matrix out(unary.rows(), C);
  const auto span = static_cast<std::ptrdiff_t>(C);
  for (std::size_t t = 0; t < unary.rows(); ++t) {
    for (std::ptrdiff_t c = 0; c < span; ++c) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -2; k <= 2; ++k) {
        const std::ptrdiff_t src = c + k;
        if (src < 0 || src >= span) continue;
        acc += kSmoothingKernel[k + 2] * unary(t, static_cast<std::size_t>(src));
      }
      out(t, static_cast<std::size_t>(c)) = acc;
    }
  }
  return out;
}

PotentialTable build_potentials(const Matrix& features, const TwoStreamModel& model, bool smooth) {
  Matrix unary = unary_potentials(features, model);
  if (smooth) unary = smooth_unary(unary);
  if (features.rows() < 2) {
    return {std::move(unary), SliceStack(0, model.num_classes), TransitionMask::monotone(model.num_classes)};
  }
  PairwiseBlock block = assemble_pairwise(transition_probs(features, model), model.num_classes);
  return {std::move(unary), std::move(block.pairwise), std::move(block.mask)};
}

PotentialTable unary_only_potentials(const Matrix& features, const TwoStreamModel& model, bool smooth) {
  Matrix unary = unary_potentials(features, model);
  if (smooth) unary = smooth_unary(unary);
  const std::size_t steps = features.rows() - 1;
  return {std::move(unary), SliceStack(steps, model.num_classes), TransitionMask::monotone(model.num_classes)};
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const TwoStreamModel& m = ckpt.model;
  ordered_json j;
  j["num_classes"] = m.num_classes;
  j["feature_dim"] = m.feature_dim;
  j["unary_weight"] = matrix_to_json(m.unary_weight);
  j["unary_bias"] = m.unary_bias;
  j["transition_weight"] = matrix_to_json(m.transition_weight);
  j["transition_bias"] = m.transition_bias;
  j["smooth_at_decode"] = ckpt.smooth_at_decode;
  return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("checkpoint is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("checkpoint must be a JSON object");
  for (const char* key : {"num_classes", "feature_dim", "unary_weight", "unary_bias", "transition_weight",
                          "transition_bias", "smooth_at_decode"}) {
    if (!j.contains(key)) throw DataError(std::string("checkpoint is missing field '") + key + "'");
  }
  if (!j["num_classes"].is_number_unsigned() || !j["feature_dim"].is_number_unsigned()) {
    throw DataError("checkpoint num_classes and feature_dim must be positive integers");
  }
  if (!j["smooth_at_decode"].is_boolean()) throw DataError("checkpoint field 'smooth_at_decode' must be a boolean");
  Checkpoint ckpt;
  TwoStreamModel& m = ckpt.model;
  m.num_classes = j["num_classes"].get<std::size_t>();
  m.feature_dim = j["feature_dim"].get<std::size_t>();
  m.unary_weight = matrix_from_json(j["unary_weight"], m.num_classes, m.feature_dim, "unary_weight");
  m.unary_bias = vector_from_json(j["unary_bias"], m.num_classes, "unary_bias");
  m.transition_weight = matrix_from_json(j["transition_weight"], 2, 2 * m.feature_dim, "transition_weight");
  m.transition_bias = vector_from_json(j["transition_bias"], 2, "transition_bias");
  ckpt.smooth_at_decode = j["smooth_at_decode"].get<bool>();
  try {
    m.validate();
  } catch (const InvalidInput& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << checkpoint_to_json(ckpt);
  if (!out) throw DataError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return checkpoint_from_json(buf.str());
}

}  // namespace monostage
