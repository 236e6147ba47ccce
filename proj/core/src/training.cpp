#include "monostage/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "json.hpp"
#include "monostage/errors.hpp"
#include "monostage/metrics.hpp"

namespace monostage {

namespace {

std::array<std::span<double>, 4> parameters(TwoStreamModel& m) {
  return {m.unary_weight.values(), std::span<double>(m.unary_bias), m.transition_weight.values(),
          std::span<double>(m.transition_bias)};
}

std::array<std::span<const double>, 4> parameters(const TwoStreamModel& m) {
  return {m.unary_weight.values(), std::span<const double>(m.unary_bias), m.transition_weight.values(),
          std::span<const double>(m.transition_bias)};
}

void add_scaled(TwoStreamModel& acc, const TwoStreamModel& g, double scale) {
  auto dst = parameters(acc);
  auto src = parameters(g);
  for (std::size_t p = 0; p < dst.size(); ++p) {
    for (std::size_t i = 0; i < dst[p].size(); ++i) dst[p][i] += scale * src[p][i];
  }
}

// Backprop through a softmax row: dz = p * (dp - <p, dp>).
void softmax_backward(std::span<const double> prob, std::span<double> grad) {
  double dot = 0.0;
  for (std::size_t i = 0; i < prob.size(); ++i) dot += prob[i] * grad[i];
  for (std::size_t i = 0; i < prob.size(); ++i) grad[i] = prob[i] * (grad[i] - dot);
}

std::uint64_t next_below(std::mt19937_64& rng, std::uint64_t bound) { return rng() % bound; }

std::mt19937_64 training_rng(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7a11u};
  return std::mt19937_64(seq);
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInput("learning rate must be a finite value >= 0");
  }
  if (batch_size < 1) throw InvalidInput("batch size must be >= 1");
  if (frames_per_video < 2) throw InvalidInput("frames per video must be >= 2");
  if (!(weights.nll >= 0 && weights.image >= 0 && weights.transition >= 0)) {
    throw InvalidInput("loss weights must be >= 0");
  }
  if (!(feature_jitter >= 0.0)) throw InvalidInput("feature jitter must be >= 0");
}

double image_loss(const Matrix& unary, const LabelSequence& gold) {
  if (unary.rows() != gold.size() || gold.empty()) throw InvalidInput("image loss: unary rows must match labels");
  double sum = 0.0;
  for (std::size_t t = 0; t < gold.size(); ++t) {
    if (gold[t] < 1 || static_cast<std::size_t>(gold[t]) > unary.cols()) {
      throw InvalidInput("image loss: label out of range");
    }
    sum -= std::log(std::max(unary(t, static_cast<std::size_t>(gold[t] - 1)), kLogFloor));
  }
  return sum / static_cast<double>(gold.size());
}

double transition_loss(const Matrix& rho, const LabelSequence& gold) {
  if (gold.size() < 2 || rho.rows() + 1 != gold.size() || rho.cols() != 2) {
    throw InvalidInput("transition loss: need T-1 rows of two probabilities");
  }
  double sum = 0.0;
  for (std::size_t t = 0; t + 1 < gold.size(); ++t) {
    const std::size_t k = gold[t + 1] != gold[t] ? 1 : 0;
    sum -= std::log(std::max(rho(t, k), kLogFloor));
  }
  return sum / static_cast<double>(rho.rows());
}

LossAndGradient total_loss(const Matrix& features, const LabelSequence& gold, const TwoStreamModel& model,
                           const LossWeights& weights) {
  const std::size_t T = features.rows();
  const std::size_t C = model.num_classes;
  const std::size_t D = model.feature_dim;
  if (gold.size() != T) throw InvalidInput("labels and features disagree on sequence length");
  if (T < 2) throw InvalidInput("training sequences need at least two frames");

  const Matrix unary = unary_potentials(features, model);
  const Matrix rho = transition_probs(features, model);
  PairwiseBlock block = assemble_pairwise(rho, C);
  const PotentialTable pot{unary, std::move(block.pairwise), std::move(block.mask)};

  const double inv_t = 1.0 / static_cast<double>(T);
  const double inv_steps = 1.0 / static_cast<double>(T - 1);

  LossAndGradient out;
  out.loss.nll = nll(pot, gold) * inv_t;
  out.loss.image = image_loss(unary, gold);
  out.loss.transition = transition_loss(rho, gold);
  out.loss.total =
      weights.nll * out.loss.nll + weights.image * out.loss.image + weights.transition * out.loss.transition;

  // Gradients with respect to the head outputs.
  Matrix d_unary(T, C);
  Matrix d_rho(T - 1, 2);
  if (weights.nll != 0.0) {
    const PotentialGradient g = nll_gradient(pot, gold);
    const double scale = weights.nll * inv_t;
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t c = 0; c < C; ++c) d_unary(t, c) += scale * g.unary(t, c);
    }
    for (std::size_t t = 0; t + 1 < T; ++t) {
      double stay = 0.0;
      double jump = 0.0;
      for (std::size_t i = 0; i < C; ++i) {
        stay += g.pairwise(t, i, i);
        for (std::size_t j = i + 1; j < C; ++j) jump += g.pairwise(t, i, j);
      }
      d_rho(t, 0) += scale * stay;
      d_rho(t, 1) += scale * jump;
    }
  }
  if (weights.image != 0.0) {
    for (std::size_t t = 0; t < T; ++t) {
      const auto y = static_cast<std::size_t>(gold[t] - 1);
      if (unary(t, y) > kLogFloor) d_unary(t, y) -= weights.image * inv_t / unary(t, y);
    }
  }
  if (weights.transition != 0.0) {
    for (std::size_t t = 0; t + 1 < T; ++t) {
      const std::size_t k = gold[t + 1] != gold[t] ? 1 : 0;
      if (rho(t, k) > kLogFloor) d_rho(t, k) -= weights.transition * inv_steps / rho(t, k);
    }
  }

  out.gradient = TwoStreamModel::zeros(C, D);
  TwoStreamModel& g = out.gradient;
  for (std::size_t t = 0; t < T; ++t) {
    softmax_backward(unary.row(t), d_unary.row(t));
    auto f = features.row(t);
    for (std::size_t c = 0; c < C; ++c) {
      const double dz = d_unary(t, c);
      g.unary_bias[c] += dz;
      for (std::size_t d = 0; d < D; ++d) g.unary_weight(c, d) += dz * f[d];
    }
  }
  for (std::size_t t = 0; t + 1 < T; ++t) {
    softmax_backward(rho.row(t), d_rho.row(t));
    auto prev = features.row(t);
    auto cur = features.row(t + 1);
    for (std::size_t k = 0; k < 2; ++k) {
      const double dz = d_rho(t, k);
      g.transition_bias[k] += dz;
      for (std::size_t d = 0; d < D; ++d) {
        g.transition_weight(k, d) += dz * prev[d];
        g.transition_weight(k, D + d) += dz * cur[d];
      }
    }
  }
  return out;
}

StageSequence subsample_frames(const StageSequence& seq, std::size_t frames, std::mt19937_64& rng) {
  const std::size_t T = seq.length();
  const std::size_t keep = std::min(frames, T);
  std::vector<std::size_t> pool(T);
  std::iota(pool.begin(), pool.end(), 0);
  // Partial Fisher-Yates: the first `keep` slots are a uniform draw without
  // replacement.
  for (std::size_t i = 0; i < keep; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(next_below(rng, T - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(keep);
  std::sort(pool.begin(), pool.end());

  StageSequence out;
  out.id = seq.id;
  out.features = Matrix(keep, seq.features.cols());
  out.labels.resize(keep);
  for (std::size_t k = 0; k < keep; ++k) {
    out.labels[k] = seq.labels[pool[k]];
    auto src = seq.features.row(pool[k]);
    std::copy(src.begin(), src.end(), out.features.row(k).begin());
  }
  return out;
}

Dataset sample_batch(const Dataset& data, const TrainConfig& config, std::mt19937_64& rng) {
  if (data.empty()) throw InvalidInput("cannot sample a batch from an empty dataset");
  const std::size_t n = data.size();
  const std::size_t take = std::min(config.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < take; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(next_below(rng, n - i));
    std::swap(order[i], order[j]);
  }
  Dataset batch;
  batch.reserve(take);
  std::normal_distribution<double> jitter(0.0, 1.0);
  for (std::size_t i = 0; i < take; ++i) {
    StageSequence s = subsample_frames(data[order[i]], config.frames_per_video, rng);
    if (config.feature_jitter > 0.0) {
      for (double& v : s.features.values()) v += config.feature_jitter * jitter(rng);
    }
    batch.push_back(std::move(s));
  }
  return batch;
}

void adam_step(TrainState& state, const TwoStreamModel& gradient, double learning_rate, const AdamConfig& adam) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(adam.beta1, t);
  const double correction2 = 1.0 - std::pow(adam.beta2, t);
  auto theta = parameters(state.model);
  auto m = parameters(state.first_moment);
  auto v = parameters(state.second_moment);
  auto g = parameters(gradient);
  for (std::size_t p = 0; p < theta.size(); ++p) {
    for (std::size_t i = 0; i < theta[p].size(); ++i) {
      m[p][i] = adam.beta1 * m[p][i] + (1.0 - adam.beta1) * g[p][i];
      v[p][i] = adam.beta2 * v[p][i] + (1.0 - adam.beta2) * g[p][i] * g[p][i];
      const double m_hat = m[p][i] / correction1;
      const double v_hat = v[p][i] / correction2;
      theta[p][i] -= learning_rate * m_hat / (std::sqrt(v_hat) + adam.epsilon);
    }
  }
}

std::string epoch_record_to_json(const EpochRecord& rec) {
  nlohmann::ordered_json j;
  j["epoch"] = rec.epoch;
  j["train_nll"] = rec.train_nll;
  j["train_L_I"] = rec.train_image;
  j["train_L_M"] = rec.train_transition;
  j["val_global"] = rec.val_global;
  j["val_mean_per_stage"] = rec.val_mean_per_stage;
  return j.dump();
}

LossBreakdown dataset_loss(const Dataset& data, const TwoStreamModel& model, const LossWeights& weights) {
  LossBreakdown sum;
  if (data.empty()) return sum;
  for (const auto& seq : data) {
    const LossAndGradient lg = total_loss(seq.features, seq.labels, model, weights);
    sum.total += lg.loss.total;
    sum.nll += lg.loss.nll;
    sum.image += lg.loss.image;
    sum.transition += lg.loss.transition;
  }
  const double n = static_cast<double>(data.size());
  return {sum.total / n, sum.nll / n, sum.image / n, sum.transition / n};
}

FitResult fit(const Dataset& train, const Dataset& val, const TrainConfig& config) {
  config.validate();
  if (train.empty()) throw InvalidInput("training split is empty");
  std::size_t classes = config.num_classes;
  if (classes == 0) classes = static_cast<std::size_t>(std::max(max_label(train), max_label(val)));
  return fit(train, val, config, TwoStreamModel::initialize(classes, train.front().features.cols(), config.seed));
}

FitResult fit(const Dataset& train, const Dataset& val, const TrainConfig& config, TwoStreamModel init) {
  config.validate();
  init.validate();
  if (train.empty()) throw InvalidInput("training split is empty");
  for (const Dataset* part : {&train, &val}) {
    for (const auto& seq : *part) {
      validate_sequence(seq);
      if (seq.features.cols() != init.feature_dim) {
        throw InvalidInput("sequence '" + seq.id + "' feature dimension does not match the model");
      }
      if (static_cast<std::size_t>(seq.labels.back()) > init.num_classes) {
        throw InvalidInput("sequence '" + seq.id + "' has labels above the model's class count");
      }
    }
  }

  FitResult result;
  TrainState& state = result.state;
  const std::size_t C = init.num_classes;
  const std::size_t D = init.feature_dim;
  state.model = std::move(init);
  state.first_moment = TwoStreamModel::zeros(C, D);
  state.second_moment = TwoStreamModel::zeros(C, D);
  state.rng = training_rng(config.seed);

  result.best_model = state.model;
  double best_val = -1.0;
  std::size_t since_best = 0;
  const std::size_t batches = (train.size() + config.batch_size - 1) / config.batch_size;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t b = 0; b < batches; ++b) {
      const Dataset batch = sample_batch(train, config, state.rng);
      TwoStreamModel grad = TwoStreamModel::zeros(C, D);
      const double scale = 1.0 / static_cast<double>(batch.size());
      for (const auto& seq : batch) {
        LossAndGradient lg;
        try {
          lg = total_loss(seq.features, seq.labels, state.model, config.weights);
        } catch (const InvalidInput& e) {
          // Inputs were validated above, so this is a blown-up parameter.
          throw NumericError("training diverged on sequence '" + seq.id + "' in epoch " + std::to_string(epoch) +
                             ": " + e.what());
        }
        if (!std::isfinite(lg.loss.total)) {
          throw NumericError("non-finite training loss on sequence '" + seq.id + "' in epoch " +
                             std::to_string(epoch));
        }
        add_scaled(grad, lg.gradient, scale);
      }
      adam_step(state, grad, config.learning_rate);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    const LossBreakdown train_loss = dataset_loss(train, state.model, config.weights);
    if (!std::isfinite(train_loss.total)) {
      throw NumericError("non-finite training loss after epoch " + std::to_string(epoch));
    }
    rec.train_nll = train_loss.nll;
    rec.train_image = train_loss.image;
    rec.train_transition = train_loss.transition;
    if (!val.empty()) {
      const EvalReport report =
          evaluate(decode_dataset(val, state.model, config.val_mode, config.val_smooth), val);
      rec.val_global = report.global;
      rec.val_mean_per_stage = report.mean_per_stage;
    }
    result.log.push_back(rec);

    if (val.empty()) {
      result.best_model = state.model;
      result.best_epoch = epoch;
      continue;
    }
    if (rec.val_global > best_val) {
      best_val = rec.val_global;
      result.best_model = state.model;
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  return result;
}

}  // namespace monostage
