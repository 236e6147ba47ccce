#include "monostage/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "monostage/errors.hpp"

namespace monostage {

namespace {

using ordered_json = nlohmann::ordered_json;

// Stream ids for derived generators, so embeddings and each video draw from
// independent sequences that depend only on (seed, stream).
constexpr std::uint64_t kEmbeddingStream = 0xe3b0c442ULL;
constexpr std::uint64_t kSplitStream = 0x5b1170ULL;

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

[[noreturn]] void fail_line(std::size_t line, const std::string& field, const std::string& what) {
  throw DataError("line " + std::to_string(line) + ": field '" + field + "': " + what);
}

}  // namespace

void validate_sequence(const StageSequence& seq) {
  const std::string who = "sequence '" + seq.id + "'";
  if (seq.labels.size() < 2) throw InvalidInput(who + " has fewer than 2 frames");
  if (seq.features.rows() != seq.labels.size()) {
    throw InvalidInput(who + " has " + std::to_string(seq.features.rows()) + " feature rows but " +
                       std::to_string(seq.labels.size()) + " labels");
  }
  for (std::size_t t = 0; t < seq.labels.size(); ++t) {
    if (seq.labels[t] < 1) throw InvalidInput(who + " has label below 1 at frame " + std::to_string(t));
    if (t > 0 && seq.labels[t] < seq.labels[t - 1]) {
      throw InvalidInput(who + " has decreasing labels at frame " + std::to_string(t));
    }
  }
}

int max_label(const Dataset& data) {
  int top = 0;
  for (const auto& seq : data) {
    for (int y : seq.labels) top = std::max(top, y);
  }
  return top;
}

SynthConfig SynthConfig::human() { return SynthConfig{}; }

SynthConfig SynthConfig::mouse() {
  SynthConfig c;
  c.num_classes = 8;
  c.mean_length = 314.0;
  return c;
}

void SynthConfig::validate() const {
  if (num_videos == 0) throw InvalidInput("synthetic dataset needs at least one video");
  if (num_classes < 2) throw InvalidInput("synthetic dataset needs C >= 2");
  if (feature_dim < 1) throw InvalidInput("synthetic dataset needs D >= 1");
  if (!(mean_length >= static_cast<double>(num_classes))) {
    throw InvalidInput("mean_length must be at least the number of stages");
  }
  if (!(length_spread >= 0.0)) throw InvalidInput("length_spread must be >= 0");
  if (!(dwell_decay > 0.0)) throw InvalidInput("dwell_decay must be > 0");
  if (!(noise_sigma >= 0.0)) throw InvalidInput("noise sigma must be >= 0");
  if (!(noise_correlation >= 0.0 && noise_correlation < 1.0)) {
    throw InvalidInput("noise correlation must be in [0, 1)");
  }
  if (!(progress_step >= 0.0)) throw InvalidInput("progress step must be >= 0");
  if (!(confusion_rate >= 0.0 && confusion_rate < 1.0)) throw InvalidInput("confusion rate must be in [0, 1)");
}

Matrix stage_embeddings(const SynthConfig& config) {
  auto rng = derived_rng(config.seed, kEmbeddingStream);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix emb(config.num_classes, config.feature_dim);
  for (std::size_t s = 0; s < config.num_classes; ++s) {
    auto row = emb.row(s);
    double norm = 0.0;
    for (double& v : row) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (double& v : row) v /= norm;
  }
  std::vector<double> dir(config.feature_dim);
  double norm = 0.0;
  for (double& v : dir) {
    v = normal(rng);
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (std::size_t s = 0; s < config.num_classes; ++s) {
    for (std::size_t d = 0; d < config.feature_dim; ++d) {
      emb(s, d) += config.progress_step * static_cast<double>(s) * dir[d] / norm;
    }
  }
  return emb;
}

Dataset generate(const SynthConfig& config) {
  config.validate();
  const Matrix emb = stage_embeddings(config);
  const std::size_t C = config.num_classes;
  const std::size_t D = config.feature_dim;

  std::vector<double> share(C);
  for (std::size_t s = 0; s < C; ++s) share[s] = std::pow(config.dwell_decay, static_cast<double>(s));
  const double share_total = std::accumulate(share.begin(), share.end(), 0.0);

  Dataset data;
  data.reserve(config.num_videos);
  for (std::size_t v = 0; v < config.num_videos; ++v) {
    auto rng = derived_rng(config.seed, v);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const double drawn = config.mean_length * (1.0 + config.length_spread * normal(rng));
    const auto length = static_cast<std::size_t>(std::max(static_cast<double>(C), std::round(drawn)));

    LabelSequence labels;
    labels.reserve(length);
    for (std::size_t s = 0; s < C && labels.size() < length; ++s) {
      const double mean_dwell = static_cast<double>(length) * share[s] / share_total;
      std::size_t dwell = 1;
      if (mean_dwell > 1.0) {
        std::geometric_distribution<std::size_t> extra(1.0 / mean_dwell);
        dwell += extra(rng);
      }
      dwell = std::min(dwell, length - labels.size());
      labels.insert(labels.end(), dwell, static_cast<int>(s) + 1);
    }
    // The last reached stage persists to the end of the recording.
    labels.resize(length, labels.back());

    StageSequence seq;
    seq.id = "video_" + std::to_string(v);
    seq.features = Matrix(length, D);
    const double keep = config.noise_correlation;
    const double fresh = std::sqrt(1.0 - keep * keep);
    std::vector<double> noise(D);
    for (double& n : noise) n = config.noise_sigma * normal(rng);
    for (std::size_t t = 0; t < length; ++t) {
      std::size_t source = static_cast<std::size_t>(labels[t] - 1);
      const double u = unit(rng);
      const bool go_up = unit(rng) < 0.5;
      if (u < config.confusion_rate) {
        if (source == 0) {
          source = 1;
        } else if (source == C - 1) {
          source = C - 2;
        } else {
          source = go_up ? source + 1 : source - 1;
        }
      }
      for (std::size_t d = 0; d < D; ++d) {
        if (t > 0) noise[d] = keep * noise[d] + fresh * config.noise_sigma * normal(rng);
        seq.features(t, d) = emb(source, d) + noise[d];
      }
    }
    seq.labels = std::move(labels);
    data.push_back(std::move(seq));
  }
  return data;
}

SplitIds split_ids(const Dataset& data, SplitFractions fractions, std::uint64_t seed) {
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw InvalidInput("split fractions must be non-negative and sum to 1");
  }
  const std::size_t n = data.size();
  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.val));
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * fractions.test));
  if (n_val + n_test > n || (fractions.train > 0 && n_val + n_test == n) || (fractions.val > 0 && n_val == 0) ||
      (fractions.test > 0 && n_test == 0)) {
    throw InvalidInput("too few videos (" + std::to_string(n) + ") for non-empty splits");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = derived_rng(seed, kSplitStream);
  // Fisher-Yates with explicit draws; std::shuffle's algorithm is unspecified.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  SplitIds ids;
  const std::size_t n_train = n - n_val - n_test;
  for (std::size_t k = 0; k < n; ++k) {
    const std::string& id = data[order[k]].id;
    if (k < n_train) {
      ids.train.push_back(id);
    } else if (k < n_train + n_val) {
      ids.val.push_back(id);
    } else {
      ids.test.push_back(id);
    }
  }
  return ids;
}

Split apply_split(const Dataset& data, const SplitIds& ids) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < data.size(); ++i) index.emplace(data[i].id, i);
  auto pick = [&](const std::vector<std::string>& names) {
    Dataset out;
    for (const auto& name : names) {
      auto it = index.find(name);
      if (it == index.end()) throw DataError("split refers to unknown video id '" + name + "'");
      out.push_back(data[it->second]);
    }
    return out;
  };
  return {pick(ids.train), pick(ids.val), pick(ids.test)};
}

Split split(const Dataset& data, SplitFractions fractions, std::uint64_t seed) {
  return apply_split(data, split_ids(data, fractions, seed));
}

std::string sequence_to_jsonl(const StageSequence& seq) {
  ordered_json j;
  j["id"] = seq.id;
  j["labels"] = seq.labels;
  ordered_json rows = ordered_json::array();
  for (std::size_t t = 0; t < seq.features.rows(); ++t) {
    rows.push_back(std::vector<double>(seq.features.row(t).begin(), seq.features.row(t).end()));
  }
  j["features"] = std::move(rows);
  return j.dump();
}

void save_dataset(const std::string& path, const Dataset& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const auto& seq : data) out << sequence_to_jsonl(seq) << '\n';
  if (!out) throw DataError("failed writing " + path);
}

Dataset parse_dataset(const std::string& text) {
  Dataset data;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::size_t dim = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("line " + std::to_string(line_no) + ": not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw DataError("line " + std::to_string(line_no) + ": record must be a JSON object");

    StageSequence seq;
    if (!j.contains("id") || !j["id"].is_string()) fail_line(line_no, "id", "missing or not a string");
    seq.id = j["id"].get<std::string>();

    if (!j.contains("labels") || !j["labels"].is_array()) fail_line(line_no, "labels", "missing or not an array");
    for (const auto& v : j["labels"]) {
      if (!v.is_number_integer()) fail_line(line_no, "labels", "entries must be integers");
      seq.labels.push_back(v.get<int>());
    }

    if (!j.contains("features") || !j["features"].is_array()) {
      fail_line(line_no, "features", "missing or not an array");
    }
    const auto& rows = j["features"];
    if (rows.size() != seq.labels.size()) {
      fail_line(line_no, "features", "has " + std::to_string(rows.size()) + " rows for " +
                                         std::to_string(seq.labels.size()) + " labels");
    }
    if (!rows.empty()) {
      if (!rows[0].is_array() || rows[0].empty()) fail_line(line_no, "features", "rows must be non-empty arrays");
      if (dim == 0) dim = rows[0].size();
      seq.features = Matrix(rows.size(), dim);
      for (std::size_t t = 0; t < rows.size(); ++t) {
        if (!rows[t].is_array() || rows[t].size() != dim) {
          fail_line(line_no, "features", "row " + std::to_string(t) + " must have " + std::to_string(dim) + " values");
        }
        for (std::size_t d = 0; d < dim; ++d) {
          if (!rows[t][d].is_number()) fail_line(line_no, "features", "non-numeric value in row " + std::to_string(t));
          seq.features(t, d) = rows[t][d].get<double>();
        }
      }
    }

    try {
      validate_sequence(seq);
    } catch (const InvalidInput& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
    data.push_back(std::move(seq));
  }
  return data;
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

void save_split_ids(const std::string& path, const SplitIds& ids) {
  ordered_json j;
  j["train"] = ids.train;
  j["val"] = ids.val;
  j["test"] = ids.test;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  out << j.dump(2) << '\n';
}

SplitIds load_split_ids(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open split file " + path);
  ordered_json j;
  try {
    j = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("split file " + path + " is not valid JSON: " + e.what());
  }
  SplitIds ids;
  auto read = [&](const char* key, std::vector<std::string>& dst) {
    if (!j.contains(key) || !j[key].is_array()) throw DataError(std::string("split file lacks '") + key + "' list");
    for (const auto& v : j[key]) {
      if (!v.is_string()) throw DataError(std::string("split file '") + key + "' has a non-string id");
      dst.push_back(v.get<std::string>());
    }
  };
  read("train", ids.train);
  read("val", ids.val);
  read("test", ids.test);
  return ids;
}

}  // namespace monostage
