#include "monostage/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "monostage/errors.hpp"

namespace monostage {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * fraction);
  return buf;
}

std::string percent_pm(const MeanStd& v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.1f±%.1f", 100.0 * v.mean, 100.0 * v.stddev);
  return buf;
}

// Text width in code points, so "±" counts once.
std::size_t display_width(const std::string& s) {
  std::size_t n = 0;
  for (unsigned char ch : s) {
    if ((ch & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string render(const std::vector<std::vector<std::string>>& cells) {
  std::vector<std::size_t> width;
  for (const auto& row : cells) {
    if (row.size() > width.size()) width.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], display_width(row[i]));
  }
  std::ostringstream out;
  for (const auto& row : cells) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::size_t pad = width[i] - display_width(row[i]);
      if (i == 0) {
        out << row[i] << std::string(pad, ' ');
      } else {
        out << "  " << std::string(pad, ' ') << row[i];
      }
    }
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> header(int num_classes) {
  std::vector<std::string> h{"Method", "Global", "Per-Stage"};
  for (int s = 1; s <= num_classes; ++s) h.push_back(std::to_string(s));
  return h;
}

ordered_json mean_std_json(const MeanStd& v) { return {{"mean", v.mean}, {"std", v.stddev}, {"n", v.n}}; }

}  // namespace

EvalReport evaluate(const std::vector<LabelSequence>& predictions, const std::vector<LabelSequence>& golds,
                    const std::vector<std::string>& ids) {
  if (predictions.size() != golds.size()) {
    throw DataError("got " + std::to_string(predictions.size()) + " predictions for " +
                    std::to_string(golds.size()) + " videos");
  }
  EvalReport r;
  std::size_t hits = 0;
  for (std::size_t v = 0; v < golds.size(); ++v) {
    const std::string name = v < ids.size() ? ids[v] : "#" + std::to_string(v);
    if (predictions[v].size() != golds[v].size()) {
      throw DataError("video '" + name + "': prediction has " + std::to_string(predictions[v].size()) +
                      " frames, gold has " + std::to_string(golds[v].size()));
    }
    for (std::size_t t = 0; t < golds[v].size(); ++t) {
      const int y = golds[v][t];
      if (y < 1) throw DataError("video '" + name + "': gold label below 1");
      ++r.counts[y];
      ++r.frames;
      if (predictions[v][t] == y) {
        ++r.correct[y];
        ++hits;
      } else {
        r.correct.try_emplace(y, 0);
      }
    }
  }
  if (r.frames == 0) return r;
  r.global = static_cast<double>(hits) / static_cast<double>(r.frames);
  double sum = 0.0;
  for (const auto& [stage, n] : r.counts) {
    const double acc = static_cast<double>(r.correct[stage]) / static_cast<double>(n);
    r.per_stage[stage] = acc;
    sum += acc;
  }
  r.mean_per_stage = sum / static_cast<double>(r.per_stage.size());
  return r;
}

EvalReport evaluate(const std::vector<Prediction>& predictions, const Dataset& golds) {
  std::unordered_map<std::string, const Prediction*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) throw DataError("duplicate prediction for video '" + p.id + "'");
  }
  std::vector<LabelSequence> preds;
  std::vector<LabelSequence> gold;
  std::vector<std::string> ids;
  for (const auto& seq : golds) {
    auto it = by_id.find(seq.id);
    if (it == by_id.end()) throw DataError("no prediction for video '" + seq.id + "'");
    preds.push_back(it->second->labels);
    gold.push_back(seq.labels);
    ids.push_back(seq.id);
    by_id.erase(it);
  }
  if (!by_id.empty()) throw DataError("prediction for unknown video '" + by_id.begin()->first + "'");
  return evaluate(preds, gold, ids);
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  out.n = values.size();
  // Welford; identical inputs give exactly zero deviation.
  double m2 = 0.0;
  std::size_t k = 0;
  for (double v : values) {
    ++k;
    const double delta = v - out.mean;
    out.mean += delta / static_cast<double>(k);
    m2 += delta * (v - out.mean);
  }
  if (values.size() > 1) out.stddev = std::sqrt(m2 / static_cast<double>(values.size() - 1));
  return out;
}

AggregateReport aggregate_seeds(const std::vector<EvalReport>& reports) {
  AggregateReport agg;
  agg.runs = reports.size();
  std::vector<double> global;
  std::vector<double> mean;
  std::map<int, std::vector<double>> stages;
  for (const auto& r : reports) {
    global.push_back(r.global);
    mean.push_back(r.mean_per_stage);
    for (const auto& [s, acc] : r.per_stage) stages[s].push_back(acc);
  }
  agg.global = mean_std(global);
  agg.mean_per_stage = mean_std(mean);
  for (const auto& [s, values] : stages) agg.per_stage[s] = mean_std(values);
  return agg;
}

std::string report_to_json(const EvalReport& report) {
  ordered_json j;
  j["global"] = report.global;
  ordered_json stages = ordered_json::object();
  for (const auto& [s, acc] : report.per_stage) stages[std::to_string(s)] = acc;
  j["per_stage"] = std::move(stages);
  j["mean_per_stage"] = report.mean_per_stage;
  ordered_json counts = ordered_json::object();
  for (const auto& [s, n] : report.counts) counts[std::to_string(s)] = n;
  j["counts"] = std::move(counts);
  return j.dump(2) + "\n";
}

std::string aggregate_to_json(const AggregateReport& agg) {
  ordered_json j;
  j["runs"] = agg.runs;
  j["global"] = mean_std_json(agg.global);
  j["mean_per_stage"] = mean_std_json(agg.mean_per_stage);
  ordered_json stages = ordered_json::object();
  for (const auto& [s, v] : agg.per_stage) stages[std::to_string(s)] = mean_std_json(v);
  j["per_stage"] = std::move(stages);
  return j.dump(2) + "\n";
}

std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows, int num_classes) {
  std::vector<std::vector<std::string>> cells{header(num_classes)};
  for (const auto& [name, r] : rows) {
    std::vector<std::string> line{name, percent(r.global), percent(r.mean_per_stage)};
    for (int s = 1; s <= num_classes; ++s) {
      auto it = r.per_stage.find(s);
      line.push_back(it == r.per_stage.end() ? "-" : percent(it->second));
    }
    cells.push_back(std::move(line));
  }
  return render(cells);
}

std::string format_aggregate_table(const std::vector<std::pair<std::string, AggregateReport>>& rows,
                                   int num_classes) {
  std::vector<std::vector<std::string>> cells{header(num_classes)};
  for (const auto& [name, a] : rows) {
    std::vector<std::string> line{name, percent_pm(a.global), percent_pm(a.mean_per_stage)};
    for (int s = 1; s <= num_classes; ++s) {
      auto it = a.per_stage.find(s);
      line.push_back(it == a.per_stage.end() ? "-" : percent(it->second.mean));
    }
    cells.push_back(std::move(line));
  }
  return render(cells);
}

void save_predictions(const std::string& path, const std::vector<Prediction>& preds) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path + " for writing");
  for (const auto& p : preds) {
    ordered_json j;
    j["id"] = p.id;
    j["pred"] = p.labels;
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

std::vector<Prediction> load_predictions(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open predictions " + path);
  std::vector<Prediction> preds;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + " line " + std::to_string(line_no);
    ordered_json j;
    try {
      j = ordered_json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + ": not valid JSON");
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string()) {
      throw DataError(where + ": field 'id' missing or not a string");
    }
    if (!j.contains("pred") || !j["pred"].is_array()) throw DataError(where + ": field 'pred' missing or not an array");
    Prediction p;
    p.id = j["id"].get<std::string>();
    for (const auto& v : j["pred"]) {
      if (!v.is_number_integer()) throw DataError(where + ": field 'pred' entries must be integers");
      p.labels.push_back(v.get<int>());
    }
    preds.push_back(std::move(p));
  }
  return preds;
}

}  // namespace monostage
