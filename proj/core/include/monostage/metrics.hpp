#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "monostage/crf.hpp"
#include "monostage/dataset.hpp"

namespace monostage {

/// Accuracy summary over a set of videos. Stages that never occur in the gold
/// labels are absent from per_stage and excluded from mean_per_stage.
struct EvalReport {
  double global = 0.0;
  std::map<int, double> per_stage;
  double mean_per_stage = 0.0;
  std::map<int, std::size_t> counts;   // gold frames per stage
  std::map<int, std::size_t> correct;  // correctly predicted frames per stage
  std::size_t frames = 0;
};

struct Prediction {
  std::string id;
  LabelSequence labels;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

/// Position-aligned comparison. ids, when given, are only used in error
/// messages.
EvalReport evaluate(const std::vector<LabelSequence>& predictions, const std::vector<LabelSequence>& golds,
                    const std::vector<std::string>& ids = {});

/// Matches predictions to gold videos by id. Every gold video needs a
/// prediction; unknown or missing ids throw DataError.
EvalReport evaluate(const std::vector<Prediction>& predictions, const Dataset& golds);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

struct AggregateReport {
  MeanStd global;
  MeanStd mean_per_stage;
  std::map<int, MeanStd> per_stage;  // over the reports that contain the stage
  std::size_t runs = 0;
};

/// Sample mean and n-1 standard deviation (0 for a single value).
MeanStd mean_std(const std::vector<double>& values);

AggregateReport aggregate_seeds(const std::vector<EvalReport>& reports);

/// Structured form: global, per_stage, mean_per_stage, counts.
std::string report_to_json(const EvalReport& report);
std::string aggregate_to_json(const AggregateReport& agg);

/// Aligned text table in percent: Method | Global | Per-Stage | 1..C.
/// Stages missing from a row print as "-".
std::string format_table(const std::vector<std::pair<std::string, EvalReport>>& rows, int num_classes);
std::string format_aggregate_table(const std::vector<std::pair<std::string, AggregateReport>>& rows,
                                   int num_classes);

void save_predictions(const std::string& path, const std::vector<Prediction>& preds);
std::vector<Prediction> load_predictions(const std::string& path);

}  // namespace monostage
