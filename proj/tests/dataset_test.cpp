#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "monostage/dataset.hpp"
#include "monostage/decode.hpp"
#include "monostage/errors.hpp"

namespace monostage {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "monostage_dataset_test";
  fs::create_directories(dir);
  return dir / name;
}

SynthConfig small_config() {
  SynthConfig c;
  c.num_videos = 10;
  c.num_classes = 5;
  c.feature_dim = 4;
  c.mean_length = 40;
  c.seed = 3;
  return c;
}

TEST(Generate, LabelsStartAtOneAndStepByAtMostOne) {
  const auto data = generate(SynthConfig::human());
  ASSERT_EQ(data.size(), 100u);
  for (const auto& seq : data) {
    ASSERT_GE(seq.length(), 11u);
    EXPECT_EQ(seq.labels.front(), 1);
    for (std::size_t t = 1; t < seq.length(); ++t) {
      const int step = seq.labels[t] - seq.labels[t - 1];
      EXPECT_TRUE(step == 0 || step == 1) << seq.id;
    }
    EXPECT_LE(seq.labels.back(), 11);
    EXPECT_EQ(seq.features.rows(), seq.length());
    EXPECT_EQ(seq.features.cols(), 16u);
  }
}

TEST(Generate, Deterministic) {
  EXPECT_EQ(generate(small_config()), generate(small_config()));
  auto other = small_config();
  other.seed = 4;
  EXPECT_NE(generate(small_config()), generate(other));
}

TEST(Generate, NoiselessIsSeparableByNearestEmbedding) {
  auto cfg = small_config();
  cfg.noise_sigma = 0.0;
  cfg.confusion_rate = 0.0;
  const auto data = generate(cfg);
  const Matrix emb = stage_embeddings(cfg);
  std::size_t correct = 0, total = 0;
  for (const auto& seq : data) {
    for (std::size_t t = 0; t < seq.length(); ++t) {
      std::size_t best = 0;
      double best_d = 1e300;
      for (std::size_t s = 0; s < cfg.num_classes; ++s) {
        double d = 0.0;
        for (std::size_t k = 0; k < cfg.feature_dim; ++k) {
          const double diff = seq.features(t, k) - emb(s, k);
          d += diff * diff;
        }
        if (d < best_d) {
          best_d = d;
          best = s;
        }
      }
      correct += static_cast<int>(best) + 1 == seq.labels[t];
      ++total;
    }
  }
  EXPECT_EQ(correct, total);
}

TEST(Generate, MousePresetMedianLength) {
  auto cfg = SynthConfig::mouse();
  cfg.seed = 1;
  const auto data = generate(cfg);
  std::vector<std::size_t> lengths;
  for (const auto& seq : data) lengths.push_back(seq.length());
  std::sort(lengths.begin(), lengths.end());
  const double median = 0.5 * static_cast<double>(lengths[49] + lengths[50]);
  EXPECT_NEAR(median, 314.0, 31.4);
}

TEST(Generate, HumanPresetIsSkewed) {
  const auto data = generate(SynthConfig::human());
  std::vector<std::size_t> counts(12, 0);
  std::size_t total = 0;
  for (const auto& seq : data) {
    for (int y : seq.labels) {
      ++counts[static_cast<std::size_t>(y)];
      ++total;
    }
  }
  std::sort(counts.rbegin(), counts.rend());
  EXPECT_GT(static_cast<double>(counts[0] + counts[1]) / static_cast<double>(total), 0.35);
}

TEST(Generate, RejectsInfeasibleConfig) {
  auto cfg = small_config();
  cfg.mean_length = 3;
  EXPECT_THROW(generate(cfg), InvalidInput);
  cfg = small_config();
  cfg.confusion_rate = 1.0;
  EXPECT_THROW(generate(cfg), InvalidInput);
  cfg = small_config();
  cfg.num_videos = 0;
  EXPECT_THROW(generate(cfg), InvalidInput);
}

TEST(Split, EightyTenTen) {
  auto cfg = small_config();
  cfg.num_videos = 100;
  const auto data = generate(cfg);
  const auto ids = split_ids(data, {}, 9);
  EXPECT_EQ(ids.train.size(), 80u);
  EXPECT_EQ(ids.val.size(), 10u);
  EXPECT_EQ(ids.test.size(), 10u);
  std::set<std::string> all;
  for (const auto* part : {&ids.train, &ids.val, &ids.test}) all.insert(part->begin(), part->end());
  EXPECT_EQ(all.size(), 100u);
  EXPECT_EQ(split_ids(data, {}, 9), ids);
  EXPECT_NE(split_ids(data, {}, 10), ids);
}

TEST(Split, TooFewVideos) {
  auto cfg = small_config();
  cfg.num_videos = 3;
  EXPECT_THROW(split_ids(generate(cfg), {}, 1), InvalidInput);
  EXPECT_THROW(split_ids(generate(cfg), {0.5, 0.5, 0.5}, 1), InvalidInput);
}

TEST(DatasetFile, EmptyFileIsEmptyDataset) {
  const auto path = scratch("empty.jsonl");
  std::ofstream(path).close();
  EXPECT_TRUE(load_dataset(path.string()).empty());
}

TEST(DatasetFile, RoundTripIsBitwise) {
  const auto data = generate(small_config());
  const auto path = scratch("round.jsonl");
  save_dataset(path.string(), data);
  const auto back = load_dataset(path.string());
  EXPECT_EQ(back, data);
  std::string first;
  for (const auto& s : data) first += sequence_to_jsonl(s) + "\n";
  std::string second;
  for (const auto& s : back) second += sequence_to_jsonl(s) + "\n";
  EXPECT_EQ(first, second);
}

TEST(DatasetFile, RecordFieldOrder) {
  StageSequence s{"a", Matrix(2, 1, 0.5), {1, 2}};
  EXPECT_EQ(sequence_to_jsonl(s), R"({"id":"a","labels":[1,2],"features":[[0.5],[0.5]]})");
}

TEST(DatasetFile, DecreasingLabelsNameTheVideo) {
  try {
    parse_dataset(R"({"id":"clip7","labels":[1,2,1],"features":[[0.0],[0.0],[0.0]]})");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("clip7"), std::string::npos);
  }
}

TEST(DatasetFile, MalformedRecordsNameLineAndField) {
  const std::string good = R"({"id":"a","labels":[1,1],"features":[[0.0],[1.0]]})";
  auto message = [](const std::string& text) {
    try {
      parse_dataset(text);
    } catch (const DataError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message(good + "\n{\"id\":\"b\",\"labels\":[1,\"x\"],\"features\":[[0.0],[1.0]]}").find("line 2: field 'labels'"),
            std::string::npos);
  EXPECT_NE(message(good + "\n" + R"({"id":"b","labels":[1,1],"features":[[0.0,2.0],[1.0,3.0]]})").find("field 'features'"),
            std::string::npos);
  EXPECT_NE(message("{\"labels\":[1]}").find("field 'id'"), std::string::npos);
  EXPECT_NE(message("not json").find("line 1"), std::string::npos);
}

TEST(SplitFile, RoundTrip) {
  SplitIds ids{{"a", "b"}, {"c"}, {"d"}};
  const auto path = scratch("splits.json");
  save_split_ids(path.string(), ids);
  EXPECT_EQ(load_split_ids(path.string()), ids);
}

TEST(Decode, ArgmaxTieAndModes) {
  Matrix scores(2, 3);
  scores(0, 1) = 0.5;
  scores(0, 2) = 0.5;
  EXPECT_EQ(argmax_labels(scores), (LabelSequence{2, 1}));
  EXPECT_EQ(parse_decode_mode("dp-unary"), DecodeMode::kDpUnary);
  EXPECT_FALSE(parse_decode_mode("viterbi").has_value());
  EXPECT_EQ(to_string(DecodeMode::kCrf), "crf");
}

}  // namespace
}  // namespace monostage
