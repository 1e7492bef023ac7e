#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "flowcast/config.hpp"

using namespace flowcast;

TEST(Config, DefaultsFromMinimalJson) {
  auto c = parse_config(R"({"dataset": "log.xes"})");
  EXPECT_EQ(c.dataset, "log.xes");
  EXPECT_EQ(c.folds, 3u);
  EXPECT_EQ(c.iterations, 100u);
  EXPECT_EQ(c.total_epochs, 10u);
  EXPECT_EQ(c.batch_size, 256u);
  EXPECT_EQ(c.hidden_dim, 256u);
  EXPECT_DOUBLE_EQ(c.learning_rate, 0.01);
  EXPECT_DOUBLE_EQ(c.train_fraction, 0.75);
  EXPECT_EQ(c.max_case_len, 100u);
  EXPECT_EQ(c.max_train_prefixes, 75000u);
  EXPECT_EQ(c.max_validation_prefixes, 25000u);
  EXPECT_EQ(c.validation_sample, 10000u);
  EXPECT_EQ(c.max_test_traces, 100000u);
  EXPECT_FALSE(c.format);
}

TEST(Config, AllFields) {
  auto c = parse_config(R"({"dataset": "a.csv", "format": "csv", "features": ["None", "Clust"],
      "max_clusters": [20, 80], "folds": 5, "hidden_dim": 32, "seed": 9, "learning_rate": 0.001})");
  EXPECT_EQ(c.format, LogFormat::Csv);
  EXPECT_EQ(c.modes().size(), 3u);
  EXPECT_EQ(c.folds, 5u);
  EXPECT_EQ(c.hidden_dim, 32u);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(parse_config(config_to_json(c).dump()).modes(), c.modes());
}

TEST(Config, SyntaxErrorCarriesLocation) {
  try {
    parse_config("{\n  \"dataset\": \"x\",\n  \"folds\": ]\n}");
    FAIL() << "expected ConfigSyntaxError";
  } catch (const ConfigSyntaxError& e) {
    EXPECT_EQ(e.line, 3u);
    EXPECT_EQ(e.column, 12u);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(Config, RejectsBadValues) {
  EXPECT_THROW(parse_config(R"({"folds": 3})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dataset": "x", "folds": 0})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dataset": "x", "folds": -2})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dataset": "x", "folds": "three"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dataset": "x", "hiden_dim": 8})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dataset": "x", "features": ["Embedding"]})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dataset": "x", "format": "parquet"})"), ConfigError);
  EXPECT_THROW(parse_config(R"({"dataset": "x", "train_fraction": 1.0})"), ConfigError);
  EXPECT_THROW(parse_config(R"([1, 2])"), ConfigError);
}

TEST(Config, HashTracksEveryField) {
  auto a = parse_config(R"({"dataset": "x"})");
  auto b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.hidden_dim = 64;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, RelativeDatasetResolvedAgainstConfigDirectory) {
  auto dir = std::filesystem::temp_directory_path() / "flowcast_config_test";
  std::filesystem::create_directories(dir / "sub");
  auto path = dir / "sub" / "run.json";
  std::ofstream(path) << R"({"dataset": "../logs/a.csv"})";
  EXPECT_EQ(load_config(path.string()).dataset, (dir / "logs" / "a.csv").lexically_normal().string());
  std::filesystem::remove_all(dir);
}
