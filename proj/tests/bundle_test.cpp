#include <gtest/gtest.h>

#include "flowcast/bundle.hpp"
#include "flowcast/commands.hpp"
#include "synthetic.hpp"
#include "food_log_fixture.hpp"

using namespace flowcast;

namespace {

ModelBundle food_bundle() {
  ModelBundle b;
  b.schema = food_log::schema();
  b.mode = FeatureMode::both(2);
  b.clusters = food_log::clusters();
  b.network = GruNetwork::initialized(8, 5, 3, 1);
  b.metadata = {7, "0123456789abcdef", "2024-01-01T00:00:00.000Z", "food_log"};
  return b;
}

}  // namespace

TEST(Bundle, RoundTripIsExact) {
  auto b = food_bundle();
  auto bytes = serialize_bundle(b);
  auto back = deserialize_bundle(bytes);
  EXPECT_EQ(back, b);
  EXPECT_EQ(serialize_bundle(back), bytes);
}

TEST(Bundle, RoundTripWithoutClusters) {
  auto b = food_bundle();
  b.mode = FeatureMode::raw();
  b.clusters.reset();
  b.network = GruNetwork::initialized(6, 4, 3, 2);
  EXPECT_EQ(deserialize_bundle(serialize_bundle(b)), b);
}

TEST(Bundle, LayoutStartsWithMagicAndVersion) {
  auto bytes = serialize_bundle(food_bundle());
  EXPECT_EQ(std::string(bytes.data(), 8), "FLOWCAST");
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[9], 0);
}

TEST(Bundle, CorruptionIsDetected) {
  auto bytes = serialize_bundle(food_bundle());
  for (std::size_t pos : {std::size_t{3}, bytes.size() / 2, bytes.size() - 9}) {
    auto bad = bytes;
    bad[pos] ^= 0x10;
    try {
      deserialize_bundle(bad);
      FAIL() << "corruption at " << pos << " not detected";
    } catch (const BundleError& e) {
      EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
    }
  }
  bytes.resize(10);
  EXPECT_THROW(deserialize_bundle(bytes), BundleError);
}

TEST(Bundle, InconsistentShapesRejected) {
  auto b = food_bundle();
  b.network = GruNetwork::initialized(7, 5, 3, 1);
  EXPECT_THROW(b.check_consistency(), BundleError);
  EXPECT_THROW(serialize_bundle(b), BundleError);
}

TEST(Bundle, TrainedModelPredictsLikeTheOriginal) {
  ExperimentConfig cfg;
  cfg.dataset = "signal.csv";
  cfg.features = {"Clust4"};
  cfg.iterations = 3;
  cfg.total_epochs = 2;
  cfg.batch_size = 32;
  cfg.hidden_dim = 8;
  auto log = synthetic::signal_log(40, 3);
  auto bundle = train_bundle(cfg, log);
  auto back = deserialize_bundle(serialize_bundle(bundle));
  std::ostringstream a, b;
  write_predictions(a, bundle, log);
  write_predictions(b, back, log);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_TRUE(config_matches(back, cfg));
}
