#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>

#include "cli/commands.hpp"
#include "cli/config.hpp"
#include "osda/errors.hpp"
#include "osda/rng.hpp"
#include "support/testing.hpp"

namespace osda::cli {
namespace {

using osda::testing::code_of;

TEST(Config, SetsTypedValues) {
  PipelineConfig cfg;
  set_key(cfg, "proto.tau", "0.05");
  set_key(cfg, "proto.scheme", "mls");
  set_key(cfg, "distill.head", "mlp1");
  set_key(cfg, "kmeans.normalize", "true");
  set_key(cfg, "synth.n_per_class", "40");
  EXPECT_EQ(cfg.proto.tau, 0.05);
  EXPECT_EQ(cfg.proto.scheme, WeightScheme::Mls);
  EXPECT_EQ(cfg.head, HeadKind::Mlp1);
  EXPECT_TRUE(cfg.kmeans.normalize);
  EXPECT_EQ(cfg.synth.n_per_class, 40);
}

TEST(Config, MalformedValuesAreBadValue) {
  PipelineConfig cfg;
  EXPECT_EQ(code_of([&] { set_key(cfg, "proto.tau", "abc"); }), Errc::BadValue);
  EXPECT_EQ(code_of([&] { set_key(cfg, "proto.tau", "-1"); }), Errc::BadValue);
  EXPECT_EQ(code_of([&] { set_key(cfg, "proto.k", "2.5"); }), Errc::BadValue);
  EXPECT_EQ(code_of([&] { set_key(cfg, "distill.momentum", "1"); }), Errc::BadValue);
  EXPECT_EQ(code_of([&] { set_key(cfg, "distill.loss", "huber"); }), Errc::BadValue);
  EXPECT_EQ(cfg.proto.tau, 0.07);
}

TEST(Config, UnknownKeysAreRejected) {
  PipelineConfig cfg;
  EXPECT_EQ(code_of([&] { set_key(cfg, "proto.temperature", "0.1"); }), Errc::UnknownKey);
  const auto keys = known_keys();
  EXPECT_TRUE(std::is_sorted(keys.begin(), keys.end()));
  EXPECT_NE(std::find(keys.begin(), keys.end(), "proto.tau"), keys.end());
}

TEST(Config, TextSkipsCommentsAndBlankLines) {
  PipelineConfig cfg;
  apply_config_text(cfg, "# header\n\nseed = 12\nproto.k=8  # trailing\n");
  EXPECT_EQ(cfg.seed, 12u);
  EXPECT_EQ(cfg.proto.k, 8);
  EXPECT_TRUE(cfg.is_set("seed"));
  EXPECT_TRUE(cfg.is_set("proto.k"));
  EXPECT_FALSE(cfg.is_set("proto.tau"));
}

TEST(Config, LinesWithoutAnEqualsSignAreRejected) {
  PipelineConfig cfg;
  EXPECT_EQ(code_of([&] { apply_config_text(cfg, "proto.k 8\n"); }), Errc::BadValue);
}

TEST(Config, FileRoundTrip) {
  osda::testing::TempDir dir;
  std::ofstream(dir / "run.cfg") << "distill.epochs=7\ndistill.loss=ce\n";
  const auto cfg = parse_config(dir / "run.cfg");
  EXPECT_EQ(cfg.distill.epochs, 7);
  EXPECT_EQ(cfg.distill.loss, DistillLoss::Ce);
  EXPECT_EQ(code_of([&] { parse_config(dir / "missing.cfg"); }), Errc::IoError);
}

TEST(StageSeed, FlagThenExplicitKeyThenDerived) {
  PipelineConfig cfg;
  cfg.seed = 4;
  EXPECT_EQ(stage_seed(cfg, "synth", std::nullopt), derive_seed(4, "synth"));
  EXPECT_EQ(stage_seed(cfg, "distill", std::nullopt), derive_seed(4, "distill"));
  set_key(cfg, "synth.seed", "99");
  EXPECT_EQ(stage_seed(cfg, "synth", std::nullopt), 99u);
  EXPECT_EQ(stage_seed(cfg, "synth", 5), 5u);
  EXPECT_NE(derive_seed(4, "synth"), derive_seed(4, "distill"));
}

}  // namespace
}  // namespace osda::cli
