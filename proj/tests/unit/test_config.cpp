#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "latent_steer/config.hpp"
#include "latent_steer/errors.hpp"

using namespace latent_steer;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "latent_steer_config_test";
  fs::create_directories(dir);
  const fs::path p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::string config_error(const ConfigSources& src) {
  try {
    load_config(src);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Config, PaperProfileIsTableOne) {
  const fs::path empty = write_file("empty.json", "{}");
  const RunConfig c = load_config({.profile = std::string("paper"), .file = empty});
  EXPECT_EQ(c.env.rewards.r, 2.0);
  EXPECT_EQ(c.env.rewards.n, 25.0);
  EXPECT_EQ(c.env.episode_length, 60);
  EXPECT_EQ(c.env.rewards.P1, 750.0);
  EXPECT_EQ(c.env.rewards.P2, 900.0);
  EXPECT_EQ(c.env.T, 0.3);
  EXPECT_EQ(c.env.typical.epsilon, 3.0);
  EXPECT_EQ(c.env.d(), 512);
  EXPECT_EQ(c.env.buckets.width, 5.0);
  EXPECT_EQ(c.env.rewards.m, 2.0);
  EXPECT_EQ(c.env.buckets.count(), 8);
  EXPECT_EQ(c.oracle.kind, "remote");
  EXPECT_EQ(c.train.total_steps, 1000000);
  EXPECT_EQ(c.profile, "paper");
}

TEST(Config, DeskProfile) {
  const RunConfig c = load_config({.profile = std::string("desk")});
  EXPECT_EQ(c.env.d(), 16);
  EXPECT_EQ(c.env.typical.epsilon, 1.5);
  EXPECT_EQ(c.env.buckets.count(), 4);
  EXPECT_EQ(c.oracle.gamma, 0.75);
  EXPECT_LT(c.env.rewards.P1, c.env.rewards.P2);
  const Runtime rt = build_runtime(c);
  EXPECT_NEAR(rt.env.k_hyp.values().dot(rt.synthetic->k_age.values()), 0.8, 1e-12);
}

TEST(Config, ShippedProfileFilesMatchBuiltins) {
  for (const std::string& name : builtin_profiles()) {
    std::ifstream in(fs::path(LATENT_STEER_SOURCE_DIR) / "profiles" / (name + ".json"));
    ASSERT_TRUE(in) << name;
    EXPECT_EQ(json::parse(in), builtin_profile(name)) << name;
  }
  EXPECT_THROW(builtin_profile("laptop"), ConfigError);
}

TEST(Config, OverrideRecordedInSnapshot) {
  const RunConfig c = load_config({.profile = std::string("desk"), .overrides = {"env.T=0.5"}});
  EXPECT_EQ(c.env.T, 0.5);
  EXPECT_EQ(config_to_json(c)["env"]["T"], 0.5);
}

TEST(Config, ThreeLayerPrecedence) {
  // profile sets horizon 64 and lr 1e-3; the file overrides both; the command line overrides one
  const fs::path f = write_file("layers.json", R"({"train": {"horizon": 32, "learning_rate": 0.002, "epochs": 3}})");
  const RunConfig c = load_config({.profile = std::string("desk"), .file = f, .overrides = {"train.horizon=16"}});
  EXPECT_EQ(c.train.horizon, 16);
  EXPECT_EQ(c.train.learning_rate, 0.002);
  EXPECT_EQ(c.train.epochs, 3);
  EXPECT_EQ(c.train.total_steps, 200000);  // from the profile
  EXPECT_EQ(c.train.gamma, 0.99);          // from the defaults
}

TEST(Config, SeedEnvBetweenFileAndOverrides) {
  const fs::path f = write_file("seed.json", R"({"train": {"seed": 5}})");
  EXPECT_EQ(load_config({.file = f}).train.seed, 5u);
  EXPECT_EQ(load_config({.file = f, .seed_env = "9"}).train.seed, 9u);
  EXPECT_EQ(load_config({.file = f, .overrides = {"train.seed=11"}, .seed_env = "9"}).train.seed, 11u);
  EXPECT_NE(config_error({.seed_env = "nine"}).find("LATENT_STEER_SEED"), std::string::npos);
}

TEST(Config, FileNamesItsProfile) {
  const fs::path f = write_file("named.json", R"({"profile": "desk", "train": {"seed": 3}})");
  const RunConfig c = load_config({.file = f});
  EXPECT_EQ(c.env.d(), 16);
  EXPECT_EQ(c.train.seed, 3u);
}

TEST(Config, P1NotBelowP2Rejected) {
  const fs::path f = write_file("bad_p.json", R"({"env": {"rewards": {"P1": 900, "P2": 750}}})");
  EXPECT_NE(config_error({.profile = std::string("paper"), .file = f}).find("P1 < P2"), std::string::npos);
}

TEST(Config, EveryOffendingKeyListed) {
  const fs::path f = write_file("bad_keys.json",
                                R"({"env": {"dd": 3, "T": 2.0}, "trian": {}, "train": {"gamma": "x"}})");
  const std::string msg = config_error({.file = f});
  EXPECT_NE(msg.find("env.dd"), std::string::npos) << msg;
  EXPECT_NE(msg.find("trian"), std::string::npos) << msg;
  EXPECT_NE(msg.find("train.gamma"), std::string::npos) << msg;
  EXPECT_NE(msg.find("env.T"), std::string::npos) << msg;
  EXPECT_NE(config_error({.overrides = {"train.nope=1"}}).find("train.nope"), std::string::npos);
}

TEST(Config, MissingAndMalformedFiles) {
  const std::string missing = config_error({.file = fs::path("/nonexistent/cfg.json")});
  EXPECT_NE(missing.find("/nonexistent/cfg.json"), std::string::npos);
  const fs::path f = write_file("broken.json", "{ nope");
  EXPECT_FALSE(config_error({.file = f}).empty());
  const fs::path v = write_file("version.json", R"({"config_version": 2})");
  EXPECT_NE(config_error({.file = v}).find("config_version"), std::string::npos);
}

TEST(Config, SnapshotRoundTripsAndHashes) {
  const RunConfig c = load_config({.profile = std::string("desk"), .overrides = {"train.seed=4"}});
  const json snap = config_to_json(c);
  const RunConfig back = config_from_json(snap);
  EXPECT_EQ(config_to_json(back), snap);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_NE(config_hash(load_config({.profile = std::string("desk")})), config_hash(c));
}

TEST(Config, DefaultTreeDefinesKeys) {
  const json d = default_config_json();
  EXPECT_EQ(d["config_version"], kConfigVersion);
  EXPECT_TRUE(d["train"]["learning_rate"].is_null());
  EXPECT_EQ(load_config({}).train.learning_rate, 3e-4);
  EXPECT_EQ(load_config({.overrides = {"train.algo=\"a2c\""}}).train.learning_rate, 7e-4);
  EXPECT_EQ(load_config({.overrides = {"train.algo=a2c"}}).train.entropy_coef, 0.01);
}

TEST(Config, ExplicitHyperplane) {
  const RunConfig c =
      load_config({.profile = std::string("desk"),
                   .overrides = {"env.k_hyp=[2,0,0,0,0,0,0,0,0,0,0,0,0,0,0,0]"}});
  const Runtime rt = build_runtime(c);
  EXPECT_EQ(rt.env.k_hyp.values(), Vector::Unit(16, 0));
  EXPECT_FALSE(config_error({.profile = std::string("desk"), .overrides = {"env.k_hyp=[1,2]"}}).empty());
}

TEST(Config, RemoteNeedsHyperplane) {
  const RunConfig c = load_config({.profile = std::string("paper")});
  EXPECT_THROW(build_runtime(c), ConfigError);
}

namespace {

// Keys of the default tree and of the published schema must coincide at every level.
void expect_same_keys(const json& tree, const json& schema, const std::string& path) {
  const json& props = schema.at("properties");
  EXPECT_FALSE(schema.value("additionalProperties", true)) << path;
  for (const auto& [k, v] : tree.items()) {
    ASSERT_TRUE(props.contains(k)) << path + k << " missing from schema";
    if (v.is_object()) expect_same_keys(v, props.at(k), path + k + ".");
  }
  for (const auto& [k, v] : props.items()) EXPECT_TRUE(tree.contains(k)) << path + k << " only in schema";
}

}  // namespace

TEST(Config, PublishedSchemaMatchesAcceptedKeys) {
  std::ifstream in(fs::path(LATENT_STEER_SOURCE_DIR) / "docs" / "config.schema.json");
  ASSERT_TRUE(in.good());
  expect_same_keys(default_config_json(), json::parse(in), "");
}
