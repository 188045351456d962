#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "a2mae/config.hpp"

using namespace a2mae;
using namespace a2mae::config;
namespace fs = std::filesystem;

namespace {

std::string error_of(const json& j) {
  try {
    run_from_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

RunConfig random_run(Rng& rng) {
  RunConfig c;
  c.generator.common_size = 16 * (1 + rng.uniform_index(4));
  c.generator.field_size = c.generator.common_size + 8 * rng.uniform_index(3);
  c.generator.n_classes = 1 + rng.uniform_index(6);
  c.generator.texture_amplitude = rng.uniform(0.0, 2.0);
  c.generator.hub_spread_deg = rng.uniform(0.01, 1.0);
  c.generator.seed = rng.next_u64();

  auto& t = c.train;
  t.epochs = 1 + rng.uniform_index(30);
  t.curriculum = train::TrainConfig::default_curriculum(t.epochs);
  t.batch_size = 1 + rng.uniform_index(64);
  t.base_lr = rng.uniform(1e-5, 1e-2);
  t.warmup_steps = rng.uniform_index(50);
  t.weight_decay = rng.uniform(0.0, 0.1);
  t.mask_ratio = 0.6 + 0.15 * static_cast<double>(rng.uniform_index(3));
  t.mask_strategy = static_cast<masking::Strategy>(rng.uniform_index(3));
  t.model.geo_mode = static_cast<model::GeoMode>(rng.uniform_index(4));
  t.model.reference_gsd_m = rng.uniform(0.5, 30.0);
  t.model.depth = 1 + rng.uniform_index(4);
  t.seed = rng.next_u64();

  c.pruning.k = 1 + rng.uniform_index(40);
  c.pruning.keep_frac = rng.uniform(0.01, 1.0);
  c.pruning.region_cell_deg = rng.uniform(0.1, 5.0);
  c.pruning.reserve_only = rng.uniform01() < 0.5;
  return c;
}

}  // namespace

TEST_CASE("empty documents give the documented defaults") {
  const auto c = run_from_json(json::object());
  CHECK(c.train == train::TrainConfig{});
  CHECK(c.train.epochs == 20);
  CHECK(c.train.batch_size == 16);
  CHECK(c.train.mask_ratio == 0.75);
  CHECK(c.train.model.patch_size == 8);
  CHECK(c.train.model.embed_dim == 64);
  CHECK(c.pruning.k == 20);
  CHECK(c.pruning.keep_frac == 0.10);
  CHECK(c.pruning.region_cell_deg == 1.0);
  CHECK(to_json(c.generator) == to_json(data::GeneratorConfig{}));
}

TEST_CASE("round trip through JSON") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto c = random_run(rng);
    const json j = to_json(c);
    const auto back = run_from_json(json::parse(j.dump()));
    CHECK(back.train == c.train);
    CHECK(to_json(back.generator) == j.at("generator"));
    CHECK(to_json(back.pruning) == j.at("pruning"));
    CHECK(to_json(back) == j);
  }
}

TEST_CASE("partial documents override only what they name") {
  const auto c = run_from_json(json::parse(R"({"train": {"epochs": 10, "model": {"geo_mode": "full_gem"}}})"));
  CHECK(c.train.epochs == 10);
  CHECK(c.train.curriculum == train::TrainConfig::default_curriculum(10));
  CHECK(c.train.model.geo_mode == model::GeoMode::FullGem);
  CHECK(c.train.model.embed_dim == 64);
  CHECK(c.train.base_lr == train::TrainConfig{}.base_lr);
}

TEST_CASE("unknown keys name their path") {
  CHECK(error_of(json::parse(R"({"trian": {}})")) == "unknown key 'config.trian'");
  CHECK(error_of(json::parse(R"({"train": {"lr": 1}})")) == "unknown key 'train.lr'");
  CHECK(error_of(json::parse(R"({"train": {"model": {"dim": 3}}})")) == "unknown key 'train.model.dim'");
  CHECK(error_of(json::parse(R"({"pruning": {"cells": 3}})")) == "unknown key 'pruning.cells'");
  CHECK(error_of(json::parse(R"({"generator": {"size": 3}})")) == "unknown key 'generator.size'");
  CHECK(error_of(json::parse(
            R"({"train": {"epochs": 2, "curriculum": [{"name": "a", "kinds": ["gfs2"], "epochs": 2, "mix": 1}]}})")) ==
        "unknown key 'train.curriculum[0].mix'");
}

TEST_CASE("bad values are config errors") {
  CHECK(error_of(json::parse(R"({"train": {"batch_size": "big"}})")).find("train.batch_size") != std::string::npos);
  CHECK(error_of(json::parse(R"({"train": {"mask_strategy": "block"}})")).find("train.mask_strategy") !=
        std::string::npos);
  CHECK(error_of(json::parse(R"({"train": {"model": {"geo_mode": "gps"}}})")).find("train.model.geo_mode") !=
        std::string::npos);
  CHECK_FALSE(error_of(json::parse(R"({"train": {"mask_ratio": 1.5}})")).empty());
  CHECK_FALSE(error_of(json::parse(R"({"pruning": {"keep_frac": 0}})")).empty());
  CHECK_FALSE(error_of(json::parse(R"({"train": {"epochs": 5, "curriculum": [{"name": "a", "kinds": ["gfs2"], "epochs": 4}]}})")).empty());
  CHECK_FALSE(error_of(json::parse(R"({"train": {"model": {"heads": 3}}})")).empty());
  CHECK_FALSE(error_of(json::parse("[1, 2]")).empty());
}

TEST_CASE("load_run_config") {
  const auto dir = fs::temp_directory_path() / "a2mae_config_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Rng rng(2);
  const auto c = random_run(rng);
  {
    std::ofstream os(dir / "run.json");
    os << to_json(c).dump(2);
  }
  CHECK(load_run_config(dir / "run.json").train == c.train);
  {
    std::ofstream os(dir / "broken.json");
    os << "{\"train\": ";
  }
  CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
  CHECK_THROWS_AS(load_run_config(dir / "absent.json"), ConfigError);
  fs::remove_all(dir);
}
