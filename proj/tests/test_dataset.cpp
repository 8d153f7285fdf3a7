// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include "scengen/dataset.hpp"

using scengen::FarmMeta;
using scengen::ScenarioDataset;
using scengen::Terrain;

namespace {

std::string temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() / ("scengen_test_" + tag);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  out << content;
}

ScenarioDataset tiny_dataset(std::size_t n_samples = 4) {
  ScenarioDataset ds;
  ds.farms = {{"a", Terrain::kFlatland, 1.0}, {"b", Terrain::kForest, 1.0}};
  ds.horizon = 24;
  ds.resolution_hours = 1.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    std::vector<double> sample(2 * 24);
    for (std::size_t i = 0; i < sample.size(); ++i)
      sample[i] = static_cast<double>((s + i) % 10) / 10.0;
    ds.samples.push_back(std::move(sample));
  }
  return ds;
}

}  // namespace

TEST_CASE("load_csv reshapes complete days into P x H samples") {
  const std::string dir = temp_dir("load");
  std::string data = "timestamp,farm_id,power\n";
  for (int d = 1; d <= 3; ++d)
    for (int h = 0; h < 24; ++h)
      for (const char* farm : {"wf1", "wf2"}) {
        char row[96];
        std::snprintf(row, sizeof(row), "2017-03-%02dT%02d:00:00,%s,%d.5\n", d,
                      h, farm, h % 3);
        data += row;
      }
  write_file(dir + "/data.csv", data);
  write_file(dir + "/meta.csv",
             "farm_id,terrain,max_power\nwf1,flatland,10\nwf2,offshore,5\n");

  auto res = scengen::load_csv(dir + "/data.csv", dir + "/meta.csv");
  REQUIRE(res.dataset.size() == 3);
  REQUIRE(res.dataset.parks() == 2);
  REQUIRE(res.dataset.horizon == 24);
  REQUIRE(res.dataset.resolution_hours == 1.0);
  REQUIRE(res.dropped_days == 0);
  // normalization by max_power: farm wf2 reading 2.5 -> 0.5
  REQUIRE(res.dataset.at(0, 1, 2) == 0.5);
  // a reading equal to max_power must land exactly on 1.0
  write_file(dir + "/one.csv",
             "timestamp,farm_id,power\n2017-01-01T00:00:00,wf1,10\n"
             "2017-01-01T01:00:00,wf1,10\n");
  write_file(dir + "/meta1.csv", "farm_id,terrain,max_power\nwf1,flatland,10\n");
  auto one = scengen::load_csv(dir + "/one.csv", dir + "/meta1.csv");
  REQUIRE(one.dataset.at(0, 0, 0) == 1.0);
}

TEST_CASE("load_csv drops incomplete days and counts them") {
  const std::string dir = temp_dir("drop");
  std::string data = "timestamp,farm_id,power\n";
  for (int d = 1; d <= 3; ++d)
    for (int h = 0; h < 24; ++h) {
      if (d == 2 && h == 17) continue;  // 23 of 24 readings
      char row[96];
      std::snprintf(row, sizeof(row), "2017-06-%02dT%02d:00:00,wf1,1\n", d, h);
      data += row;
    }
  write_file(dir + "/data.csv", data);
  write_file(dir + "/meta.csv", "farm_id,terrain,max_power\nwf1,forest,2\n");
  auto res = scengen::load_csv(dir + "/data.csv", dir + "/meta.csv");
  REQUIRE(res.dataset.size() == 2);
  REQUIRE(res.dropped_days == 1);
}

TEST_CASE("load_csv reports malformed rows with their line number") {
  const std::string dir = temp_dir("bad");
  write_file(dir + "/data.csv",
             "timestamp,farm_id,power\n2017-01-01T00:00:00,wf1,oops\n");
  write_file(dir + "/meta.csv", "farm_id,terrain,max_power\nwf1,forest,2\n");
  REQUIRE_THROWS_WITH(scengen::load_csv(dir + "/data.csv", dir + "/meta.csv"),
                      Catch::Matchers::ContainsSubstring(":2"));

  write_file(dir + "/data2.csv",
             "timestamp,farm_id,power\n2017-01-01T00:00:00,ghost,1\n");
  REQUIRE_THROWS_WITH(scengen::load_csv(dir + "/data2.csv", dir + "/meta.csv"),
                      Catch::Matchers::ContainsSubstring("ghost"));
}

TEST_CASE("split partitions whole days 80/20") {
  ScenarioDataset ds = tiny_dataset(540);
  auto [train, test] = scengen::split(ds, 0.8, 7);
  REQUIRE(train.size() == 432);
  REQUIRE(test.size() == 108);
  REQUIRE(train.size() + test.size() == ds.size());
}

TEST_CASE("split is deterministic per seed and varies across seeds") {
  ScenarioDataset ds = tiny_dataset(10);
  auto [a_train, a_test] = scengen::split(ds, 0.8, 123);
  auto [b_train, b_test] = scengen::split(ds, 0.8, 123);
  REQUIRE(a_train.samples == b_train.samples);
  REQUIRE(a_test.samples == b_test.samples);
  REQUIRE(a_train.size() == 8);
  REQUIRE(a_test.size() == 2);

  // Different seeds keep the 8/2 sizes but (almost surely) pick different
  // membership; check that at least one of a few seeds differs.
  bool any_different = false;
  for (std::uint64_t seed : {9u, 10u, 11u, 12u}) {
    auto [c_train, c_test] = scengen::split(ds, 0.8, seed);
    REQUIRE(c_train.size() == 8);
    REQUIRE(c_test.size() == 2);
    if (c_test.samples != a_test.samples) any_different = true;
  }
  REQUIRE(any_different);
}

TEST_CASE("split is a partition: union preserves all samples, disjoint") {
  ScenarioDataset ds = tiny_dataset(25);
  // Tag each sample uniquely through its first value.
  for (std::size_t s = 0; s < ds.size(); ++s)
    ds.samples[s][0] = static_cast<double>(s) / 100.0;
  auto [train, test] = scengen::split(ds, 0.6, 99);
  std::multiset<double> seen;
  for (const auto& s : train.samples) seen.insert(s[0]);
  for (const auto& s : test.samples) seen.insert(s[0]);
  std::multiset<double> expect;
  for (const auto& s : ds.samples) expect.insert(s[0]);
  REQUIRE(seen == expect);
}

TEST_CASE("split rejects degenerate inputs") {
  ScenarioDataset ds = tiny_dataset(1);
  REQUIRE_THROWS_AS(scengen::split(ds, 0.8, 1), scengen::ConfigError);
  ScenarioDataset ok = tiny_dataset(5);
  REQUIRE_THROWS_AS(scengen::split(ok, 0.0, 1), scengen::ConfigError);
  REQUIRE_THROWS_AS(scengen::split(ok, 1.0, 1), scengen::ConfigError);
}

TEST_CASE("archive round-trips bit-exactly") {
  ScenarioDataset ds = tiny_dataset(6);
  ds.samples[2][5] = 0.12345678901234567;  // exercise full precision
  const std::string dir = temp_dir("archive");
  scengen::write_archive(ds, dir);
  ScenarioDataset back = scengen::read_archive(dir);
  REQUIRE(back.samples == ds.samples);
  REQUIRE(back.horizon == ds.horizon);
  REQUIRE(back.resolution_hours == ds.resolution_hours);
  REQUIRE(back.farms.size() == ds.farms.size());
  for (std::size_t i = 0; i < ds.farms.size(); ++i) {
    REQUIRE(back.farms[i].farm_id == ds.farms[i].farm_id);
    REQUIRE(back.farms[i].terrain == ds.farms[i].terrain);
    REQUIRE(back.farms[i].max_power == ds.farms[i].max_power);
  }
}

TEST_CASE("normalization is idempotent: unit max_power passes values through") {
  const std::string dir = temp_dir("idem");
  // values already in [0,1] with max_power 1: ingestion must not change them
  std::string data = "timestamp,farm_id,power\n";
  for (int h = 0; h < 24; ++h) {
    char row[80];
    std::snprintf(row, sizeof(row), "2019-05-01T%02d:00:00,wf,0.%02d\n", h, h);
    data += row;
  }
  data += "2019-05-02T00:00:00,wf,0.5\n";  // incomplete day, dropped
  write_file(dir + "/data.csv", data);
  write_file(dir + "/meta.csv", "farm_id,terrain,max_power\nwf,flatland,1\n");
  auto res = scengen::load_csv(dir + "/data.csv", dir + "/meta.csv");
  REQUIRE(res.dataset.size() == 1);
  for (int h = 0; h < 24; ++h)
    REQUIRE(res.dataset.at(0, 0, h) == h / 100.0);
}

TEST_CASE("dataset validation enforces the invariants") {
  ScenarioDataset ds = tiny_dataset(3);
  REQUIRE_NOTHROW(ds.validate());

  ScenarioDataset bad_range = ds;
  bad_range.samples[0][0] = 1.5;
  REQUIRE_THROWS_AS(bad_range.validate(), scengen::ConfigError);

  ScenarioDataset bad_shape = ds;
  bad_shape.samples[1].pop_back();
  REQUIRE_THROWS_AS(bad_shape.validate(), scengen::ConfigError);

  ScenarioDataset bad_res = ds;
  bad_res.resolution_hours = 2.0;  // 24 steps * 2h != 24h
  REQUIRE_THROWS_AS(bad_res.validate(), scengen::ConfigError);

  ScenarioDataset dup = ds;
  dup.farms[1].farm_id = dup.farms[0].farm_id;
  REQUIRE_THROWS_AS(dup.validate(), scengen::ConfigError);
}
