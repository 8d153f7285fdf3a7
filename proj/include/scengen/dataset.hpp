// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "scengen/common.hpp"
#include "scengen/rng.hpp"

namespace scengen {

enum class Terrain { kFlatland, kForest, kOffshore, kSolar };

inline const char* terrain_name(Terrain t) {
  switch (t) {
    case Terrain::kFlatland: return "flatland";
    case Terrain::kForest: return "forest";
    case Terrain::kOffshore: return "offshore";
    case Terrain::kSolar: return "solar";
  }
  return "?";
}

inline Terrain terrain_from_name(const std::string& s) {
  if (s == "flatland") return Terrain::kFlatland;
  if (s == "forest") return Terrain::kForest;
  if (s == "offshore") return Terrain::kOffshore;
  if (s == "solar") return Terrain::kSolar;
  throw ConfigError("unknown terrain '" + s +
                    "' (expected flatland|forest|offshore|solar)");
}

struct FarmMeta {
  std::string farm_id;
  Terrain terrain = Terrain::kFlatland;
  double max_power = 1.0;  // normalization divisor in raw units
};

/// A set of day-shaped scenarios: each sample is a parks x horizon matrix of
/// normalized power in [0,1], row-major by park.
struct ScenarioDataset {
  std::vector<std::vector<double>> samples;
  std::vector<FarmMeta> farms;
  int horizon = 0;
  double resolution_hours = 1.0;

  int parks() const { return static_cast<int>(farms.size()); }
  std::size_t size() const { return samples.size(); }

  double at(std::size_t sample, int park, int step) const {
    return samples[sample][static_cast<std::size_t>(park) * horizon + step];
  }

  void validate() const {
    if (farms.empty()) throw ConfigError("dataset has no farms");
    if (horizon <= 0) throw ConfigError("dataset horizon must be positive");
    if (std::fabs(horizon * resolution_hours - 24.0) > 1e-9)
      throw ConfigError("horizon * resolution_hours must equal 24, got " +
                        std::to_string(horizon * resolution_hours));
    const std::size_t expect =
        static_cast<std::size_t>(parks()) * static_cast<std::size_t>(horizon);
    for (std::size_t s = 0; s < samples.size(); ++s) {
      if (samples[s].size() != expect)
        throw ConfigError("sample " + std::to_string(s) + " has " +
                          std::to_string(samples[s].size()) +
                          " values, expected " + std::to_string(expect));
      for (double v : samples[s])
        if (!(v >= 0.0 && v <= 1.0))
          throw ConfigError("sample " + std::to_string(s) +
                            " holds out-of-range power " + std::to_string(v));
    }
    for (std::size_t i = 0; i < farms.size(); ++i) {
      if (farms[i].max_power <= 0.0)
        throw ConfigError("farm " + farms[i].farm_id +
                          " has non-positive max_power");
      for (std::size_t j = i + 1; j < farms.size(); ++j)
        if (farms[i].farm_id == farms[j].farm_id)
          throw ConfigError("duplicate farm_id " + farms[i].farm_id);
    }
  }

  /// All values of the given parks pooled into one flat vector.
  std::vector<double> pooled_values(const std::vector<int>& park_indices) const {
    std::vector<double> out;
    out.reserve(samples.size() * park_indices.size() *
                static_cast<std::size_t>(horizon));
    for (const auto& s : samples)
      for (int p : park_indices)
        for (int h = 0; h < horizon; ++h)
          out.push_back(s[static_cast<std::size_t>(p) * horizon + h]);
    return out;
  }

  std::vector<double> pooled_values() const {
    std::vector<int> all(farms.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    return pooled_values(all);
  }

  std::vector<int> parks_of_terrain(Terrain t) const {
    std::vector<int> idx;
    for (std::size_t i = 0; i < farms.size(); ++i)
      if (farms[i].terrain == t) idx.push_back(static_cast<int>(i));
    return idx;
  }
};

/// Random whole-day partition into train/test. Reproducible per seed; both
/// halves keep the original day order.
inline std::pair<ScenarioDataset, ScenarioDataset> split(
    const ScenarioDataset& ds, double train_fraction, std::uint64_t seed) {
  if (ds.samples.size() < 2)
    throw ConfigError("split requires at least 2 samples, got " +
                      std::to_string(ds.samples.size()));
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError("train fraction must lie in (0,1), got " +
                      std::to_string(train_fraction));
  const std::size_t n = ds.samples.size();
  std::size_t n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  shuffle(idx, rng);
  std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());

  ScenarioDataset train, test;
  train.farms = test.farms = ds.farms;
  train.horizon = test.horizon = ds.horizon;
  train.resolution_hours = test.resolution_hours = ds.resolution_hours;
  for (std::size_t i = 0; i < n; ++i)
    (i < n_train ? train : test).samples.push_back(ds.samples[idx[i]]);
  return {std::move(train), std::move(test)};
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw IoError(where + ": cannot parse number '" + s + "'");
  }
}

}  // namespace detail

/// Writes sample rows in the archive format. An optional comment line tags
/// where the samples came from; readers skip '#' lines.
inline void write_samples_csv(const ScenarioDataset& ds,
                              const std::string& path,
                              const std::string& source_tag = "") {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  if (!source_tag.empty()) out << "# source: " << source_tag << '\n';
  out << "day_index,farm_id,step,power_normalized\n";
  for (std::size_t d = 0; d < ds.samples.size(); ++d)
    for (int p = 0; p < ds.parks(); ++p)
      for (int h = 0; h < ds.horizon; ++h)
        out << d << ',' << ds.farms[static_cast<std::size_t>(p)].farm_id << ','
            << h << ',' << detail::format_double(ds.at(d, p, h)) << '\n';
}

/// Writes `meta.csv` and `samples.csv` into `dir`. Values round-trip
/// bit-exactly through read_archive.
inline void write_archive(const ScenarioDataset& ds, const std::string& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  std::ofstream meta(dir + "/meta.csv");
  if (!meta) throw IoError("cannot write " + dir + "/meta.csv");
  meta << "farm_id,terrain,max_power\n";
  for (const auto& f : ds.farms)
    meta << f.farm_id << ',' << terrain_name(f.terrain) << ','
         << detail::format_double(f.max_power) << '\n';
  write_samples_csv(ds, dir + "/samples.csv");
}

inline std::vector<FarmMeta> read_meta_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) ||
      line.rfind("farm_id,terrain,max_power", 0) != 0)
    throw IoError(path + ": expected header farm_id,terrain,max_power");
  std::vector<FarmMeta> farms;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto f = detail::split_csv_line(line);
    if (f.size() != 3)
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": expected 3 fields, got " + std::to_string(f.size()));
    FarmMeta m;
    m.farm_id = f[0];
    m.terrain = terrain_from_name(f[1]);
    m.max_power = detail::parse_double(f[2], path + ":" + std::to_string(lineno));
    if (m.max_power <= 0.0)
      throw IoError(path + ":" + std::to_string(lineno) +
                    ": max_power must be positive");
    farms.push_back(std::move(m));
  }
  if (farms.empty()) throw IoError(path + ": no farms listed");
  return farms;
}

/// Reads a sample CSV against a known farm list (the archive's own meta or
/// the real dataset's farms when loading generated scenarios).
inline ScenarioDataset read_samples_csv(const std::string& path,
                                        const std::vector<FarmMeta>& farms) {
  ScenarioDataset ds;
  ds.farms = farms;
  std::map<std::string, int> farm_index;
  for (std::size_t i = 0; i < ds.farms.size(); ++i)
    farm_index[ds.farms[i].farm_id] = static_cast<int>(i);

  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  int lineno = 0;
  bool header_seen = false;
  // rows: (day, farm, step) -> value
  std::map<long, std::map<std::pair<int, int>, double>> days;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line.rfind("day_index,farm_id,step,power_normalized", 0) != 0)
        throw IoError(path + ": expected header "
                      "day_index,farm_id,step,power_normalized");
      header_seen = true;
      continue;
    }
    auto f = detail::split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (f.size() != 4)
      throw IoError(where + ": expected 4 fields, got " +
                    std::to_string(f.size()));
    const long day = static_cast<long>(detail::parse_double(f[0], where));
    auto it = farm_index.find(f[1]);
    if (it == farm_index.end())
      throw IoError(where + ": unknown farm_id '" + f[1] + "'");
    const int step = static_cast<int>(detail::parse_double(f[2], where));
    const double v = detail::parse_double(f[3], where);
    if (step < 0) throw IoError(where + ": negative step");
    if (!days[day].emplace(std::make_pair(it->second, step), v).second)
      throw IoError(where + ": duplicate reading for farm '" + f[1] +
                    "' step " + std::to_string(step));
  }
  if (days.empty()) throw ConfigError(path + ": no samples");

  // Horizon = 1 + max step index; every day must be complete.
  int horizon = 0;
  for (const auto& [day, grid] : days)
    for (const auto& [key, v] : grid)
      horizon = std::max(horizon, key.second + 1);
  ds.horizon = horizon;
  ds.resolution_hours = 24.0 / horizon;
  for (const auto& [day, grid] : days) {
    if (grid.size() != static_cast<std::size_t>(ds.parks()) *
                           static_cast<std::size_t>(horizon))
      throw IoError(path + ": day " + std::to_string(day) +
                    " is incomplete (" + std::to_string(grid.size()) + " of " +
                    std::to_string(ds.parks() * horizon) + " readings)");
    std::vector<double> sample(grid.size());
    for (const auto& [key, v] : grid)
      sample[static_cast<std::size_t>(key.first) * horizon + key.second] = v;
    ds.samples.push_back(std::move(sample));
  }
  ds.validate();
  return ds;
}

/// Reads a dataset archive (`meta.csv` + `samples.csv`) written by
/// write_archive or by the generate command.
inline ScenarioDataset read_archive(const std::string& dir) {
  return read_samples_csv(dir + "/samples.csv", read_meta_csv(dir + "/meta.csv"));
}

struct LoadResult {
  ScenarioDataset dataset;
  int dropped_days = 0;
};

/// Ingests a raw time-series CSV (`timestamp,farm_id,power`, ISO-8601
/// timestamps) plus a farm meta CSV, normalizes per farm by max_power, and
/// reshapes into complete P x H day samples. Days with any missing or extra
/// reading are dropped and counted.
inline LoadResult load_csv(const std::string& data_path,
                           const std::string& meta_path) {
  LoadResult result;
  ScenarioDataset& ds = result.dataset;
  ds.farms = read_meta_csv(meta_path);
  std::map<std::string, int> farm_index;
  for (std::size_t i = 0; i < ds.farms.size(); ++i)
    farm_index[ds.farms[i].farm_id] = static_cast<int>(i);

  std::ifstream in(data_path);
  if (!in) throw IoError("cannot open " + data_path);
  std::string line;
  int lineno = 1;
  if (!std::getline(in, line) || line.rfind("timestamp,farm_id,power", 0) != 0)
    throw IoError(data_path + ": expected header timestamp,farm_id,power");

  // day -> farm -> (time-of-day string -> normalized value)
  std::map<std::string, std::map<int, std::map<std::string, double>>> days;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    auto f = detail::split_csv_line(line);
    const std::string where = data_path + ":" + std::to_string(lineno);
    if (f.size() != 3)
      throw IoError(where + ": expected 3 fields, got " +
                    std::to_string(f.size()));
    const std::string& ts = f[0];
    // ISO-8601: date part is the first 10 chars, e.g. 2017-03-01T05:00:00.
    if (ts.size() < 13 || ts[4] != '-' || ts[7] != '-' ||
        (ts[10] != 'T' && ts[10] != ' '))
      throw IoError(where + ": malformed ISO-8601 timestamp '" + ts + "'");
    const std::string day = ts.substr(0, 10);
    const std::string tod = ts.substr(11);
    auto it = farm_index.find(f[1]);
    if (it == farm_index.end())
      throw IoError(where + ": unknown farm_id '" + f[1] + "'");
    const double raw = detail::parse_double(f[2], where);
    const double maxp = ds.farms[static_cast<std::size_t>(it->second)].max_power;
    if (raw < 0.0 || raw > maxp)
      throw IoError(where + ": power " + f[2] + " outside [0, max_power=" +
                    std::to_string(maxp) + "] for farm '" + f[1] + "'");
    if (!days[day][it->second].emplace(tod, raw / maxp).second)
      throw IoError(where + ": duplicate reading for farm '" + f[1] + "' at " +
                    ts);
  }
  if (days.empty()) throw IoError(data_path + ": no readings");

  // The horizon is the modal readings-per-farm-day count.
  std::map<std::size_t, int> count_votes;
  for (const auto& [day, by_farm] : days)
    for (const auto& [farm, readings] : by_farm)
      ++count_votes[readings.size()];
  std::size_t horizon = 0;
  int best = -1;
  for (const auto& [count, votes] : count_votes)
    if (votes > best || (votes == best && count > horizon)) {
      best = votes;
      horizon = count;
    }
  ds.horizon = static_cast<int>(horizon);
  ds.resolution_hours = 24.0 / static_cast<double>(horizon);

  for (const auto& [day, by_farm] : days) {
    bool complete = by_farm.size() == ds.farms.size();
    for (const auto& [farm, readings] : by_farm)
      if (readings.size() != horizon) complete = false;
    if (!complete) {
      ++result.dropped_days;
      continue;
    }
    std::vector<double> sample(ds.farms.size() * horizon);
    for (const auto& [farm, readings] : by_farm) {
      int step = 0;
      for (const auto& [tod, v] : readings)
        sample[static_cast<std::size_t>(farm) * horizon + step++] = v;
    }
    ds.samples.push_back(std::move(sample));
  }
  if (ds.samples.empty())
    throw IoError(data_path + ": no complete days (dropped " +
                  std::to_string(result.dropped_days) + ")");
  ds.validate();
  return result;
}

}  // namespace scengen
