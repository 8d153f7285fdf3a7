// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "scengen/common.hpp"
#include "scengen/dataset.hpp"
#include "scengen/ops.hpp"
#include "scengen/rng.hpp"

namespace scengen {

/// Configuration of the synthetic wind/solar dataset generators.
struct SynthConfig {
  enum class Kind { kWind, kSolar };
  Kind kind = Kind::kWind;
  std::map<Terrain, int> parks_per_terrain;
  int n_days = 500;
  /// AR(1) coefficient of the hourly latent processes, in [0,1).
  double temporal_persistence = 0.96;
  /// Weight of the shared per-terrain latent against the per-farm one, [0,1].
  double spatial_coupling = 0.55;
  /// Target pooled mean power per terrain (fraction of rated power).
  std::map<Terrain, double> terrain_mean_targets = {
      {Terrain::kFlatland, 0.201},
      {Terrain::kForest, 0.263},
      {Terrain::kOffshore, 0.381},
      {Terrain::kSolar, 0.15},
  };
  std::uint64_t seed = 1;
};

namespace detail {

// Logistic power curve with hard saturation at both ends, so that the
// generated distribution carries point mass at 0 (becalmed) and at 1
// (rated power), like measured farm output does.
constexpr double kCurveGain = 1.6;
constexpr double kCurveCut = 0.08;

inline double power_curve(double z, double offset) {
  const double raw = sigmoid_scalar(kCurveGain * (z - offset));
  const double stretched = (raw - kCurveCut) / (1.0 - 2.0 * kCurveCut);
  return std::clamp(stretched, 0.0, 1.0);
}

// Finds the curve offset whose empirical mean over `latents` hits `target`.
// The mean is strictly decreasing in the offset, so plain bisection works.
inline double calibrate_offset(const std::vector<double>& latents,
                               double target,
                               double (*mapped)(double, double)) {
  double lo = -12.0, hi = 12.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0.0;
    for (double z : latents) mean += mapped(z, mid);
    mean /= static_cast<double>(latents.size());
    if (mean > target) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Stationary AR(1) path with unit marginal variance.
inline std::vector<double> ar1_path(std::size_t len, double phi, Rng& rng) {
  std::vector<double> z(len);
  if (len == 0) return z;
  z[0] = rng.normal();
  const double innov = std::sqrt(1.0 - phi * phi);
  for (std::size_t t = 1; t < len; ++t)
    z[t] = phi * z[t - 1] + innov * rng.normal();
  return z;
}

inline void validate_synth_common(const SynthConfig& cfg) {
  int total = 0;
  for (const auto& [terrain, count] : cfg.parks_per_terrain) {
    if (count < 0)
      throw ConfigError("parks_per_terrain has a negative count for " +
                        std::string(terrain_name(terrain)));
    total += count;
  }
  if (total == 0)
    throw ConfigError("parks_per_terrain holds no parks");
  if (cfg.n_days < 1) throw ConfigError("n_days must be positive");
  if (!(cfg.temporal_persistence >= 0.0 && cfg.temporal_persistence < 1.0))
    throw ConfigError("temporal_persistence must lie in [0,1)");
  if (!(cfg.spatial_coupling >= 0.0 && cfg.spatial_coupling <= 1.0))
    throw ConfigError("spatial_coupling must lie in [0,1]");
  for (const auto& [terrain, count] : cfg.parks_per_terrain) {
    if (count == 0) continue;
    auto it = cfg.terrain_mean_targets.find(terrain);
    if (it == cfg.terrain_mean_targets.end())
      throw ConfigError(std::string("no mean target for terrain ") +
                        terrain_name(terrain));
    if (!(it->second > 0.0 && it->second < 1.0))
      throw ConfigError(std::string("mean target for ") +
                        terrain_name(terrain) + " must lie in (0,1)");
  }
}

}  // namespace detail

/// Clear-sky envelope of a 3-hourly solar day: zero at night, bell-shaped
/// around noon, summing to 3.9 (below the 4.0 daily stress ceiling).
inline std::array<double, 8> clear_sky_envelope() {
  return {0.0, 0.25, 0.7, 1.0, 1.0, 0.7, 0.25, 0.0};
}

/// Synthesizes a wind dataset: per terrain a shared AR(1) latent, per farm an
/// independent AR(1) innovation mixed by spatial_coupling, mapped through a
/// clipped logistic power curve whose per-terrain offset is bisected until
/// the empirical mean matches the terrain target.
inline ScenarioDataset synth_wind(const SynthConfig& cfg) {
  if (cfg.kind != SynthConfig::Kind::kWind)
    throw ConfigError("synth_wind called with a non-wind config");
  detail::validate_synth_common(cfg);
  for (const auto& [terrain, count] : cfg.parks_per_terrain)
    if (count > 0 && terrain == Terrain::kSolar)
      throw ConfigError("wind config may not request solar parks");

  constexpr int kHorizon = 24;
  const std::size_t total_hours =
      static_cast<std::size_t>(cfg.n_days) * kHorizon;
  const double w_shared = std::sqrt(cfg.spatial_coupling);
  const double w_own = std::sqrt(1.0 - cfg.spatial_coupling);

  Rng rng(cfg.seed);
  ScenarioDataset ds;
  ds.horizon = kHorizon;
  ds.resolution_hours = 1.0;

  std::vector<std::vector<double>> farm_values;  // mapped power per farm
  for (Terrain terrain : {Terrain::kFlatland, Terrain::kForest,
                          Terrain::kOffshore}) {
    auto pc = cfg.parks_per_terrain.find(terrain);
    if (pc == cfg.parks_per_terrain.end() || pc->second == 0) continue;
    const int n_farms = pc->second;
    const std::vector<double> shared =
        detail::ar1_path(total_hours, cfg.temporal_persistence, rng);

    std::vector<std::vector<double>> latents(static_cast<std::size_t>(n_farms));
    std::vector<double> pooled;
    pooled.reserve(total_hours * static_cast<std::size_t>(n_farms));
    for (int f = 0; f < n_farms; ++f) {
      std::vector<double> own =
          detail::ar1_path(total_hours, cfg.temporal_persistence, rng);
      for (std::size_t t = 0; t < total_hours; ++t)
        own[t] = w_shared * shared[t] + w_own * own[t];
      pooled.insert(pooled.end(), own.begin(), own.end());
      latents[static_cast<std::size_t>(f)] = std::move(own);
    }
    const double offset = detail::calibrate_offset(
        pooled, cfg.terrain_mean_targets.at(terrain), &detail::power_curve);

    for (int f = 0; f < n_farms; ++f) {
      char id[32];
      std::snprintf(id, sizeof(id), "%s_%02d", terrain_name(terrain), f);
      ds.farms.push_back({id, terrain, 1.0});
      auto& vals = latents[static_cast<std::size_t>(f)];
      for (auto& z : vals) z = detail::power_curve(z, offset);
      farm_values.push_back(std::move(vals));
    }
  }

  for (int d = 0; d < cfg.n_days; ++d) {
    std::vector<double> sample(farm_values.size() * kHorizon);
    for (std::size_t f = 0; f < farm_values.size(); ++f)
      for (int h = 0; h < kHorizon; ++h)
        sample[f * kHorizon + h] =
            farm_values[f][static_cast<std::size_t>(d) * kHorizon + h];
    ds.samples.push_back(std::move(sample));
  }
  ds.validate();
  return ds;
}

/// Synthesizes a 3-hourly solar dataset: clear-sky bell times an AR(1)
/// cloudiness factor in (0,1); first and last steps of every day are exactly
/// zero (night).
inline ScenarioDataset synth_solar(const SynthConfig& cfg) {
  if (cfg.kind != SynthConfig::Kind::kSolar)
    throw ConfigError("synth_solar called with a non-solar config");
  detail::validate_synth_common(cfg);
  for (const auto& [terrain, count] : cfg.parks_per_terrain)
    if (count > 0 && terrain != Terrain::kSolar)
      throw ConfigError("solar config may only request solar parks");
  const int n_farms = cfg.parks_per_terrain.at(Terrain::kSolar);

  constexpr int kHorizon = 8;
  const auto env = clear_sky_envelope();
  double env_mean = 0;
  for (double e : env) env_mean += e;
  env_mean /= kHorizon;
  const double target = cfg.terrain_mean_targets.at(Terrain::kSolar);
  if (target >= env_mean)
    throw ConfigError("solar mean target " + std::to_string(target) +
                      " exceeds the clear-sky ceiling " +
                      std::to_string(env_mean));

  const std::size_t total_steps =
      static_cast<std::size_t>(cfg.n_days) * kHorizon;
  const double w_shared = std::sqrt(cfg.spatial_coupling);
  const double w_own = std::sqrt(1.0 - cfg.spatial_coupling);

  Rng rng(cfg.seed);
  const std::vector<double> shared =
      detail::ar1_path(total_steps, cfg.temporal_persistence, rng);
  std::vector<std::vector<double>> latents(static_cast<std::size_t>(n_farms));
  for (int f = 0; f < n_farms; ++f) {
    std::vector<double> own =
        detail::ar1_path(total_steps, cfg.temporal_persistence, rng);
    for (std::size_t t = 0; t < total_steps; ++t)
      own[t] = w_shared * shared[t] + w_own * own[t];
    latents[static_cast<std::size_t>(f)] = std::move(own);
  }

  // Bisect the cloudiness offset on the pooled day/night-weighted mean.
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    double mean = 0;
    for (const auto& lat : latents)
      for (std::size_t t = 0; t < total_steps; ++t)
        mean += env[t % kHorizon] *
                sigmoid_scalar(detail::kCurveGain * (lat[t] - mid));
    mean /= static_cast<double>(total_steps) * n_farms;
    if (mean > target) lo = mid;
    else hi = mid;
  }
  const double offset = 0.5 * (lo + hi);

  ScenarioDataset ds;
  ds.horizon = kHorizon;
  ds.resolution_hours = 3.0;
  for (int f = 0; f < n_farms; ++f) {
    char id[32];
    std::snprintf(id, sizeof(id), "solar_%02d", f);
    ds.farms.push_back({id, Terrain::kSolar, 1.0});
  }
  for (int d = 0; d < cfg.n_days; ++d) {
    std::vector<double> sample(static_cast<std::size_t>(n_farms) * kHorizon);
    for (int f = 0; f < n_farms; ++f)
      for (int h = 0; h < kHorizon; ++h) {
        const std::size_t t = static_cast<std::size_t>(d) * kHorizon + h;
        const double cloud = sigmoid_scalar(
            detail::kCurveGain * (latents[static_cast<std::size_t>(f)][t] - offset));
        sample[static_cast<std::size_t>(f) * kHorizon + h] = env[h] * cloud;
      }
    ds.samples.push_back(std::move(sample));
  }
  ds.validate();
  return ds;
}

/// Dispatches on cfg.kind.
inline ScenarioDataset synthesize(const SynthConfig& cfg) {
  return cfg.kind == SynthConfig::Kind::kWind ? synth_wind(cfg)
                                              : synth_solar(cfg);
}

}  // namespace scengen
