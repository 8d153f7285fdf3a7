// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "scengen/common.hpp"
#include "scengen/gan.hpp"

namespace scengen {

namespace detail {

constexpr char kCkptMagic[8] = {'S', 'G', 'A', 'N', 'C', 'K', '0', '1'};

inline void write_u64(std::ostream& out, std::uint64_t v) {
  char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(buf, 8);
}

inline std::uint64_t read_u64(std::istream& in, const std::string& path) {
  char buf[8];
  if (!in.read(buf, 8))
    throw CorruptArtifactError(path + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[i]))
         << (8 * i);
  return v;
}

inline void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

inline double read_f64(std::istream& in, const std::string& path) {
  const std::uint64_t bits = read_u64(in, path);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline void write_str(std::ostream& out, const std::string& s) {
  write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_str(std::istream& in, const std::string& path) {
  const std::uint64_t len = read_u64(in, path);
  if (len > (1u << 20))
    throw CorruptArtifactError(path + ": implausible string length");
  std::string s(len, '\0');
  if (len && !in.read(s.data(), static_cast<std::streamsize>(len)))
    throw CorruptArtifactError(path + ": truncated checkpoint");
  return s;
}

inline void write_f64s(std::ostream& out, const std::vector<double>& v) {
  write_u64(out, v.size());
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> read_f64s(std::istream& in,
                                     const std::string& path) {
  const std::uint64_t len = read_u64(in, path);
  if (len > (1ull << 30))
    throw CorruptArtifactError(path + ": implausible array length");
  std::vector<double> v(len);
  if (len && !in.read(reinterpret_cast<char*>(v.data()),
                      static_cast<std::streamsize>(len * sizeof(double))))
    throw CorruptArtifactError(path + ": truncated checkpoint");
  return v;
}

// Every parameter and running-stat array of the pair, with stable names.
inline std::vector<std::pair<std::string, std::vector<double>*>>
named_arrays(TrainedGan& model) {
  std::vector<std::pair<std::string, std::vector<double>*>> arrays;
  auto add_layers = [&](std::vector<GanLayer>& layers, const std::string& tag) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string base = tag + std::to_string(i) + ".";
      arrays.emplace_back(base + "weight", &layers[i].weight.values());
      arrays.emplace_back(base + "bias", &layers[i].bias.values());
      if (layers[i].has_bn) {
        arrays.emplace_back(base + "gamma", &layers[i].gamma.values());
        arrays.emplace_back(base + "beta", &layers[i].beta.values());
        arrays.emplace_back(base + "running_mean", &layers[i].bn.running_mean);
        arrays.emplace_back(base + "running_var", &layers[i].bn.running_var);
      }
    }
  };
  add_layers(model.generator->layers(), "g");
  add_layers(model.discriminator->layers(), "d");
  arrays.emplace_back("d.fc.weight", &model.discriminator->fc_weight().values());
  arrays.emplace_back("d.fc.bias", &model.discriminator->fc_bias().values());
  return arrays;
}

}  // namespace detail

/// Binary checkpoint: format tag, config echo, farm metadata, loss history
/// and every parameter / running-statistic array. Save/load round-trips
/// bit-exactly.
inline void save_checkpoint(TrainedGan& model, const std::string& path) {
  if (!model.generator || !model.discriminator)
    throw ConfigError("cannot checkpoint an empty model");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(detail::kCkptMagic, 8);

  const GanConfig& cfg = model.config;
  detail::write_u64(out, cfg.layers.size());
  for (const auto& sp : cfg.layers) {
    for (int v : {sp.kh, sp.kw, sp.sh, sp.sw, sp.ph, sp.pw, sp.in_channels,
                  sp.out_channels})
      detail::write_u64(out, static_cast<std::uint64_t>(v));
  }
  detail::write_u64(out, cfg.channel_plan.size());
  for (int c : cfg.channel_plan)
    detail::write_u64(out, static_cast<std::uint64_t>(c));
  detail::write_str(out, loss_kind_name(cfg.loss_kind));
  detail::write_u64(out, static_cast<std::uint64_t>(cfg.epochs));
  detail::write_f64(out, cfg.learning_rate);
  detail::write_u64(out, static_cast<std::uint64_t>(cfg.batch_size));
  detail::write_u64(out, static_cast<std::uint64_t>(cfg.critic_iters));
  detail::write_f64(out, cfg.clip_c);
  detail::write_f64(out, cfg.leaky_slope);
  detail::write_u64(out, cfg.seed);

  detail::write_u64(out, static_cast<std::uint64_t>(model.parks));
  detail::write_u64(out, static_cast<std::uint64_t>(model.horizon));
  detail::write_f64(out, model.resolution_hours);
  detail::write_u64(out, model.farms.size());
  for (const auto& f : model.farms) {
    detail::write_str(out, f.farm_id);
    detail::write_str(out, terrain_name(f.terrain));
    detail::write_f64(out, f.max_power);
  }
  detail::write_u64(out, model.loss_history.size());
  for (const auto& [d, g] : model.loss_history) {
    detail::write_f64(out, d);
    detail::write_f64(out, g);
  }
  detail::write_u64(out, model.completed ? 1 : 0);

  auto arrays = detail::named_arrays(model);
  detail::write_u64(out, arrays.size());
  for (auto& [name, values] : arrays) {
    detail::write_str(out, name);
    detail::write_f64s(out, *values);
  }
  if (!out) throw IoError("failed writing " + path);
}

inline TrainedGan load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, detail::kCkptMagic, 8) != 0)
    throw CorruptArtifactError(path + ": not a gan checkpoint");

  TrainedGan model;
  GanConfig& cfg = model.config;
  const std::uint64_t n_layers = detail::read_u64(in, path);
  if (n_layers == 0 || n_layers > 64)
    throw CorruptArtifactError(path + ": implausible layer count");
  for (std::uint64_t i = 0; i < n_layers; ++i) {
    ConvSpec sp;
    sp.kh = static_cast<int>(detail::read_u64(in, path));
    sp.kw = static_cast<int>(detail::read_u64(in, path));
    sp.sh = static_cast<int>(detail::read_u64(in, path));
    sp.sw = static_cast<int>(detail::read_u64(in, path));
    sp.ph = static_cast<int>(detail::read_u64(in, path));
    sp.pw = static_cast<int>(detail::read_u64(in, path));
    sp.in_channels = static_cast<int>(detail::read_u64(in, path));
    sp.out_channels = static_cast<int>(detail::read_u64(in, path));
    cfg.layers.push_back(sp);
  }
  const std::uint64_t n_plan = detail::read_u64(in, path);
  for (std::uint64_t i = 0; i < n_plan; ++i)
    cfg.channel_plan.push_back(static_cast<int>(detail::read_u64(in, path)));
  cfg.loss_kind = loss_kind_from_name(detail::read_str(in, path));
  cfg.epochs = static_cast<int>(detail::read_u64(in, path));
  cfg.learning_rate = detail::read_f64(in, path);
  cfg.batch_size = static_cast<int>(detail::read_u64(in, path));
  cfg.critic_iters = static_cast<int>(detail::read_u64(in, path));
  cfg.clip_c = detail::read_f64(in, path);
  cfg.leaky_slope = detail::read_f64(in, path);
  cfg.seed = detail::read_u64(in, path);

  model.parks = static_cast<int>(detail::read_u64(in, path));
  model.horizon = static_cast<int>(detail::read_u64(in, path));
  model.resolution_hours = detail::read_f64(in, path);
  const std::uint64_t n_farms = detail::read_u64(in, path);
  if (n_farms != static_cast<std::uint64_t>(model.parks))
    throw CorruptArtifactError(path + ": farm count disagrees with parks");
  for (std::uint64_t i = 0; i < n_farms; ++i) {
    FarmMeta f;
    f.farm_id = detail::read_str(in, path);
    f.terrain = terrain_from_name(detail::read_str(in, path));
    f.max_power = detail::read_f64(in, path);
    model.farms.push_back(std::move(f));
  }
  const std::uint64_t n_hist = detail::read_u64(in, path);
  for (std::uint64_t i = 0; i < n_hist; ++i) {
    const double d = detail::read_f64(in, path);
    const double g = detail::read_f64(in, path);
    model.loss_history.emplace_back(d, g);
  }
  model.completed = detail::read_u64(in, path) != 0;

  try {
    cfg.validate_for_shape(model.parks, model.horizon);
  } catch (const ConfigError& e) {
    throw CorruptArtifactError(path + ": inconsistent config: " + e.what());
  }
  Rng dummy(0);
  model.generator.emplace(cfg, model.parks, model.horizon, dummy);
  model.discriminator.emplace(cfg, model.parks, model.horizon, dummy);

  auto arrays = detail::named_arrays(model);
  const std::uint64_t n_arrays = detail::read_u64(in, path);
  if (n_arrays != arrays.size())
    throw CorruptArtifactError(path + ": expected " +
                               std::to_string(arrays.size()) + " arrays, got " +
                               std::to_string(n_arrays));
  for (auto& [name, values] : arrays) {
    const std::string got = detail::read_str(in, path);
    if (got != name)
      throw CorruptArtifactError(path + ": array '" + got + "' where '" +
                                 name + "' was expected");
    std::vector<double> data = detail::read_f64s(in, path);
    if (data.size() != values->size())
      throw CorruptArtifactError(path + ": array '" + name + "' holds " +
                                 std::to_string(data.size()) +
                                 " values, expected " +
                                 std::to_string(values->size()));
    *values = std::move(data);
  }
  return model;
}

}  // namespace scengen
