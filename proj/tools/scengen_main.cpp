// Copyright 2026 The scengen Authors
// SPDX-License-Identifier: Apache-2.0
//
// Batch front end for the scenario toolkit: synthesize or ingest datasets,
// train the adversarial models or the copula baseline, draw scenarios from
// checkpoints, and produce evaluation reports. Every command is
// file-driven and deterministic for a fixed (config, seed) pair.
//
// Exit codes: 0 ok, 2 config/validation, 3 io, 4 numerical abort,
// 5 corrupt artifact.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "scengen/checkpoint.hpp"
#include "scengen/copula.hpp"
#include "scengen/dataset.hpp"
#include "scengen/evaluate.hpp"
#include "scengen/gan.hpp"
#include "scengen/synth.hpp"

namespace {

using nlohmann::json;
using namespace scengen;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Typed field access over one JSON object that rejects unknown keys, so a
/// typo in a config file fails loudly with its path.
class Fields {
 public:
  Fields(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  std::optional<T> optional_as(const std::string& key) {
    if (!obj_.contains(key)) return std::nullopt;
    seen_.push_back(key);
    try {
      return obj_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  template <typename T>
  T require(const std::string& key) {
    auto v = optional_as<T>(key);
    if (!v) throw ConfigError(path_ + "." + key + ": missing required field");
    return *v;
  }

  template <typename T>
  T value_or(const std::string& key, T fallback) {
    auto v = optional_as<T>(key);
    return v ? *v : fallback;
  }

  const json& raw(const std::string& key) {
    seen_.push_back(key);
    return obj_.at(key);
  }
  bool has(const std::string& key) const { return obj_.contains(key); }

  void finish() {
    for (const auto& [key, value] : obj_.items())
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw ConfigError(path_ + "." + key + ": unknown field");
  }

 private:
  const json& obj_;
  std::string path_;
  std::vector<std::string> seen_;
};

struct CommonOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

// --------------------------------------------------------------------------
// synth
// --------------------------------------------------------------------------

int cmd_synth(const std::string& config_path, const CommonOverrides& ov) {
  json root = load_json(config_path);
  Fields f(root, config_path);

  SynthConfig cfg;
  const std::string kind = f.require<std::string>("kind");
  if (kind == "wind") cfg.kind = SynthConfig::Kind::kWind;
  else if (kind == "solar") cfg.kind = SynthConfig::Kind::kSolar;
  else throw ConfigError(config_path + ".kind: expected wind|solar");

  cfg.parks_per_terrain.clear();
  {
    const json& parks = f.raw("parks_per_terrain");
    if (!parks.is_object())
      throw ConfigError(config_path + ".parks_per_terrain: expected an object");
    for (const auto& [terrain, count] : parks.items())
      cfg.parks_per_terrain[terrain_from_name(terrain)] = count.get<int>();
  }
  cfg.n_days = f.require<int>("n_days");
  cfg.temporal_persistence =
      f.value_or("temporal_persistence", cfg.temporal_persistence);
  cfg.spatial_coupling = f.value_or("spatial_coupling", cfg.spatial_coupling);
  if (f.has("terrain_mean_targets")) {
    const json& targets = f.raw("terrain_mean_targets");
    for (const auto& [terrain, mean] : targets.items())
      cfg.terrain_mean_targets[terrain_from_name(terrain)] = mean.get<double>();
  }
  cfg.seed = ov.seed ? *ov.seed : f.require<std::uint64_t>("seed");
  const std::string out =
      ov.out ? *ov.out : f.require<std::string>("out");
  f.optional_as<std::uint64_t>("seed");  // mark consumed when overridden
  f.optional_as<std::string>("out");
  f.finish();

  ScenarioDataset ds = synthesize(cfg);
  write_archive(ds, out);

  std::printf("wrote %zu samples of %dx%d to %s\n", ds.size(), ds.parks(),
              ds.horizon, out.c_str());
  for (Terrain t : {Terrain::kFlatland, Terrain::kForest, Terrain::kOffshore,
                    Terrain::kSolar}) {
    const auto parks = ds.parks_of_terrain(t);
    if (parks.empty()) continue;
    const auto vals = ds.pooled_values(parks);
    double mean = 0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    std::printf("  %-9s %2zu parks, mean power %.4f\n", terrain_name(t),
                parks.size(), mean);
  }
  return 0;
}

// --------------------------------------------------------------------------
// train
// --------------------------------------------------------------------------

std::pair<int, int> parse_int_pair(const json& v, const std::string& where) {
  if (v.is_number_integer()) return {v.get<int>(), v.get<int>()};
  if (v.is_array() && v.size() == 2)
    return {v.at(0).get<int>(), v.at(1).get<int>()};
  throw ConfigError(where + ": expected an integer or a [h,w] pair");
}

GanConfig gan_config_from(Fields& f, const std::string& config_path,
                          const ScenarioDataset& ds) {
  GanConfig cfg;
  const bool has_layers = f.has("layers");
  if (f.has("preset")) {
    if (has_layers)
      throw ConfigError(config_path + ": give either preset or layers");
    cfg = gan_preset(f.require<std::string>("preset"));
    f.optional_as<std::vector<int>>("channel_plan");  // plan comes from preset
  } else if (has_layers) {
    cfg.channel_plan = f.require<std::vector<int>>("channel_plan");
    const json& layers = f.raw("layers");
    if (!layers.is_array() ||
        layers.size() + 1 != cfg.channel_plan.size())
      throw ConfigError(config_path +
                        ".layers: expected channel_plan length minus one "
                        "layer entries");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Fields lf(layers.at(i),
                config_path + ".layers[" + std::to_string(i) + "]");
      ConvSpec sp;
      const auto k = parse_int_pair(lf.raw("kernel"), "kernel");
      const auto s = parse_int_pair(lf.raw("stride"), "stride");
      const auto p = parse_int_pair(lf.raw("padding"), "padding");
      lf.finish();
      sp.kh = k.first;
      sp.kw = k.second;
      sp.sh = s.first;
      sp.sw = s.second;
      sp.ph = p.first;
      sp.pw = p.second;
      sp.in_channels = cfg.channel_plan[i];
      sp.out_channels = cfg.channel_plan[i + 1];
      cfg.layers.push_back(sp);
    }
  } else {
    auto preset = gan_preset_for_shape(ds.parks(), ds.horizon);
    if (!preset)
      throw ConfigError("no layer preset for a " + std::to_string(ds.parks()) +
                        "x" + std::to_string(ds.horizon) +
                        " dataset; give preset or layers in the config");
    cfg = gan_preset(*preset);
  }

  cfg.epochs = f.value_or("epochs", cfg.epochs);
  cfg.learning_rate = f.value_or("learning_rate", cfg.learning_rate);
  cfg.batch_size = f.value_or("batch_size", cfg.batch_size);
  cfg.critic_iters = f.value_or("critic_iters", cfg.critic_iters);
  cfg.clip_c = f.value_or("clip_c", cfg.clip_c);
  cfg.leaky_slope = f.value_or("leaky_slope", cfg.leaky_slope);
  return cfg;
}

int cmd_train(const std::string& config_path, const CommonOverrides& ov,
              std::optional<int> epochs_override) {
  json root = load_json(config_path);
  Fields f(root, config_path);

  const std::string dataset_dir = f.require<std::string>("dataset");
  const std::string model_kind = f.require<std::string>("model");
  const std::uint64_t seed =
      ov.seed ? *ov.seed : f.require<std::uint64_t>("seed");
  f.optional_as<std::uint64_t>("seed");
  const std::string out = ov.out ? *ov.out : f.require<std::string>("out");
  f.optional_as<std::string>("out");

  ScenarioDataset ds = read_archive(dataset_dir);

  if (model_kind == "copula") {
    f.finish();
    CopulaModel model = copula_fit(ds);
    std::filesystem::create_directories(out);
    copula_save(model, out + "/copula.model");
    std::printf("fitted copula on %zu samples: %d dims, %zu marginals -> %s\n",
                ds.size(), model.dims, model.marginals.size(),
                (out + "/copula.model").c_str());
    return 0;
  }
  if (model_kind != "bce" && model_kind != "wasserstein")
    throw ConfigError(config_path + ".model: expected bce|wasserstein|copula");

  GanConfig cfg = gan_config_from(f, config_path, ds);
  cfg.loss_kind = loss_kind_from_name(model_kind);
  cfg.seed = seed;
  if (epochs_override) cfg.epochs = *epochs_override;
  f.finish();
  cfg.validate_for_shape(ds.parks(), ds.horizon);

  TrainedGan model = train_gan(ds, cfg);

  std::filesystem::create_directories(out);
  save_checkpoint(model, out + "/model.ckpt");
  {
    std::ofstream hist(out + "/loss_history.csv");
    if (!hist) throw IoError("cannot write " + out + "/loss_history.csv");
    hist << "epoch,d_loss,g_loss\n";
    for (std::size_t e = 0; e < model.loss_history.size(); ++e)
      hist << e << ',' << detail::format_double(model.loss_history[e].first)
           << ',' << detail::format_double(model.loss_history[e].second)
           << '\n';
  }

  std::printf("trained %s gan for %d epochs on %zu samples -> %s\n",
              loss_kind_name(cfg.loss_kind), cfg.epochs, ds.size(),
              (out + "/model.ckpt").c_str());
  const auto& [d_loss, g_loss] = model.loss_history.back();
  std::printf("  final epoch: d_loss %.6f, g_loss %.6f\n", d_loss, g_loss);
  if (cfg.loss_kind == LossKind::kWasserstein) {
    double max_abs = 0;
    for (const auto& p : model.discriminator->parameters())
      for (double v : p.values()) max_abs = std::max(max_abs, std::fabs(v));
    std::printf("  critic parameter max-abs %.6f (clip %.6f)\n", max_abs,
                cfg.clip_c);
  }
  return 0;
}

// --------------------------------------------------------------------------
// ingest
// --------------------------------------------------------------------------

int cmd_ingest(const std::string& data_csv, const std::string& meta_csv,
               const std::string& out) {
  LoadResult res = load_csv(data_csv, meta_csv);
  write_archive(res.dataset, out);
  std::printf("ingested %zu complete days of %dx%d into %s (%d incomplete "
              "days dropped)\n",
              res.dataset.size(), res.dataset.parks(), res.dataset.horizon,
              out.c_str(), res.dropped_days);
  return 0;
}

// --------------------------------------------------------------------------
// split
// --------------------------------------------------------------------------

int cmd_split(const std::string& in_dir, double train_fraction,
              std::uint64_t seed, const std::string& out_train,
              const std::string& out_test) {
  ScenarioDataset ds = read_archive(in_dir);
  auto [train, test] = split(ds, train_fraction, seed);
  write_archive(train, out_train);
  write_archive(test, out_test);
  std::printf("split %zu samples into %zu train (%s) and %zu test (%s)\n",
              ds.size(), train.size(), out_train.c_str(), test.size(),
              out_test.c_str());
  return 0;
}

// --------------------------------------------------------------------------
// generate
// --------------------------------------------------------------------------

bool is_gan_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path);
  char magic[8] = {};
  in.read(magic, 8);
  return in && std::memcmp(magic, detail::kCkptMagic, 8) == 0;
}

int cmd_generate(std::string checkpoint, std::size_t n,
                 std::optional<std::uint64_t> seed_opt,
                 std::optional<std::string> out_opt,
                 const std::string& config_path) {
  std::uint64_t seed = seed_opt.value_or(0);
  bool have_seed = seed_opt.has_value();
  std::string out = out_opt.value_or("");
  if (!config_path.empty()) {
    json root = load_json(config_path);
    Fields f(root, config_path);
    if (checkpoint.empty())
      checkpoint = f.require<std::string>("checkpoint");
    f.optional_as<std::string>("checkpoint");
    if (n == 0) n = f.require<std::size_t>("n");
    f.optional_as<std::size_t>("n");
    if (!have_seed) {
      seed = f.require<std::uint64_t>("seed");
      have_seed = true;
    }
    f.optional_as<std::uint64_t>("seed");
    if (out.empty()) out = f.require<std::string>("out");
    f.optional_as<std::string>("out");
    f.finish();
  }
  if (checkpoint.empty()) throw ConfigError("generate: --checkpoint missing");
  if (!have_seed) throw ConfigError("generate: --seed missing");
  if (out.empty()) throw ConfigError("generate: --out missing");
  if (n == 0) throw ConfigError("generate: --n must be positive");
  ScenarioDataset ds;
  std::string tag;
  if (is_gan_checkpoint(checkpoint)) {
    TrainedGan model = load_checkpoint(checkpoint);
    ds = sample_scenarios(model, n, seed);
    tag = std::string(loss_kind_name(model.config.loss_kind)) +
          " gan checkpoint " + checkpoint;
  } else {
    CopulaModel model = copula_load(checkpoint);
    ds = copula_sample(model, n, seed);
    tag = "gaussian copula model " + checkpoint;
  }
  if (out.find('/') != std::string::npos)
    std::filesystem::create_directories(
        std::filesystem::path(out).parent_path());
  write_samples_csv(ds, out, tag);
  std::printf("wrote %zu scenarios of %dx%d to %s\n", ds.size(), ds.parks(),
              ds.horizon, out.c_str());
  return 0;
}

// --------------------------------------------------------------------------
// evaluate
// --------------------------------------------------------------------------

int cmd_evaluate(std::string real_dir, std::vector<std::string> generated_args,
                 std::optional<std::string> out_opt, bool uniform_baseline,
                 std::optional<std::uint64_t> seed_opt,
                 const std::string& config_path) {
  std::string out = out_opt.value_or("");
  std::uint64_t seed = seed_opt.value_or(0);
  if (!config_path.empty()) {
    json root = load_json(config_path);
    Fields f(root, config_path);
    if (real_dir.empty()) real_dir = f.require<std::string>("real");
    f.optional_as<std::string>("real");
    if (generated_args.empty() && f.has("generated")) {
      const json& gens = f.raw("generated");
      if (!gens.is_object())
        throw ConfigError(config_path + ".generated: expected an object");
      for (const auto& [name, path] : gens.items())
        generated_args.push_back(name + "=" + path.get<std::string>());
    }
    if (out.empty()) out = f.require<std::string>("out");
    f.optional_as<std::string>("out");
    uniform_baseline = f.value_or("uniform_baseline", uniform_baseline);
    if (!seed_opt) seed = f.value_or<std::uint64_t>("seed", 0);
    f.optional_as<std::uint64_t>("seed");
    f.finish();
  }
  if (real_dir.empty()) throw ConfigError("evaluate: --real missing");
  if (out.empty()) throw ConfigError("evaluate: --out missing");
  if (generated_args.empty() && !uniform_baseline)
    throw ConfigError("evaluate: no generated inputs given");
  ScenarioDataset real = read_archive(real_dir);

  std::vector<std::pair<std::string, ScenarioDataset>> generated;
  for (const auto& arg : generated_args) {
    const auto eq = arg.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == arg.size())
      throw ConfigError("evaluate: --generated expects name=path, got '" +
                        arg + "'");
    const std::string name = arg.substr(0, eq);
    const std::string path = arg.substr(eq + 1);
    try {
      if (std::filesystem::is_directory(path))
        generated.emplace_back(name, read_archive(path));
      else
        generated.emplace_back(name, read_samples_csv(path, real.farms));
    } catch (const IoError& e) {
      // input-contract problem for this command, not an environment failure
      throw ConfigError(e.what());
    }
  }
  if (uniform_baseline)
    generated.emplace_back(
        "uniform", uniform_noise_like(real, real.size(), seed));

  EvalReport rep = evaluate_models(real, generated);
  write_report(rep, out);

  std::printf("evaluation of %zu generated sets against %zu real samples -> "
              "%s\n", generated.size(), real.size(), out.c_str());
  for (const auto& [name, v] : rep.kld_global)
    std::printf("  symmetric KLD %-16s %.4f\n", name.c_str(), v);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scenario generation toolkit for renewable power planning"};
  app.require_subcommand(1);

  std::string config_path, out, checkpoint, real_dir;
  std::optional<std::uint64_t> seed_opt;
  std::optional<std::string> out_opt;
  std::optional<int> epochs_opt;
  std::uint64_t gen_seed = 0;
  std::size_t gen_n = 0;
  std::vector<std::string> generated_args;
  bool uniform_baseline = false;

  auto* synth = app.add_subcommand("synth", "synthesize a dataset archive");
  synth->add_option("--config", config_path, "synth config json")->required();
  synth->add_option("--seed", seed_opt, "override the config seed");
  synth->add_option("--out", out_opt, "override the output directory");

  auto* train = app.add_subcommand("train", "train a model on an archive");
  train->add_option("--config", config_path, "train config json")->required();
  train->add_option("--seed", seed_opt, "override the config seed");
  train->add_option("--out", out_opt, "override the output directory");
  train->add_option("--epochs", epochs_opt, "override the epoch count");

  std::string ingest_data, ingest_meta;
  auto* ingest = app.add_subcommand(
      "ingest", "normalize and reshape a raw time-series csv into an archive");
  ingest->add_option("--data", ingest_data,
                     "csv with header timestamp,farm_id,power")
      ->required();
  ingest->add_option("--meta", ingest_meta,
                     "csv with header farm_id,terrain,max_power")
      ->required();
  ingest->add_option("--out", out, "archive output directory")->required();

  std::string split_in, split_train, split_test;
  double train_fraction = 0.8;
  auto* splitcmd =
      app.add_subcommand("split", "partition an archive into train/test days");
  splitcmd->add_option("--in", split_in, "input dataset archive")->required();
  splitcmd->add_option("--train-fraction", train_fraction,
                       "fraction of days for training");
  splitcmd->add_option("--seed", gen_seed, "shuffle seed")->required();
  splitcmd->add_option("--out-train", split_train, "train archive directory")
      ->required();
  splitcmd->add_option("--out-test", split_test, "test archive directory")
      ->required();

  auto* gen = app.add_subcommand("generate", "sample scenarios from a model");
  gen->add_option("--config", config_path, "json with checkpoint/n/seed/out");
  gen->add_option("--checkpoint", checkpoint, "gan checkpoint or copula model");
  gen->add_option("--n", gen_n, "number of scenarios");
  gen->add_option("--seed", seed_opt, "sampling seed");
  gen->add_option("--out", out_opt, "output samples csv");

  auto* eval = app.add_subcommand("evaluate", "compare generated scenarios "
                                              "against a real archive");
  eval->add_option("--config", config_path,
                   "json with real/generated/out/seed");
  eval->add_option("--real", real_dir, "real dataset archive");
  eval->add_option("--generated", generated_args,
                   "name=path of a generated samples csv or archive");
  eval->add_option("--out", out_opt, "report output directory");
  eval->add_flag("--uniform-baseline", uniform_baseline,
                 "include an i.i.d. uniform noise baseline");
  eval->add_option("--seed", seed_opt, "seed for the uniform baseline");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    CommonOverrides ov{seed_opt, out_opt};
    if (synth->parsed()) return cmd_synth(config_path, ov);
    if (ingest->parsed()) return cmd_ingest(ingest_data, ingest_meta, out);
    if (splitcmd->parsed())
      return cmd_split(split_in, train_fraction, gen_seed, split_train,
                       split_test);
    if (train->parsed()) return cmd_train(config_path, ov, epochs_opt);
    if (gen->parsed())
      return cmd_generate(checkpoint, gen_n, seed_opt, out_opt, config_path);
    if (eval->parsed())
      return cmd_evaluate(real_dir, generated_args, out_opt, uniform_baseline,
                          seed_opt, config_path);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numerical abort: %s\n", e.what());
    return 4;
  } catch (const CorruptArtifactError& e) {
    std::fprintf(stderr, "corrupt artifact: %s\n", e.what());
    return 5;
  }
  return 0;
}
